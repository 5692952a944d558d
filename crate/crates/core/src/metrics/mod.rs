//! Outcome metrics over simulation traces: smoothness variances, deviation
//! from the safe-distance rule, and side-by-side comparison reports.

use crate::phase::{pipes_distance, PhaseError};
use crate::plant::SimTrace;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("traces cover different windows: `{a}` has {na} samples from {ta}, `{b}` has {nb} from {tb}")]
    WindowMismatch {
        a: String,
        na: usize,
        ta: f64,
        b: String,
        nb: usize,
        tb: f64,
    },
    #[error("no traces to compare")]
    Empty,
    #[error(transparent)]
    Phase(#[from] PhaseError),
}

/// Population variance (divides by the sample count).
pub fn variance(samples: &[f64]) -> Result<f64, MetricsError> {
    if samples.len() < 2 {
        return Err(MetricsError::TooFewSamples(samples.len()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    Ok(samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n)
}

/// Signed deviation of the trace's spacing from the safe distance at the
/// trace's own speed, per sample: spacing - L(1 + v/4.47).
pub fn pipes_error_series(trace: &SimTrace, fv_length: f64) -> Result<Vec<f64>, MetricsError> {
    trace
        .d
        .iter()
        .zip(&trace.v)
        .map(|(d, v)| Ok(d - pipes_distance(fv_length, v.max(0.0))?))
        .collect()
}

/// Per-subject outcome metrics over one shared window.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectMetrics {
    pub subject: String,
    pub velocity_variance: f64,
    pub acceleration_variance: f64,
    /// Final follower position minus the reference subject's final position.
    pub final_position_gap: f64,
    pub mean_abs_pipes_error: f64,
    pub max_abs_pipes_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// Subject whose trace anchors `final_position_gap`.
    pub reference: String,
    pub rows: Vec<SubjectMetrics>,
}

pub const COMPARISON_HEADER: &str = "subject,velocity_variance,acceleration_variance,\
final_position_gap,mean_abs_pipes_error,max_abs_pipes_error";

impl ComparisonReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(COMPARISON_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.subject,
                r.velocity_variance,
                r.acceleration_variance,
                r.final_position_gap,
                r.mean_abs_pipes_error,
                r.max_abs_pipes_error
            );
        }
        out
    }

    pub fn subject(&self, name: &str) -> Option<&SubjectMetrics> {
        self.rows.iter().find(|r| r.subject == name)
    }
}

/// Computes the metric table for a set of traces over one shared window.
/// All traces must cover the same grid. The reference for the position gap
/// is the subject named `human` when present, the alphabetically first
/// subject otherwise, so the result does not depend on insertion order.
pub fn compare(
    traces: &BTreeMap<String, SimTrace>,
    fv_length: f64,
) -> Result<ComparisonReport, MetricsError> {
    let (ref_name, ref_trace) = traces
        .get_key_value("human")
        .or_else(|| traces.iter().next())
        .ok_or(MetricsError::Empty)?;
    for (name, trace) in traces {
        let same = trace.len() == ref_trace.len()
            && !trace.is_empty()
            && (trace.t[0] - ref_trace.t[0]).abs() < 1e-9;
        if !same {
            return Err(MetricsError::WindowMismatch {
                a: ref_name.clone(),
                na: ref_trace.len(),
                ta: ref_trace.t.first().copied().unwrap_or(f64::NAN),
                b: name.clone(),
                nb: trace.len(),
                tb: trace.t.first().copied().unwrap_or(f64::NAN),
            });
        }
    }
    let ref_final = *ref_trace.x_fv.last().unwrap();
    let mut rows = Vec::new();
    for (name, trace) in traces {
        let err = pipes_error_series(trace, fv_length)?;
        let n = err.len() as f64;
        rows.push(SubjectMetrics {
            subject: name.clone(),
            velocity_variance: variance(&trace.v)?,
            acceleration_variance: variance(&trace.a)?,
            final_position_gap: trace.x_fv.last().unwrap() - ref_final,
            mean_abs_pipes_error: err.iter().map(|e| e.abs()).sum::<f64>() / n,
            max_abs_pipes_error: err.iter().fold(0.0_f64, |m, e| m.max(e.abs())),
        });
    }
    Ok(ComparisonReport {
        reference: ref_name.clone(),
        rows,
    })
}
