//! Behavioral phase detection for the follower during a cut-in: anticipation,
//! perception, preparation and relaxation boundaries, plus the settle time of
//! the lane change itself.

use crate::ingest::{MergeScenario, VehicleTrack};
use thiserror::Error;

/// Speed-to-spacing rate of the safe-distance rule, in m/s per vehicle
/// length (10 mi/h).
pub const SPACING_SPEED_UNIT: f64 = 4.47;

#[derive(Debug, Error)]
pub enum PhaseError {
    #[error("speed must be non-negative, got {0}")]
    NegativeSpeed(f64),
    #[error("vehicle length must be positive, got {0}")]
    NonPositiveLength(f64),
    #[error("thresholds must be strictly positive ({0} is not)")]
    BadThreshold(&'static str),
    #[error("track is empty")]
    EmptyTrack,
    #[error("{0}")]
    BadInput(String),
}

/// Safe following distance for a follower of length `length` at speed `v`:
/// one vehicle length per 4.47 m/s of speed, plus one length at standstill.
pub fn pipes_distance(length: f64, v: f64) -> Result<f64, PhaseError> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(PhaseError::NonPositiveLength(length));
    }
    if !(v >= 0.0) || !v.is_finite() {
        return Err(PhaseError::NegativeSpeed(v));
    }
    Ok(length * (1.0 + v / SPACING_SPEED_UNIT))
}

/// Detection thresholds. All fields must be strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Lateral speed (m/s) whose exceedance by the follower marks
    /// anticipation onset.
    pub vlat: f64,
    /// Jerk magnitude (m/s^3) below which the follower counts as calm.
    pub jerk: f64,
    /// Minimum duration (s) of a calm stretch to count as perception.
    pub perception_min: f64,
    /// Per-step lateral displacement (m) under which the lane change counts
    /// as settled.
    pub lc_settle_displacement: f64,
    /// Spacing-to-safe-distance ratio beyond which the follower is already
    /// cautious and no relaxation is expected.
    pub cautious_factor: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            vlat: 0.2,
            jerk: 0.6,
            perception_min: 0.5,
            lc_settle_displacement: 0.01,
            cautious_factor: 1.5,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), PhaseError> {
        let fields = [
            (self.vlat, "vlat"),
            (self.jerk, "jerk"),
            (self.perception_min, "perception_min"),
            (self.lc_settle_displacement, "lc_settle_displacement"),
            (self.cautious_factor, "cautious_factor"),
        ];
        for (value, name) in fields {
            if !(value > 0.0) || !value.is_finite() {
                return Err(PhaseError::BadThreshold(name));
            }
        }
        Ok(())
    }
}

/// How the relaxation boundary was determined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelaxationCase {
    /// The spacing crossed the safe distance; boundary at the crossing.
    Intersection,
    /// The spacing never reached the safe distance; boundary where it came
    /// closest.
    AggressiveMinDeviation,
    /// The spacing already exceeded the cautious margin at completion; no
    /// relaxation needed.
    CautiousNoRelaxation,
}

impl RelaxationCase {
    pub fn as_str(&self) -> &'static str {
        match self {
            RelaxationCase::Intersection => "intersection",
            RelaxationCase::AggressiveMinDeviation => "aggressive-min-deviation",
            RelaxationCase::CautiousNoRelaxation => "cautious-no-relaxation",
        }
    }
}

/// Phase boundaries of one scenario, in seconds on the scenario clock.
/// Fields are `None` when the corresponding event is absent from the window.
/// Present fields always satisfy `anticipation_start <= perception_start <
/// perception_end <= preparation_start <= lane_change_complete <=
/// relaxation_end`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseAnnotation {
    pub anticipation_start: Option<f64>,
    pub perception_start: Option<f64>,
    pub perception_end: Option<f64>,
    pub preparation_start: Option<f64>,
    pub lane_change_complete: Option<f64>,
    /// Whether the lane change actually settled inside the window.
    pub lc_settled: bool,
    pub relaxation_end: Option<f64>,
    pub relaxation_case: Option<RelaxationCase>,
}

impl PhaseAnnotation {
    /// Checks the ordering invariant over the present fields.
    pub fn is_ordered(&self) -> bool {
        let chain = [
            self.anticipation_start,
            self.perception_start,
            self.perception_end,
            self.preparation_start,
            self.lane_change_complete,
            self.relaxation_end,
        ];
        let mut last = f64::NEG_INFINITY;
        for v in chain.into_iter().flatten() {
            if v < last - 1e-9 {
                return false;
            }
            last = v;
        }
        if let (Some(s), Some(e)) = (self.perception_start, self.perception_end) {
            if e <= s {
                return false;
            }
        }
        true
    }
}

pub const ANNOTATION_HEADER: &str = "scenario,anticipation_start,perception_start,perception_end,\
preparation_start,lane_change_complete,lc_settled,relaxation_end,relaxation_case";

/// One CSV row for an annotation; absent boundaries are written as `NA`.
pub fn annotation_csv_row(scenario: &str, a: &PhaseAnnotation) -> String {
    let opt = |v: Option<f64>| v.map_or("NA".to_string(), |x| x.to_string());
    format!(
        "{},{},{},{},{},{},{},{},{}",
        scenario,
        opt(a.anticipation_start),
        opt(a.perception_start),
        opt(a.perception_end),
        opt(a.preparation_start),
        opt(a.lane_change_complete),
        a.lc_settled,
        opt(a.relaxation_end),
        a.relaxation_case.map_or("NA", |c| c.as_str()),
    )
}

/// Earliest time the follower's lateral speed magnitude exceeds the
/// threshold, or `None` if it never does.
pub fn detect_anticipation_start(
    fv: &VehicleTrack,
    th: &Thresholds,
) -> Result<Option<f64>, PhaseError> {
    th.validate()?;
    if fv.is_empty() {
        return Err(PhaseError::EmptyTrack);
    }
    Ok((0..fv.len())
        .find(|&i| fv.v_lat[i].abs() > th.vlat)
        .map(|i| fv.t[i]))
}

/// First stretch inside `[from, until]` where the follower's jerk magnitude
/// stays at or below the threshold for at least the minimum duration.
/// Returns `(start, end)`: `end` is the first exceedance after the stretch,
/// capped at `until`.
pub fn detect_perception(
    fv: &VehicleTrack,
    from: f64,
    until: f64,
    th: &Thresholds,
) -> Result<Option<(f64, f64)>, PhaseError> {
    th.validate()?;
    if fv.is_empty() {
        return Err(PhaseError::EmptyTrack);
    }
    if !(from.is_finite() && until.is_finite()) || until < from {
        return Err(PhaseError::BadInput(format!(
            "perception window [{from}, {until}] is not a valid interval"
        )));
    }
    let in_window: Vec<usize> = (0..fv.len())
        .filter(|&i| fv.t[i] >= from - 1e-9 && fv.t[i] <= until + 1e-9)
        .collect();
    let mut run_start: Option<usize> = None;
    for (pos, &i) in in_window.iter().enumerate() {
        let calm = fv.jerk[i].abs() <= th.jerk;
        match (calm, run_start) {
            (true, None) => run_start = Some(pos),
            (false, Some(s)) => {
                let start_t = fv.t[in_window[s]];
                let end_t = fv.t[i];
                if end_t - start_t >= th.perception_min - 1e-9 {
                    return Ok(Some((start_t, end_t.min(until))));
                }
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = run_start {
        let start_t = fv.t[in_window[s]];
        let end_t = fv.t[*in_window.last().unwrap()].min(until);
        if end_t - start_t >= th.perception_min - 1e-9 {
            return Ok(Some((start_t, end_t)));
        }
    }
    Ok(None)
}

/// Preparation starts the moment perception ends (the first jerk exceedance
/// after the calm stretch).
pub fn preparation_start(perception_end: f64) -> f64 {
    perception_end
}

/// Settle time of the lane change: the first time at or after the crossing
/// from which the lane changer's per-step lateral displacement stays under
/// the threshold for the rest of the track. The flag reports whether such a
/// time exists before the last sample (otherwise the end of the track is
/// returned with `false`).
pub fn detect_lane_change_complete(
    lc: &VehicleTrack,
    crossing_index: usize,
    th: &Thresholds,
) -> Result<(f64, bool), PhaseError> {
    th.validate()?;
    let n = lc.len();
    if n == 0 {
        return Err(PhaseError::EmptyTrack);
    }
    if crossing_index >= n {
        return Err(PhaseError::BadInput(format!(
            "crossing index {crossing_index} outside track of {n} samples"
        )));
    }
    let last_big = (crossing_index + 1..n)
        .rev()
        .find(|&j| (lc.x_lat[j] - lc.x_lat[j - 1]).abs() >= th.lc_settle_displacement);
    match last_big {
        None => Ok((lc.t[crossing_index], crossing_index < n - 1)),
        Some(j) if j == n - 1 => Ok((lc.t[n - 1], false)),
        Some(j) => Ok((lc.t[j], true)),
    }
}

/// Relaxation boundary after the lane change completes at `completion`.
/// Checked in order: already cautious (spacing beyond `cautious_factor`
/// times the safe distance) ends relaxation immediately; otherwise the first
/// crossing of the safe distance; otherwise the closest approach to it.
pub fn detect_relaxation_end(
    scenario: &MergeScenario,
    completion: f64,
    th: &Thresholds,
) -> Result<(f64, RelaxationCase), PhaseError> {
    th.validate()?;
    if scenario.is_empty() {
        return Err(PhaseError::EmptyTrack);
    }
    let spacing = scenario.spacing_fv_lc();
    let t = scenario.t();
    let ic = scenario.fv.index_at(completion);
    // Forward speeds only: sensor noise around standstill must not abort
    // the scan.
    let err: Vec<f64> = (ic..t.len())
        .map(|i| {
            let s = pipes_distance(scenario.fv.length, scenario.fv.v_long[i].max(0.0))?;
            Ok(spacing[i] - s)
        })
        .collect::<Result<_, PhaseError>>()?;
    let s0 = pipes_distance(scenario.fv.length, scenario.fv.v_long[ic].max(0.0))?;
    if spacing[ic] > th.cautious_factor * s0 {
        return Ok((t[ic], RelaxationCase::CautiousNoRelaxation));
    }
    if err[0] == 0.0 {
        return Ok((t[ic], RelaxationCase::Intersection));
    }
    for k in 1..err.len() {
        if err[k] == 0.0 || (err[k - 1] < 0.0) != (err[k] < 0.0) {
            return Ok((t[ic + k], RelaxationCase::Intersection));
        }
    }
    let best = err
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.abs().partial_cmp(&b.abs()).unwrap())
        .map(|(k, _)| k)
        .unwrap();
    Ok((t[ic + best], RelaxationCase::AggressiveMinDeviation))
}

/// Runs all detectors over one scenario. Boundaries that depend on an absent
/// event stay `None`: no lane-boundary crossing in the window means only
/// anticipation can be reported, and an anticipation onset found after the
/// completion time belongs to some later maneuver and is dropped.
pub fn annotate(scenario: &MergeScenario, th: &Thresholds) -> Result<PhaseAnnotation, PhaseError> {
    th.validate()?;
    if scenario.is_empty() {
        return Err(PhaseError::EmptyTrack);
    }
    let mut ann = PhaseAnnotation {
        anticipation_start: detect_anticipation_start(&scenario.fv, th)?,
        ..PhaseAnnotation::default()
    };
    let Some(crossing) = scenario.lane_change_frame else {
        return Ok(ann);
    };
    let (complete, settled) = detect_lane_change_complete(&scenario.lc, crossing, th)?;
    ann.lane_change_complete = Some(complete);
    ann.lc_settled = settled;

    if let Some(start) = ann.anticipation_start {
        if start > complete {
            ann.anticipation_start = None;
        }
    }
    if let Some(start) = ann.anticipation_start {
        if let Some((ps, pe)) = detect_perception(&scenario.fv, start, complete, th)? {
            ann.perception_start = Some(ps);
            ann.perception_end = Some(pe);
            ann.preparation_start = Some(preparation_start(pe));
        }
    }
    let (relax, case) = detect_relaxation_end(scenario, complete, th)?;
    ann.relaxation_end = Some(relax);
    ann.relaxation_case = Some(case);
    debug_assert!(ann.is_ordered());
    Ok(ann)
}
