//! End-to-end wiring: annotated scenarios become training datasets, trained
//! systems become controllers, and controller runs are compared against the
//! replayed human over the same window.

use crate::anfis::{AnfisError, Dataset};
use crate::control::LongitudinalController;
use crate::ingest::{IngestError, MergeScenario};
use crate::metrics::MetricsError;
use crate::phase::{annotate, PhaseAnnotation, PhaseError, Thresholds};
use crate::plant::{replay_human, simulate_closed_loop, PlantError, SimConfig, SimTrace};
use thiserror::Error;

/// Column names of the training dataset, in feed order.
pub const DATASET_INPUTS: [&str; 4] = ["vlat", "jerk", "dlong", "dlat"];
pub const DATASET_TARGET: &str = "accel_target";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Phase(#[from] PhaseError),
    #[error(transparent)]
    Anfis(#[from] AnfisError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("no scenario contributed any rows")]
    EmptyDataset,
}

/// The window over which the controller is engaged: detected anticipation
/// onset (or the window start) up to detected relaxation end (or the window
/// end).
pub fn engagement_window(scenario: &MergeScenario, ann: &PhaseAnnotation) -> (f64, f64) {
    let t = scenario.t();
    let start = ann.anticipation_start.unwrap_or(t[0]);
    let end = ann.relaxation_end.unwrap_or(*t.last().unwrap());
    (start, end.max(start))
}

/// One training row per sample of a scenario's engagement window: the four
/// controller observations against the follower's realized acceleration.
fn push_rows(scenario: &MergeScenario, window: (f64, f64), xs: &mut Vec<Vec<f64>>, ys: &mut Vec<f64>, groups: &mut Vec<String>) {
    let spacing = scenario.spacing_fv_lc();
    let fv = &scenario.fv;
    let lc = &scenario.lc;
    for i in 0..scenario.len() {
        if fv.t[i] < window.0 - 1e-9 || fv.t[i] > window.1 + 1e-9 {
            continue;
        }
        xs.push(vec![
            fv.v_lat[i],
            fv.jerk[i].abs(),
            spacing[i],
            (lc.x_lat[i] - fv.x_lat[i]).abs(),
        ]);
        ys.push(fv.a_long[i]);
        groups.push(scenario.meta.name.clone());
    }
}

/// Builds the training dataset from scenarios: each is annotated, then
/// sampled over its engagement window. Rows are grouped by scenario name so
/// splits keep whole maneuvers together.
pub fn dataset_from_scenarios(
    scenarios: &[MergeScenario],
    th: &Thresholds,
) -> Result<Dataset, PipelineError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut groups = Vec::new();
    for scenario in scenarios {
        let ann = annotate(scenario, th)?;
        push_rows(scenario, engagement_window(scenario, &ann), &mut xs, &mut ys, &mut groups);
    }
    if xs.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    let names = DATASET_INPUTS.iter().map(|s| s.to_string()).collect();
    let data = Dataset::new(names, DATASET_TARGET.to_string(), xs, ys)?.with_groups(groups)?;
    Ok(data)
}

/// Human replay and closed-loop run over the same engagement window.
pub struct PairedRun {
    pub annotation: PhaseAnnotation,
    pub window: (f64, f64),
    pub human: SimTrace,
    pub controller: SimTrace,
}

/// Annotates the scenario, fixes the engagement window, and produces the
/// replayed-human and closed-loop traces on the same grid.
pub fn simulate_pair(
    scenario: &MergeScenario,
    controller: &dyn LongitudinalController,
    th: &Thresholds,
    base: &SimConfig,
) -> Result<PairedRun, PipelineError> {
    let annotation = annotate(scenario, th)?;
    let window = engagement_window(scenario, &annotation);
    let cfg = SimConfig {
        horizon: window.1 - window.0,
        ..*base
    };
    let human = replay_human(scenario, &cfg, window.0)?;
    let ctrl = simulate_closed_loop(scenario, controller, &cfg, window.0)?;
    Ok(PairedRun {
        annotation,
        window,
        human,
        controller: ctrl,
    })
}
