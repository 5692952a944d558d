//! Side-by-side training of every membership family on the same data, with
//! seeded repetition so the resulting table is reproducible.

use super::{evaluate, initial_fis, jitter_premises, train, AnfisError, Dataset, TrainingConfig};
use crate::fuzzy::{MfFamily, ALL_FAMILIES};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

#[derive(Debug, Clone)]
pub struct ComparisonConfig {
    pub mfs_per_input: usize,
    /// Independent repetitions per family; each gets its own split and
    /// jittered initialization derived from `seed`.
    pub runs: usize,
    pub seed: u64,
    /// Relative magnitude of the initialization jitter.
    pub jitter: f64,
    pub training: TrainingConfig,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        Self {
            mfs_per_input: 3,
            runs: 10,
            seed: 0,
            jitter: 0.02,
            training: TrainingConfig::default(),
        }
    }
}

/// One table row: run-averaged validation metrics for a family. `status` is
/// `ok` when every run finished; otherwise it describes the first failure
/// and the averages cover the runs that completed.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub family: MfFamily,
    pub mean_rmse: f64,
    pub mean_r2: f64,
    pub runs: usize,
    pub status: String,
}

fn run_family(
    data: &Dataset,
    family: MfFamily,
    cfg: &ComparisonConfig,
    run_seed: u64,
) -> Result<(f64, f64), AnfisError> {
    let (train_set, val_set) = data.split(run_seed)?;
    let mut fis = initial_fis(family, &train_set, cfg.mfs_per_input)?;
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    jitter_premises(&mut fis, cfg.jitter, &mut rng)?;
    let report = train(&fis, &train_set, &val_set, &cfg.training)?;
    let eval = evaluate(&report.fis, &val_set)?;
    Ok((eval.rmse, eval.r2))
}

/// Trains every family `cfg.runs` times on fresh splits of `data` and
/// reports mean validation RMSE and R². The same seed always yields the
/// same table. A failing run stops that family and is reported in its
/// `status`; the other families still run.
pub fn compare_families(
    data: &Dataset,
    cfg: &ComparisonConfig,
) -> Result<Vec<ComparisonRow>, AnfisError> {
    if cfg.runs == 0 {
        return Err(AnfisError::BadConfig("runs must be at least 1".into()));
    }
    let mean = |v: &[f64]| {
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let mut rows = Vec::with_capacity(ALL_FAMILIES.len());
    for family in ALL_FAMILIES {
        let mut rmses = Vec::new();
        let mut r2s = Vec::new();
        let mut status = String::from("ok");
        for run in 0..cfg.runs {
            let run_seed = cfg.seed.wrapping_add(run as u64);
            match run_family(data, family, cfg, run_seed) {
                Ok((rmse, r2)) => {
                    rmses.push(rmse);
                    r2s.push(r2);
                }
                Err(e) => {
                    status = format!("run {run}: {e}");
                    break;
                }
            }
        }
        rows.push(ComparisonRow {
            family,
            mean_rmse: mean(&rmses),
            mean_r2: mean(&r2s),
            runs: rmses.len(),
            status,
        });
    }
    Ok(rows)
}

/// Renders the comparison as CSV, one row per family in canonical order.
pub fn comparison_to_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("mf_type,mean_rmse,mean_r2,runs,status\n");
    for row in rows {
        let status = row.status.replace(',', ";");
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            row.family.short_name(),
            row.mean_rmse,
            row.mean_r2,
            row.runs,
            status
        );
    }
    out
}
