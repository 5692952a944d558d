//! Adaptive-network training for Takagi–Sugeno systems: hybrid estimation
//! (least squares for consequents, gradient descent for premises), dataset
//! handling, and a membership-family comparison harness.

mod compare;
mod train;

pub use compare::{comparison_to_csv, compare_families, ComparisonConfig, ComparisonRow};
pub use train::{
    lse_consequents, premise_gradients, train, EpochStats, TrainReport, TrainingConfig,
};

use crate::fuzzy::{
    grid_partition, FuzzyError, FuzzyInferenceSystem, FuzzyVariable, MfFamily,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnfisError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset has {got} inputs, system expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cannot split: need at least two {0}")]
    TooFewForSplit(&'static str),
    #[error("dataset line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("normal matrix is singular and the data are inconsistent; use a positive ridge")]
    SingularNormalMatrix,
    #[error("no rule fires on dataset row {row}")]
    NoRuleFires { row: usize },
    #[error("non-finite value: {context}")]
    NonFinite { context: String },
    #[error("epoch {epoch}: {source}")]
    Epoch {
        epoch: usize,
        #[source]
        source: Box<AnfisError>,
    },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
}

/// A supervised regression dataset: input rows, one scalar target per row,
/// and (optionally) a group label per row so splits can keep rows from the
/// same recording together.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    input_names: Vec<String>,
    target_name: String,
    groups: Option<Vec<String>>,
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
}

impl Dataset {
    pub fn new(
        input_names: Vec<String>,
        target_name: String,
        xs: Vec<Vec<f64>>,
        ys: Vec<f64>,
    ) -> Result<Self, AnfisError> {
        let d = Self {
            input_names,
            target_name,
            groups: None,
            xs,
            ys,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn with_groups(mut self, groups: Vec<String>) -> Result<Self, AnfisError> {
        if groups.len() != self.xs.len() {
            return Err(AnfisError::BadConfig(format!(
                "{} group labels for {} rows",
                groups.len(),
                self.xs.len()
            )));
        }
        self.groups = Some(groups);
        Ok(self)
    }

    fn validate(&self) -> Result<(), AnfisError> {
        if self.xs.is_empty() {
            return Err(AnfisError::EmptyDataset);
        }
        if self.xs.len() != self.ys.len() {
            return Err(AnfisError::BadConfig(format!(
                "{} input rows but {} targets",
                self.xs.len(),
                self.ys.len()
            )));
        }
        let n = self.input_names.len();
        if n == 0 {
            return Err(AnfisError::BadConfig("dataset has no input columns".into()));
        }
        for (i, row) in self.xs.iter().enumerate() {
            if row.len() != n {
                return Err(AnfisError::BadConfig(format!(
                    "row {i} has {} values, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(AnfisError::BadConfig(format!("row {i} has a non-finite input")));
            }
        }
        if let Some(bad) = self.ys.iter().position(|y| !y.is_finite()) {
            return Err(AnfisError::BadConfig(format!("row {bad} has a non-finite target")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn n_inputs(&self) -> usize {
        self.input_names.len()
    }

    pub fn input_names(&self) -> &[String] {
        &self.input_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn groups(&self) -> Option<&[String]> {
        self.groups.as_deref()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.xs
            .iter()
            .map(|r| r.as_slice())
            .zip(self.ys.iter().copied())
    }

    pub fn targets(&self) -> &[f64] {
        &self.ys
    }

    /// Per-input (min, max) over the rows. Constant columns are widened by
    /// 0.5 on both sides so they still form a proper universe.
    pub fn input_ranges(&self) -> Vec<(f64, f64)> {
        (0..self.n_inputs())
            .map(|v| {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for row in &self.xs {
                    lo = lo.min(row[v]);
                    hi = hi.max(row[v]);
                }
                if lo == hi {
                    (lo - 0.5, hi + 0.5)
                } else {
                    (lo, hi)
                }
            })
            .collect()
    }

    /// Deterministic 75/25 split. With group labels the split is by group
    /// (all rows of a group land on the same side); otherwise by row. Row
    /// order is preserved within each side.
    pub fn split(&self, seed: u64) -> Result<(Dataset, Dataset), AnfisError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let train_rows: Vec<bool> = match &self.groups {
            Some(groups) => {
                let unique: Vec<&String> = groups.iter().collect::<BTreeSet<_>>().into_iter().collect();
                if unique.len() < 2 {
                    return Err(AnfisError::TooFewForSplit("groups"));
                }
                let mut order: Vec<&String> = unique;
                order.shuffle(&mut rng);
                let n_train = (3 * order.len() / 4).max(1);
                let chosen: BTreeSet<&String> = order.into_iter().take(n_train).collect();
                groups.iter().map(|g| chosen.contains(g)).collect()
            }
            None => {
                if self.len() < 2 {
                    return Err(AnfisError::TooFewForSplit("rows"));
                }
                let mut order: Vec<usize> = (0..self.len()).collect();
                order.shuffle(&mut rng);
                let n_train = (3 * self.len() / 4).max(1);
                let chosen: Vec<bool> = {
                    let mut mask = vec![false; self.len()];
                    for &i in order.iter().take(n_train) {
                        mask[i] = true;
                    }
                    mask
                };
                chosen
            }
        };
        Ok((self.filter(&train_rows, true), self.filter(&train_rows, false)))
    }

    fn filter(&self, mask: &[bool], keep: bool) -> Dataset {
        let keep_idx: Vec<usize> = (0..self.len()).filter(|&i| mask[i] == keep).collect();
        Dataset {
            input_names: self.input_names.clone(),
            target_name: self.target_name.clone(),
            groups: self
                .groups
                .as_ref()
                .map(|g| keep_idx.iter().map(|&i| g[i].clone()).collect()),
            xs: keep_idx.iter().map(|&i| self.xs[i].clone()).collect(),
            ys: keep_idx.iter().map(|&i| self.ys[i]).collect(),
        }
    }

    /// Writes the dataset as CSV. A `scenario` column is emitted first when
    /// group labels are present.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.groups.is_some() {
            out.push_str("scenario,");
        }
        out.push_str(&self.input_names.join(","));
        let _ = writeln!(out, ",{}", self.target_name);
        for i in 0..self.len() {
            if let Some(groups) = &self.groups {
                let _ = write!(out, "{},", groups[i]);
            }
            for v in &self.xs[i] {
                let _ = write!(out, "{v},");
            }
            let _ = writeln!(out, "{}", self.ys[i]);
        }
        out
    }

    /// Parses the CSV form. The header's last column is the target; a first
    /// column named `scenario` carries group labels; everything between is an
    /// input. Errors carry 1-based line numbers.
    pub fn from_csv(text: &str) -> Result<Dataset, AnfisError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .find(|(_, l)| !l.trim().is_empty())
            .ok_or(AnfisError::EmptyDataset)?;
        let fields: Vec<&str> = header.trim().split(',').map(str::trim).collect();
        let has_groups = fields.first() == Some(&"scenario");
        let data_start = usize::from(has_groups);
        if fields.len() < data_start + 2 {
            return Err(AnfisError::Parse {
                line: 1,
                message: "header needs at least one input column and a target column".into(),
            });
        }
        let input_names: Vec<String> = fields[data_start..fields.len() - 1]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let target_name = fields[fields.len() - 1].to_string();

        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut groups = Vec::new();
        for (idx, raw) in lines {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                continue;
            }
            let cells: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if cells.len() != fields.len() {
                return Err(AnfisError::Parse {
                    line,
                    message: format!("expected {} columns, got {}", fields.len(), cells.len()),
                });
            }
            if has_groups {
                groups.push(cells[0].to_string());
            }
            let mut row = Vec::with_capacity(input_names.len());
            for cell in &cells[data_start..] {
                let v: f64 = cell.parse().map_err(|_| AnfisError::Parse {
                    line,
                    message: format!("`{cell}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(AnfisError::Parse {
                        line,
                        message: format!("non-finite value `{cell}`"),
                    });
                }
                row.push(v);
            }
            ys.push(row.pop().unwrap());
            xs.push(row);
        }
        let data = Dataset::new(input_names, target_name, xs, ys)?;
        if has_groups {
            data.with_groups(groups)
        } else {
            Ok(data)
        }
    }
}

/// Evaluation summary of a system against a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub rmse: f64,
    pub r2: f64,
    pub n: usize,
}

pub(crate) fn predictions(
    fis: &FuzzyInferenceSystem,
    data: &Dataset,
) -> Result<Vec<f64>, AnfisError> {
    if data.n_inputs() != fis.inputs().len() {
        return Err(AnfisError::DimensionMismatch {
            expected: fis.inputs().len(),
            got: data.n_inputs(),
        });
    }
    data.iter()
        .enumerate()
        .map(|(row, (x, _))| {
            fis.infer(x).map_err(|e| match e {
                FuzzyError::NoRuleFires => AnfisError::NoRuleFires { row },
                other => other.into(),
            })
        })
        .collect()
}

pub(crate) fn rmse_of(preds: &[f64], targets: &[f64]) -> f64 {
    let n = preds.len() as f64;
    let ss: f64 = preds
        .iter()
        .zip(targets)
        .map(|(p, y)| (p - y) * (p - y))
        .sum();
    (ss / n).sqrt()
}

/// Root-mean-square error and coefficient of determination of `fis` on
/// `data`. When the targets are constant, `r2` is 1 for a perfect fit and
/// negative infinity otherwise.
pub fn evaluate(fis: &FuzzyInferenceSystem, data: &Dataset) -> Result<EvalReport, AnfisError> {
    if data.is_empty() {
        return Err(AnfisError::EmptyDataset);
    }
    let preds = predictions(fis, data)?;
    let ys = data.targets();
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_res: f64 = preds.iter().zip(ys).map(|(p, y)| (p - y) * (p - y)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    };
    Ok(EvalReport {
        rmse: rmse_of(&preds, ys),
        r2,
        n: data.len(),
    })
}

fn sanitize_identifier(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit() || c == '-') {
        s.insert(0, 'v');
    }
    s
}

/// Builds a grid-complete system for `data`: every input gets `mfs_per_input`
/// membership functions of the given family spread over the column's range,
/// and the rule base covers every combination with zeroed consequents.
pub fn initial_fis(
    family: MfFamily,
    data: &Dataset,
    mfs_per_input: usize,
) -> Result<FuzzyInferenceSystem, AnfisError> {
    if data.is_empty() {
        return Err(AnfisError::EmptyDataset);
    }
    if mfs_per_input == 0 {
        return Err(AnfisError::BadConfig("mfs_per_input must be at least 1".into()));
    }
    let ranges = data.input_ranges();
    let mut vars = Vec::with_capacity(data.n_inputs());
    for (name, (lo, hi)) in data.input_names().iter().zip(ranges) {
        let mfs = grid_partition(family, lo, hi, mfs_per_input)?;
        vars.push(FuzzyVariable::new(sanitize_identifier(name), lo, hi, mfs)?);
    }
    Ok(FuzzyInferenceSystem::grid(
        vars,
        sanitize_identifier(data.target_name()),
    )?)
}

/// Perturbs every premise parameter in place: position-like parameters by a
/// uniform fraction of the variable's span, slope-like parameters (bell
/// exponents, sigmoid slopes) multiplicatively. Shape constraints are
/// restored afterwards, so the result is always a valid system.
pub fn jitter_premises(
    fis: &mut FuzzyInferenceSystem,
    jitter: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(), AnfisError> {
    if jitter == 0.0 {
        return Ok(());
    }
    if !(jitter > 0.0 && jitter < 1.0) {
        return Err(AnfisError::BadConfig(format!(
            "jitter must be in (0, 1), got {jitter}"
        )));
    }
    for var in fis.inputs_mut() {
        let (lo, hi) = var.universe();
        let span = hi - lo;
        for mf in var.mfs_mut() {
            let family = mf.family();
            let slopes: &[usize] = match family {
                MfFamily::GeneralizedBell => &[1],
                MfFamily::DiffSigmoid | MfFamily::ProdSigmoid => &[0, 2],
                _ => &[],
            };
            let mut params = mf.params().to_vec();
            for (k, p) in params.iter_mut().enumerate() {
                let u: f64 = rng.gen_range(-1.0..1.0);
                if slopes.contains(&k) {
                    *p *= 1.0 + jitter * u;
                } else {
                    *p += jitter * span * u;
                }
            }
            train::project_params(family, &mut params);
            mf.set_params(params)?;
        }
    }
    Ok(())
}
