//! Hybrid parameter estimation: batch least squares for the linear
//! consequents, normalized gradient descent for the premise parameters.

use super::{predictions, rmse_of, AnfisError, Dataset};
use crate::fuzzy::{FuzzyError, FuzzyInferenceSystem, MfFamily};
use nalgebra::{DMatrix, DVector};

/// Lower bound kept on widths, sigmas, and bell exponents after a gradient
/// step or jitter, so membership functions stay well defined.
pub(crate) const MIN_SHAPE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct TrainingConfig {
    pub epochs: usize,
    /// Initial step length; adapted multiplicatively between epochs.
    pub learning_rate: f64,
    /// Tikhonov term added to the normal matrix. Zero selects an exact
    /// minimum-norm least-squares solve.
    pub ridge: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            learning_rate: 0.01,
            ridge: 0.0,
        }
    }
}

/// Error trace of one epoch. `rmse_pre_lse`/`rmse_post_lse` bracket the
/// consequent solve that closes the epoch; `train_rmse` repeats the
/// post-solve value and `val_rmse` is measured on the same solved model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub rmse_pre_lse: f64,
    pub rmse_post_lse: f64,
    pub train_rmse: f64,
    pub val_rmse: f64,
    pub learning_rate: f64,
}

/// Result of [`train`]: the snapshot with the best validation error plus the
/// per-epoch history (one entry per configured epoch).
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub fis: FuzzyInferenceSystem,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_rmse: f64,
}

/// Replaces every rule's consequent with the least-squares optimum for the
/// current premises.
///
/// Each sample contributes one row: for rule `i` with normalized firing
/// strength `w`, the features are `[w*x_1, ..., w*x_n, w]`. With `ridge == 0`
/// the system is solved by SVD, which also handles rank-deficient but
/// consistent data (for example duplicated samples) exactly; rank-deficient
/// *inconsistent* data are rejected. A positive ridge solves the regularized
/// normal equations instead.
pub fn lse_consequents(
    fis: &mut FuzzyInferenceSystem,
    data: &Dataset,
    ridge: f64,
) -> Result<(), AnfisError> {
    if data.is_empty() {
        return Err(AnfisError::EmptyDataset);
    }
    if !ridge.is_finite() || ridge < 0.0 {
        return Err(AnfisError::BadConfig(format!(
            "ridge must be finite and non-negative, got {ridge}"
        )));
    }
    let n = fis.inputs().len();
    if data.n_inputs() != n {
        return Err(AnfisError::DimensionMismatch {
            expected: n,
            got: data.n_inputs(),
        });
    }
    let n_rules = fis.rules().len();
    let cols = n_rules * (n + 1);
    let rows = data.len();
    let mut phi = DMatrix::<f64>::zeros(rows, cols);
    let mut y = DVector::<f64>::zeros(rows);
    for (k, (x, t)) in data.iter().enumerate() {
        let cx = fis.clamp_input(x);
        let detail = fis.infer_detail(&cx).map_err(|e| match e {
            FuzzyError::NoRuleFires => AnfisError::NoRuleFires { row: k },
            other => other.into(),
        })?;
        for i in 0..n_rules {
            let w = detail.strengths[i] / detail.strength_sum;
            if w == 0.0 {
                continue;
            }
            let base = i * (n + 1);
            for v in 0..n {
                phi[(k, base + v)] = w * cx[v];
            }
            phi[(k, base + n)] = w;
        }
        y[k] = t;
    }

    let theta = if ridge > 0.0 {
        let gram = phi.transpose() * &phi + DMatrix::identity(cols, cols) * ridge;
        let rhs = phi.transpose() * &y;
        gram.cholesky()
            .ok_or(AnfisError::SingularNormalMatrix)?
            .solve(&rhs)
    } else {
        let svd = phi.clone().svd(true, true);
        let max_sv = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
        if max_sv == 0.0 {
            return Err(AnfisError::SingularNormalMatrix);
        }
        let eps = max_sv * 1e-12;
        let rank = svd.rank(eps);
        let theta = svd
            .solve(&y, eps)
            .map_err(|_| AnfisError::SingularNormalMatrix)?;
        if rank < cols.min(rows) {
            let residual = (&phi * &theta - &y).norm();
            if residual > 1e-8 * y.norm().max(1.0) {
                return Err(AnfisError::SingularNormalMatrix);
            }
        }
        theta
    };
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(AnfisError::SingularNormalMatrix);
    }

    for i in 0..n_rules {
        let base = i * (n + 1);
        fis.set_consequent(i, theta.as_slice()[base..base + n + 1].to_vec())?;
    }
    Ok(())
}

/// Gradient of the mean squared error with respect to every premise
/// parameter, shaped `[input][mf][param]`. Exposed for gradient checking.
///
/// Gaussian parameters are differentiated analytically through the weighted
/// average; every other family uses central finite differences of the
/// predictions, which keeps the gradient exactly zero on a zero-error batch.
pub fn premise_gradients(
    fis: &FuzzyInferenceSystem,
    data: &Dataset,
) -> Result<Vec<Vec<Vec<f64>>>, AnfisError> {
    if data.is_empty() {
        return Err(AnfisError::EmptyDataset);
    }
    let n = fis.inputs().len();
    if data.n_inputs() != n {
        return Err(AnfisError::DimensionMismatch {
            expected: n,
            got: data.n_inputs(),
        });
    }
    let scale = 2.0 / data.len() as f64;
    let mut grads: Vec<Vec<Vec<f64>>> = fis
        .inputs()
        .iter()
        .map(|v| v.mfs().iter().map(|m| vec![0.0; m.params().len()]).collect())
        .collect();

    let rules = fis.rules();
    let mut residuals = Vec::with_capacity(data.len());
    for (row, (x, t)) in data.iter().enumerate() {
        let cx = fis.clamp_input(x);
        let table: Vec<Vec<f64>> = fis
            .inputs()
            .iter()
            .zip(&cx)
            .map(|(v, &xi)| v.mfs().iter().map(|mf| mf.eval(xi)).collect())
            .collect();
        let strengths: Vec<f64> = rules
            .iter()
            .map(|r| {
                r.antecedent
                    .iter()
                    .enumerate()
                    .map(|(v, &mi)| table[v][mi])
                    .product()
            })
            .collect();
        let sum: f64 = strengths.iter().sum();
        if sum <= 0.0 {
            return Err(AnfisError::NoRuleFires { row });
        }
        let outputs: Vec<f64> = rules.iter().map(|r| r.output(&cx)).collect();
        let yhat = strengths
            .iter()
            .zip(&outputs)
            .map(|(w, f)| (w / sum) * f)
            .sum::<f64>();
        let resid = yhat - t;
        residuals.push(resid);

        for (v, var) in fis.inputs().iter().enumerate() {
            for (m, mf) in var.mfs().iter().enumerate() {
                if mf.family() != MfFamily::Gaussian {
                    continue;
                }
                // d(yhat)/d(mu): rules that reference this MF, each through
                // the partial product of the other inputs' memberships.
                let mut dy_dmu = 0.0;
                for (i, rule) in rules.iter().enumerate() {
                    if rule.antecedent[v] != m {
                        continue;
                    }
                    let mut partial = 1.0;
                    for (u, &mi) in rule.antecedent.iter().enumerate() {
                        if u != v {
                            partial *= table[u][mi];
                        }
                    }
                    dy_dmu += (outputs[i] - yhat) * partial;
                }
                dy_dmu /= sum;
                let p = mf.params();
                let (sigma, center) = (p[0], p[1]);
                let mu = table[v][m];
                let dx = cx[v] - center;
                let common = scale * resid * dy_dmu * mu;
                grads[v][m][0] += common * dx * dx / (sigma * sigma * sigma);
                grads[v][m][1] += common * dx / (sigma * sigma);
            }
        }
    }

    let needs_fd = fis
        .inputs()
        .iter()
        .any(|v| v.mfs().iter().any(|m| m.family() != MfFamily::Gaussian));
    if needs_fd {
        let mut work = fis.clone();
        for v in 0..n {
            for m in 0..fis.inputs()[v].mfs().len() {
                if fis.inputs()[v].mfs()[m].family() == MfFamily::Gaussian {
                    continue;
                }
                let base = fis.inputs()[v].mfs()[m].params().to_vec();
                for k in 0..base.len() {
                    let h = 1e-6 * base[k].abs().max(1.0);
                    let mut shifted = base.clone();
                    shifted[k] = base[k] + h;
                    work.inputs_mut()[v].mfs_mut()[m].set_params_raw(shifted.clone());
                    let up = predictions(&work, data)?;
                    shifted[k] = base[k] - h;
                    work.inputs_mut()[v].mfs_mut()[m].set_params_raw(shifted);
                    let down = predictions(&work, data)?;
                    work.inputs_mut()[v].mfs_mut()[m].set_params_raw(base.clone());
                    let mut g = 0.0;
                    for ((u, d), r) in up.iter().zip(&down).zip(&residuals) {
                        g += r * (u - d) / (2.0 * h);
                    }
                    grads[v][m][k] = scale * g;
                }
            }
        }
    }
    Ok(grads)
}

/// Restores family shape constraints after an unconstrained parameter move.
pub(crate) fn project_params(family: MfFamily, p: &mut [f64]) {
    match family {
        MfFamily::Triangular | MfFamily::Trapezoidal | MfFamily::PiShaped => {
            p.sort_by(|a, b| a.total_cmp(b));
        }
        MfFamily::Gaussian => p[0] = p[0].max(MIN_SHAPE),
        MfFamily::GaussianCombination => {
            p[0] = p[0].max(MIN_SHAPE);
            p[2] = p[2].max(MIN_SHAPE);
        }
        MfFamily::GeneralizedBell => {
            p[0] = p[0].max(MIN_SHAPE);
            p[1] = p[1].max(MIN_SHAPE);
        }
        MfFamily::DiffSigmoid | MfFamily::ProdSigmoid => {}
    }
}

/// One descent step along the normalized gradient direction, followed by
/// projection back onto valid parameter shapes.
pub(crate) fn premise_step(
    fis: &mut FuzzyInferenceSystem,
    grads: &[Vec<Vec<f64>>],
    lr: f64,
) -> Result<(), AnfisError> {
    let norm: f64 = grads
        .iter()
        .flat_map(|v| v.iter().flat_map(|m| m.iter()))
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm == 0.0 {
        return Ok(());
    }
    if !norm.is_finite() {
        return Err(AnfisError::NonFinite {
            context: "premise gradient norm".into(),
        });
    }
    for (v, var) in fis.inputs_mut().iter_mut().enumerate() {
        for (m, mf) in var.mfs_mut().iter_mut().enumerate() {
            let family = mf.family();
            let mut params = mf.params().to_vec();
            for (k, p) in params.iter_mut().enumerate() {
                *p -= lr * grads[v][m][k] / norm;
            }
            project_params(family, &mut params);
            mf.set_params(params)?;
        }
    }
    Ok(())
}

fn dataset_rmse(fis: &FuzzyInferenceSystem, data: &Dataset) -> Result<f64, AnfisError> {
    let preds = predictions(fis, data)?;
    Ok(rmse_of(&preds, data.targets()))
}

/// Runs the hybrid loop for `cfg.epochs` epochs and returns the snapshot
/// with the lowest validation RMSE.
///
/// Each epoch takes one normalized gradient step on the premises (a no-op
/// on the zero gradient of a freshly initialized grid), then solves the
/// consequents by least squares, so every recorded error and the returned
/// snapshot describe a model whose consequents are optimal for its
/// premises. The learning rate grows by 10% after an epoch that improved
/// the training error and shrinks by 10% otherwise. Any non-finite
/// intermediate aborts with the offending epoch.
pub fn train(
    initial: &FuzzyInferenceSystem,
    train_data: &Dataset,
    val_data: &Dataset,
    cfg: &TrainingConfig,
) -> Result<TrainReport, AnfisError> {
    if !cfg.learning_rate.is_finite() || cfg.learning_rate <= 0.0 {
        return Err(AnfisError::BadConfig(format!(
            "learning rate must be finite and positive, got {}",
            cfg.learning_rate
        )));
    }
    if train_data.is_empty() || val_data.is_empty() {
        return Err(AnfisError::EmptyDataset);
    }

    let mut fis = initial.clone();
    let mut lr = cfg.learning_rate;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, FuzzyInferenceSystem)> = None;
    let mut prev_train = f64::INFINITY;

    for epoch in 0..cfg.epochs {
        let wrap = |e: AnfisError| AnfisError::Epoch {
            epoch,
            source: Box::new(e),
        };
        let grads = premise_gradients(&fis, train_data).map_err(wrap)?;
        premise_step(&mut fis, &grads, lr).map_err(wrap)?;
        let rmse_pre_lse = dataset_rmse(&fis, train_data).map_err(wrap)?;
        lse_consequents(&mut fis, train_data, cfg.ridge).map_err(wrap)?;
        let rmse_post_lse = dataset_rmse(&fis, train_data).map_err(wrap)?;
        let train_rmse = rmse_post_lse;
        let val_rmse = dataset_rmse(&fis, val_data).map_err(wrap)?;
        for (name, value) in [
            ("pre-LSE RMSE", rmse_pre_lse),
            ("post-LSE RMSE", rmse_post_lse),
            ("train RMSE", train_rmse),
            ("validation RMSE", val_rmse),
        ] {
            if !value.is_finite() {
                return Err(wrap(AnfisError::NonFinite {
                    context: name.into(),
                }));
            }
        }
        history.push(EpochStats {
            epoch,
            rmse_pre_lse,
            rmse_post_lse,
            train_rmse,
            val_rmse,
            learning_rate: lr,
        });
        if best.as_ref().map_or(true, |(_, b, _)| val_rmse < *b) {
            best = Some((epoch, val_rmse, fis.clone()));
        }
        lr *= if train_rmse < prev_train { 1.1 } else { 0.9 };
        prev_train = train_rmse;
    }

    let (best_epoch, best_val_rmse, best_fis) = match best {
        Some(b) => b,
        None => {
            let val = dataset_rmse(&fis, val_data)?;
            (0, val, fis)
        }
    };
    Ok(TrainReport {
        fis: best_fis,
        history,
        best_epoch,
        best_val_rmse,
    })
}
