//! Takagi–Sugeno fuzzy inference: membership function families, rule
//! evaluation, and crisp inference by weighted average of linear consequents.
//!
//! A [`FuzzyInferenceSystem`] is immutable once constructed (training code in
//! this crate rebuilds parameters through checked setters); inference is a
//! pure function and safe to call concurrently.

pub mod format;

use thiserror::Error;

/// Errors from constructing or evaluating fuzzy systems.
#[derive(Debug, Error)]
pub enum FuzzyError {
    #[error("{family}: expected {expected} parameters, got {got}")]
    ArityMismatch {
        family: MfFamily,
        expected: usize,
        got: usize,
    },
    #[error("{family}: invalid parameters: {reason}")]
    InvalidParams { family: MfFamily, reason: String },
    #[error("variable `{name}`: universe [{lo}, {hi}] is not a proper interval")]
    BadUniverse { name: String, lo: f64, hi: f64 },
    #[error("variable `{0}` has no membership functions")]
    NoMembershipFunctions(String),
    #[error("invalid identifier `{0}`")]
    BadIdentifier(String),
    #[error("expected {expected} input values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("input vector contains a non-finite value")]
    NonFiniteInput,
    #[error("rule {rule}: antecedent length {got} does not match input count {expected}")]
    AntecedentLength {
        rule: usize,
        expected: usize,
        got: usize,
    },
    #[error("rule {rule}: membership index {index} out of range for input {input} ({count} MFs)")]
    MfIndexOutOfRange {
        rule: usize,
        input: usize,
        index: usize,
        count: usize,
    },
    #[error("rule {rule}: consequent length {got}, expected {expected} (one per input plus offset)")]
    ConsequentLength {
        rule: usize,
        expected: usize,
        got: usize,
    },
    #[error("rule {0}: non-finite consequent coefficient")]
    NonFiniteConsequent(usize),
    #[error("rules {first} and {second} share the same antecedent")]
    DuplicateAntecedent { first: usize, second: usize },
    #[error("system has no rules")]
    EmptyRules,
    #[error("system has no input variables")]
    NoInputs,
    #[error("no rule fires at the given input")]
    NoRuleFires,
}

/// The eight supported membership function families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MfFamily {
    Triangular,
    Trapezoidal,
    GeneralizedBell,
    Gaussian,
    GaussianCombination,
    PiShaped,
    DiffSigmoid,
    ProdSigmoid,
}

/// All families, in the order used by reports and iteration.
pub const ALL_FAMILIES: [MfFamily; 8] = [
    MfFamily::Triangular,
    MfFamily::Trapezoidal,
    MfFamily::GeneralizedBell,
    MfFamily::Gaussian,
    MfFamily::GaussianCombination,
    MfFamily::PiShaped,
    MfFamily::DiffSigmoid,
    MfFamily::ProdSigmoid,
];

impl MfFamily {
    /// Number of parameters the family takes.
    pub fn arity(self) -> usize {
        match self {
            MfFamily::Triangular | MfFamily::GeneralizedBell => 3,
            MfFamily::Gaussian => 2,
            _ => 4,
        }
    }

    /// Canonical name used in FIS documents.
    pub fn canonical_name(self) -> &'static str {
        match self {
            MfFamily::Triangular => "triangular",
            MfFamily::Trapezoidal => "trapezoidal",
            MfFamily::GeneralizedBell => "generalized-bell",
            MfFamily::Gaussian => "gaussian",
            MfFamily::GaussianCombination => "gaussian-combination",
            MfFamily::PiShaped => "pi-shaped",
            MfFamily::DiffSigmoid => "diff-sigmoid",
            MfFamily::ProdSigmoid => "prod-sigmoid",
        }
    }

    /// Compact alias, used as row labels in the MF comparison table.
    pub fn short_name(self) -> &'static str {
        match self {
            MfFamily::Triangular => "trimf",
            MfFamily::Trapezoidal => "trapmf",
            MfFamily::GeneralizedBell => "gbellmf",
            MfFamily::Gaussian => "gaussmf",
            MfFamily::GaussianCombination => "gauss2mf",
            MfFamily::PiShaped => "pimf",
            MfFamily::DiffSigmoid => "dsigmf",
            MfFamily::ProdSigmoid => "psigmf",
        }
    }

    /// Accepts either the canonical or the compact name.
    pub fn parse(name: &str) -> Option<MfFamily> {
        ALL_FAMILIES
            .into_iter()
            .find(|f| f.canonical_name() == name || f.short_name() == name)
    }
}

impl std::fmt::Display for MfFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.canonical_name())
    }
}

/// A parameterized membership function. Evaluation maps any real input
/// into [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipFunction {
    family: MfFamily,
    params: Vec<f64>,
}

impl MembershipFunction {
    pub fn new(family: MfFamily, params: Vec<f64>) -> Result<Self, FuzzyError> {
        validate_params(family, &params)?;
        Ok(Self { family, params })
    }

    pub fn family(&self) -> MfFamily {
        self.family
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Replaces the parameter vector, re-validating family constraints.
    pub fn set_params(&mut self, params: Vec<f64>) -> Result<(), FuzzyError> {
        validate_params(self.family, &params)?;
        self.params = params;
        Ok(())
    }

    /// Unvalidated replacement, for transient perturbations during finite
    /// differencing. Evaluation stays total even for out-of-order shapes.
    pub(crate) fn set_params_raw(&mut self, params: Vec<f64>) {
        debug_assert_eq!(params.len(), self.family.arity());
        self.params = params;
    }

    /// Membership degree of `x`, in [0, 1].
    pub fn eval(&self, x: f64) -> f64 {
        eval_family(self.family, &self.params, x)
    }
}

/// Linear ramp from 0 at `a` to 1 at `b`; degenerate `a == b` is a step.
fn ramp_up(x: f64, a: f64, b: f64) -> f64 {
    if x >= b {
        1.0
    } else if x <= a {
        0.0
    } else {
        (x - a) / (b - a)
    }
}

fn ramp_down(x: f64, a: f64, b: f64) -> f64 {
    if x <= a {
        1.0
    } else if x >= b {
        0.0
    } else {
        (b - x) / (b - a)
    }
}

/// S-shaped spline from 0 at `a` to 1 at `b`.
fn s_curve(x: f64, a: f64, b: f64) -> f64 {
    if x <= a {
        0.0
    } else if x >= b {
        1.0
    } else {
        let mid = 0.5 * (a + b);
        if x <= mid {
            2.0 * ((x - a) / (b - a)).powi(2)
        } else {
            1.0 - 2.0 * ((x - b) / (b - a)).powi(2)
        }
    }
}

/// Z-shaped spline from 1 at `a` to 0 at `b`.
fn z_curve(x: f64, a: f64, b: f64) -> f64 {
    if x <= a {
        1.0
    } else if x >= b {
        0.0
    } else {
        let mid = 0.5 * (a + b);
        if x <= mid {
            1.0 - 2.0 * ((x - a) / (b - a)).powi(2)
        } else {
            2.0 * ((x - b) / (b - a)).powi(2)
        }
    }
}

fn sigmoid(x: f64, slope: f64, center: f64) -> f64 {
    1.0 / (1.0 + (-slope * (x - center)).exp())
}

fn gauss(x: f64, sigma: f64, center: f64) -> f64 {
    (-(x - center).powi(2) / (2.0 * sigma * sigma)).exp()
}

/// Closed-form evaluation. Assumes `params` passed family validation; still
/// total (no panics) for parameter vectors of the right arity.
pub(crate) fn eval_family(family: MfFamily, p: &[f64], x: f64) -> f64 {
    let y = match family {
        MfFamily::Triangular => ramp_up(x, p[0], p[1]).min(ramp_down(x, p[1], p[2])),
        MfFamily::Trapezoidal => ramp_up(x, p[0], p[1]).min(ramp_down(x, p[2], p[3])),
        MfFamily::GeneralizedBell => {
            let t = ((x - p[2]) / p[0]).abs();
            1.0 / (1.0 + t.powf(2.0 * p[1]))
        }
        MfFamily::Gaussian => gauss(x, p[0], p[1]),
        MfFamily::GaussianCombination => {
            let left = if x < p[1] { gauss(x, p[0], p[1]) } else { 1.0 };
            let right = if x > p[3] { gauss(x, p[2], p[3]) } else { 1.0 };
            left * right
        }
        MfFamily::PiShaped => s_curve(x, p[0], p[1]) * z_curve(x, p[2], p[3]),
        MfFamily::DiffSigmoid => (sigmoid(x, p[0], p[1]) - sigmoid(x, p[2], p[3])).abs(),
        MfFamily::ProdSigmoid => sigmoid(x, p[0], p[1]) * sigmoid(x, p[2], p[3]),
    };
    y.clamp(0.0, 1.0)
}

fn validate_params(family: MfFamily, params: &[f64]) -> Result<(), FuzzyError> {
    let expected = family.arity();
    if params.len() != expected {
        return Err(FuzzyError::ArityMismatch {
            family,
            expected,
            got: params.len(),
        });
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(FuzzyError::InvalidParams {
            family,
            reason: "non-finite parameter".into(),
        });
    }
    let non_decreasing = |p: &[f64]| p.windows(2).all(|w| w[0] <= w[1]);
    match family {
        MfFamily::Triangular | MfFamily::Trapezoidal | MfFamily::PiShaped => {
            if !non_decreasing(params) {
                return Err(FuzzyError::InvalidParams {
                    family,
                    reason: "breakpoints must be non-decreasing".into(),
                });
            }
        }
        MfFamily::Gaussian => {
            if params[0] <= 0.0 {
                return Err(FuzzyError::InvalidParams {
                    family,
                    reason: format!("sigma must be positive, got {}", params[0]),
                });
            }
        }
        MfFamily::GaussianCombination => {
            if params[0] <= 0.0 || params[2] <= 0.0 {
                return Err(FuzzyError::InvalidParams {
                    family,
                    reason: "both sigmas must be positive".into(),
                });
            }
        }
        MfFamily::GeneralizedBell => {
            if params[0] <= 0.0 || params[1] <= 0.0 {
                return Err(FuzzyError::InvalidParams {
                    family,
                    reason: "width a and exponent b must be positive".into(),
                });
            }
        }
        MfFamily::DiffSigmoid | MfFamily::ProdSigmoid => {}
    }
    Ok(())
}

/// An input variable: a universe of discourse and its ordered MF partition.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyVariable {
    name: String,
    universe: (f64, f64),
    mfs: Vec<MembershipFunction>,
}

fn valid_identifier(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        && !name.starts_with(|c: char| c.is_ascii_digit() || c == '-')
}

impl FuzzyVariable {
    pub fn new(
        name: impl Into<String>,
        lo: f64,
        hi: f64,
        mfs: Vec<MembershipFunction>,
    ) -> Result<Self, FuzzyError> {
        let name = name.into();
        if !valid_identifier(&name) {
            return Err(FuzzyError::BadIdentifier(name));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(FuzzyError::BadUniverse { name, lo, hi });
        }
        if mfs.is_empty() {
            return Err(FuzzyError::NoMembershipFunctions(name));
        }
        Ok(Self {
            name,
            universe: (lo, hi),
            mfs,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn universe(&self) -> (f64, f64) {
        self.universe
    }

    pub fn mfs(&self) -> &[MembershipFunction] {
        &self.mfs
    }

    pub(crate) fn mfs_mut(&mut self) -> &mut [MembershipFunction] {
        &mut self.mfs
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.universe.0, self.universe.1)
    }
}

/// One Takagi–Sugeno rule: an MF index per input and a first-order linear
/// consequent `p·x + r` stored as `[p_1, ..., p_n, r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub antecedent: Vec<usize>,
    pub consequent: Vec<f64>,
}

impl Rule {
    pub fn new(antecedent: Vec<usize>, consequent: Vec<f64>) -> Self {
        Self {
            antecedent,
            consequent,
        }
    }

    /// Consequent value at crisp input `x`.
    pub fn output(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let mut y = self.consequent[n];
        for i in 0..n {
            y += self.consequent[i] * x[i];
        }
        y
    }
}

/// Detailed result of one inference: firing strengths, per-rule consequent
/// values, and the crisp output.
#[derive(Debug, Clone)]
pub struct InferenceDetail {
    pub strengths: Vec<f64>,
    pub rule_outputs: Vec<f64>,
    pub strength_sum: f64,
    pub output: f64,
}

/// A complete first-order Takagi–Sugeno system.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyInferenceSystem {
    inputs: Vec<FuzzyVariable>,
    output_name: String,
    rules: Vec<Rule>,
}

impl FuzzyInferenceSystem {
    pub fn new(
        inputs: Vec<FuzzyVariable>,
        output_name: impl Into<String>,
        rules: Vec<Rule>,
    ) -> Result<Self, FuzzyError> {
        let output_name = output_name.into();
        if !valid_identifier(&output_name) {
            return Err(FuzzyError::BadIdentifier(output_name));
        }
        if inputs.is_empty() {
            return Err(FuzzyError::NoInputs);
        }
        if rules.is_empty() {
            return Err(FuzzyError::EmptyRules);
        }
        let n = inputs.len();
        for (ri, rule) in rules.iter().enumerate() {
            if rule.antecedent.len() != n {
                return Err(FuzzyError::AntecedentLength {
                    rule: ri,
                    expected: n,
                    got: rule.antecedent.len(),
                });
            }
            for (vi, &mi) in rule.antecedent.iter().enumerate() {
                if mi >= inputs[vi].mfs().len() {
                    return Err(FuzzyError::MfIndexOutOfRange {
                        rule: ri,
                        input: vi,
                        index: mi,
                        count: inputs[vi].mfs().len(),
                    });
                }
            }
            if rule.consequent.len() != n + 1 {
                return Err(FuzzyError::ConsequentLength {
                    rule: ri,
                    expected: n + 1,
                    got: rule.consequent.len(),
                });
            }
            if rule.consequent.iter().any(|c| !c.is_finite()) {
                return Err(FuzzyError::NonFiniteConsequent(ri));
            }
        }
        for i in 0..rules.len() {
            for j in (i + 1)..rules.len() {
                if rules[i].antecedent == rules[j].antecedent {
                    return Err(FuzzyError::DuplicateAntecedent { first: i, second: j });
                }
            }
        }
        Ok(Self {
            inputs,
            output_name,
            rules,
        })
    }

    /// Builds the complete rule grid over the inputs' MF partitions, with all
    /// consequent coefficients zero. Rules are ordered with the last input's
    /// index varying fastest.
    pub fn grid(
        inputs: Vec<FuzzyVariable>,
        output_name: impl Into<String>,
    ) -> Result<Self, FuzzyError> {
        if inputs.is_empty() {
            return Err(FuzzyError::NoInputs);
        }
        let n = inputs.len();
        let counts: Vec<usize> = inputs.iter().map(|v| v.mfs().len()).collect();
        let total: usize = counts.iter().product();
        let mut rules = Vec::with_capacity(total);
        let mut index = vec![0usize; n];
        for _ in 0..total {
            rules.push(Rule::new(index.clone(), vec![0.0; n + 1]));
            for v in (0..n).rev() {
                index[v] += 1;
                if index[v] < counts[v] {
                    break;
                }
                index[v] = 0;
            }
        }
        Self::new(inputs, output_name, rules)
    }

    pub fn inputs(&self) -> &[FuzzyVariable] {
        &self.inputs
    }

    pub(crate) fn inputs_mut(&mut self) -> &mut [FuzzyVariable] {
        &mut self.inputs
    }

    pub fn output_name(&self) -> &str {
        &self.output_name
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Overwrites one rule's consequent coefficients.
    pub fn set_consequent(&mut self, rule: usize, coeffs: Vec<f64>) -> Result<(), FuzzyError> {
        if coeffs.len() != self.inputs.len() + 1 {
            return Err(FuzzyError::ConsequentLength {
                rule,
                expected: self.inputs.len() + 1,
                got: coeffs.len(),
            });
        }
        self.rules[rule].consequent = coeffs;
        Ok(())
    }

    /// True when the rule count equals the product of per-input MF counts.
    pub fn is_grid_complete(&self) -> bool {
        let total: usize = self.inputs.iter().map(|v| v.mfs().len()).product();
        self.rules.len() == total
    }

    fn check_input(&self, x: &[f64]) -> Result<(), FuzzyError> {
        if x.len() != self.inputs.len() {
            return Err(FuzzyError::DimensionMismatch {
                expected: self.inputs.len(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(FuzzyError::NonFiniteInput);
        }
        Ok(())
    }

    /// Clamps each component to its variable's universe.
    pub fn clamp_input(&self, x: &[f64]) -> Vec<f64> {
        self.inputs
            .iter()
            .zip(x)
            .map(|(v, &xi)| v.clamp(xi))
            .collect()
    }

    /// Per-input membership degrees: `table[v][m]` is MF `m` of input `v`
    /// evaluated at `x[v]`. Input is used as given (no clamping).
    pub(crate) fn membership_table(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.inputs
            .iter()
            .zip(x)
            .map(|(v, &xi)| v.mfs().iter().map(|mf| mf.eval(xi)).collect())
            .collect()
    }

    /// Product t-norm firing strength of one rule at `x` (no clamping).
    pub fn firing_strength(&self, rule: &Rule, x: &[f64]) -> Result<f64, FuzzyError> {
        self.check_input(x)?;
        if rule.antecedent.len() != self.inputs.len() {
            return Err(FuzzyError::DimensionMismatch {
                expected: self.inputs.len(),
                got: rule.antecedent.len(),
            });
        }
        let mut w = 1.0;
        for (v, &mi) in rule.antecedent.iter().enumerate() {
            w *= self.inputs[v].mfs()[mi].eval(x[v]);
        }
        Ok(w)
    }

    /// Firing strengths of every rule at `x` (no clamping).
    pub fn firing_strengths(&self, x: &[f64]) -> Result<Vec<f64>, FuzzyError> {
        self.check_input(x)?;
        let table = self.membership_table(x);
        Ok(self
            .rules
            .iter()
            .map(|r| {
                r.antecedent
                    .iter()
                    .enumerate()
                    .map(|(v, &mi)| table[v][mi])
                    .product()
            })
            .collect())
    }

    /// Firing strengths normalized to sum to one. Errors when no rule fires.
    pub fn normalized_strengths(&self, x: &[f64]) -> Result<Vec<f64>, FuzzyError> {
        let w = self.firing_strengths(x)?;
        let sum: f64 = w.iter().sum();
        if sum <= 0.0 {
            return Err(FuzzyError::NoRuleFires);
        }
        Ok(w.into_iter().map(|wi| wi / sum).collect())
    }

    /// Full inference at `x`: clamps to the universes, evaluates every rule,
    /// and returns strengths, per-rule outputs, and the weighted average.
    pub fn infer_detail(&self, x: &[f64]) -> Result<InferenceDetail, FuzzyError> {
        self.check_input(x)?;
        let clamped = self.clamp_input(x);
        let strengths = self.firing_strengths(&clamped)?;
        let sum: f64 = strengths.iter().sum();
        if sum <= 0.0 {
            return Err(FuzzyError::NoRuleFires);
        }
        let rule_outputs: Vec<f64> = self.rules.iter().map(|r| r.output(&clamped)).collect();
        // Normalize before weighting: a lone firing rule then reproduces its
        // consequent exactly (w / w == 1).
        let mut acc = 0.0;
        for (w, f) in strengths.iter().zip(&rule_outputs) {
            acc += (w / sum) * f;
        }
        Ok(InferenceDetail {
            output: acc,
            strengths,
            rule_outputs,
            strength_sum: sum,
        })
    }

    /// Crisp output at `x`. Out-of-universe components are clamped first.
    pub fn infer(&self, x: &[f64]) -> Result<f64, FuzzyError> {
        Ok(self.infer_detail(x)?.output)
    }
}

/// Builds a partition of `count` overlapping MFs of the given family spanning
/// `[lo, hi]`, with centers evenly spaced and every point of the universe
/// reached by at least one MF with positive membership.
pub fn grid_partition(
    family: MfFamily,
    lo: f64,
    hi: f64,
    count: usize,
) -> Result<Vec<MembershipFunction>, FuzzyError> {
    assert!(count >= 1, "partition needs at least one MF");
    assert!(lo < hi, "universe must be a proper interval");
    let span = hi - lo;
    let step = if count > 1 {
        span / (count - 1) as f64
    } else {
        span
    };
    let mut mfs = Vec::with_capacity(count);
    for i in 0..count {
        let c = if count > 1 {
            lo + step * i as f64
        } else {
            0.5 * (lo + hi)
        };
        let params = match family {
            MfFamily::Triangular => vec![c - step, c, c + step],
            MfFamily::Trapezoidal => vec![c - step, c - 0.25 * step, c + 0.25 * step, c + step],
            MfFamily::GeneralizedBell => vec![0.5 * step, 2.0, c],
            // Sigma chosen so neighboring MFs cross at 0.5.
            MfFamily::Gaussian => vec![step / (2.0 * (2.0 * 2.0f64.ln()).sqrt()), c],
            MfFamily::GaussianCombination => {
                vec![0.25 * step, c - 0.125 * step, 0.25 * step, c + 0.125 * step]
            }
            MfFamily::PiShaped => vec![c - step, c - 0.25 * step, c + 0.25 * step, c + step],
            MfFamily::DiffSigmoid => vec![10.0 / step, c - 0.5 * step, 10.0 / step, c + 0.5 * step],
            MfFamily::ProdSigmoid => {
                vec![10.0 / step, c - 0.5 * step, -10.0 / step, c + 0.5 * step]
            }
        };
        mfs.push(MembershipFunction::new(family, params)?);
    }
    Ok(mfs)
}

#[cfg(test)]
mod tests;
