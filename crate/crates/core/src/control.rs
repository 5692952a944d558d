//! Longitudinal controllers for the follower. The fuzzy controller maps the
//! four perception inputs to a commanded acceleration; a constant controller
//! is available as a trivial baseline.

use crate::fuzzy::{FuzzyError, FuzzyInferenceSystem};

/// What the follower can observe at one control step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerInputs {
    /// Follower's lateral speed (m/s), signed.
    pub vlat: f64,
    /// Magnitude of the follower's own jerk (m/s^3).
    pub jerk_abs: f64,
    /// Longitudinal gap to the lane changer (m).
    pub rel_long: f64,
    /// Magnitude of the lateral offset to the lane changer (m).
    pub rel_lat: f64,
}

pub trait LongitudinalController {
    /// Commanded longitudinal acceleration (m/s^2), before actuator limits.
    fn command(&self, inputs: &ControllerInputs) -> Result<f64, FuzzyError>;

    fn name(&self) -> &str;
}

/// Fuzzy controller: wraps a four-input inference system. Inputs feed the
/// system in the order lateral speed, |jerk|, longitudinal gap, lateral gap.
pub struct FisController {
    fis: FuzzyInferenceSystem,
    name: String,
}

impl FisController {
    pub fn new(fis: FuzzyInferenceSystem, name: impl Into<String>) -> Result<Self, FuzzyError> {
        if fis.inputs().len() != 4 {
            return Err(FuzzyError::DimensionMismatch {
                expected: 4,
                got: fis.inputs().len(),
            });
        }
        Ok(FisController {
            fis,
            name: name.into(),
        })
    }

    pub fn fis(&self) -> &FuzzyInferenceSystem {
        &self.fis
    }
}

impl LongitudinalController for FisController {
    fn command(&self, inputs: &ControllerInputs) -> Result<f64, FuzzyError> {
        self.fis.infer(&[
            inputs.vlat,
            inputs.jerk_abs,
            inputs.rel_long,
            inputs.rel_lat,
        ])
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// Fixed-command baseline, useful for tests and as a stand-in comparison.
pub struct ConstantController {
    pub u: f64,
    pub label: String,
}

impl ConstantController {
    pub fn new(u: f64, label: impl Into<String>) -> Self {
        ConstantController {
            u,
            label: label.into(),
        }
    }
}

impl LongitudinalController for ConstantController {
    fn command(&self, _inputs: &ControllerInputs) -> Result<f64, FuzzyError> {
        Ok(self.u)
    }

    fn name(&self) -> &str {
        &self.label
    }
}
