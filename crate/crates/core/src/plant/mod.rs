//! Longitudinal plant of the follower and the closed-loop simulation over a
//! recorded cut-in. The actuator is a first-order lag `tau * da/dt = u - a`;
//! velocity and spacing integrate it exactly over each sample-and-hold step,
//! so the discrete states match the continuous solution at the grid times to
//! rounding error.

use crate::control::{ControllerInputs, LongitudinalController};
use crate::ingest::MergeScenario;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("config: {0}")]
    BadConfig(String),
    #[error("controller `{name}` failed at t = {t}: {source}")]
    Controller {
        name: String,
        t: f64,
        #[source]
        source: crate::fuzzy::FuzzyError,
    },
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
    #[error("{0}")]
    BadScenario(String),
    #[error("trace: {0}")]
    BadTrace(String),
}

/// Follower state: spacing `d` to the leader, own speed `v`, realized
/// acceleration `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub d: f64,
    pub v: f64,
    pub a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Step length (s); also the hold interval of the command.
    pub ts: f64,
    /// Actuator lag time constant (s).
    pub tau: f64,
    /// Simulated horizon (s).
    pub horizon: f64,
    /// Actuator limits on the commanded acceleration (m/s^2).
    pub u_min: f64,
    pub u_max: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            ts: 0.1,
            tau: 0.1,
            horizon: 10.0,
            u_min: -4.0,
            u_max: 4.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), PlantError> {
        if !(self.ts > 0.0) || !self.ts.is_finite() {
            return Err(PlantError::BadConfig(format!("ts must be positive, got {}", self.ts)));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(PlantError::BadConfig(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(PlantError::BadConfig(format!(
                "horizon must be non-negative, got {}",
                self.horizon
            )));
        }
        if !(self.u_min < self.u_max) {
            return Err(PlantError::BadConfig(format!(
                "u_min {} must be below u_max {}",
                self.u_min, self.u_max
            )));
        }
        Ok(())
    }
}

/// One exact sample-and-hold step. The command `u` and the leader speed `v0`
/// are held constant over `[0, ts]`; the lag, the speed and the spacing are
/// advanced by the closed-form solution:
///
/// a(ts) = u + (a - u) e^(-ts/tau)
/// v(ts) = v + u ts + (a - u) tau (1 - e^(-ts/tau))
/// d(ts) = d + v0 ts - [v ts + u ts^2/2 + (a - u) tau (ts - tau (1 - e^(-ts/tau)))]
pub fn plant_step(state: PlantState, u: f64, v0: f64, ts: f64, tau: f64) -> PlantState {
    let decay = (-ts / tau).exp();
    let lag = tau * (1.0 - decay);
    let excess = state.a - u;
    let follower_advance = state.v * ts + 0.5 * u * ts * ts + excess * tau * (ts - lag);
    PlantState {
        d: state.d + v0 * ts - follower_advance,
        v: state.v + u * ts + excess * lag,
        a: u + excess * decay,
    }
}

/// Closed-loop (or replayed) trajectory on the simulation grid. Row `k`
/// holds the state at `t[k]` together with the command and leader speed
/// applied over the following step; the last row repeats the final command.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub t: Vec<f64>,
    pub d: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
    pub u: Vec<f64>,
    pub v0: Vec<f64>,
    /// Follower's absolute longitudinal position (leader position minus
    /// spacing).
    pub x_fv: Vec<f64>,
}

pub const TRACE_HEADER: &str = "t,d,v,a,u,v0,x_fv";

impl SimTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for k in 0..self.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                self.t[k], self.d[k], self.v[k], self.a[k], self.u[k], self.v0[k], self.x_fv[k]
            );
        }
        out
    }

    /// Parses the format written by [`SimTrace::to_csv`].
    pub fn from_csv(text: &str) -> Result<SimTrace, PlantError> {
        let mut lines = text.lines().enumerate();
        match lines.find(|(_, l)| !l.trim().is_empty()) {
            Some((_, header)) if header.trim() == TRACE_HEADER => {}
            _ => {
                return Err(PlantError::BadTrace(format!(
                    "expected header `{TRACE_HEADER}`"
                )))
            }
        }
        let mut trace = SimTrace::default();
        for (idx, raw) in lines {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != 7 {
                return Err(PlantError::BadTrace(format!(
                    "line {}: expected 7 columns, got {}",
                    idx + 1,
                    cells.len()
                )));
            }
            let mut vals = [0.0f64; 7];
            for (v, cell) in vals.iter_mut().zip(&cells) {
                *v = cell.parse().map_err(|_| {
                    PlantError::BadTrace(format!("line {}: `{cell}` is not a number", idx + 1))
                })?;
                if !v.is_finite() {
                    return Err(PlantError::BadTrace(format!(
                        "line {}: non-finite value",
                        idx + 1
                    )));
                }
            }
            let [t, d, v, a, u, v0, x_fv] = vals;
            trace.push(t, PlantState { d, v, a }, u, v0, x_fv);
        }
        Ok(trace)
    }

    /// Rows with `t0 <= t <= t1` as a new trace.
    pub fn window(&self, t0: f64, t1: f64) -> SimTrace {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&k| self.t[k] >= t0 - 1e-9 && self.t[k] <= t1 + 1e-9)
            .collect();
        let pick = |src: &[f64]| keep.iter().map(|&k| src[k]).collect();
        SimTrace {
            t: pick(&self.t),
            d: pick(&self.d),
            v: pick(&self.v),
            a: pick(&self.a),
            u: pick(&self.u),
            v0: pick(&self.v0),
            x_fv: pick(&self.x_fv),
        }
    }

    fn push(&mut self, t: f64, s: PlantState, u: f64, v0: f64, x_fv: f64) {
        self.t.push(t);
        self.d.push(s.d);
        self.v.push(s.v);
        self.a.push(s.a);
        self.u.push(u);
        self.v0.push(v0);
        self.x_fv.push(x_fv);
    }
}

fn sample(series: &[f64], scenario: &MergeScenario, t: f64) -> f64 {
    series[scenario.fv.index_at(t)]
}

/// Steps over which the deployed jerk estimate is taken: a trailing secant
/// of the plant acceleration over this many samples. Recorded training data
/// gets its jerk from smoothed series; a raw one-step difference of the
/// plant state has far more bandwidth than anything a controller fitted to
/// recordings has seen, and turns the jerk input into a high-gain feedback
/// path. The half-second secant is exact on steady ramps and attenuates
/// single-step kicks to match the recorded feature's character.
const JERK_SECANT_STEPS: usize = 5;

/// Simulates the follower under `controller` against the recorded lane
/// changer, starting at `start_time` on the scenario clock. The initial
/// state is the recorded follower state there. Each step feeds the
/// controller the follower's recorded lateral speed (lateral motion is not
/// simulated), the magnitude of the plant's smoothed jerk (see
/// [`JERK_SECANT_STEPS`]), the plant's own spacing, and the recorded lateral
/// gap to the lane changer.
pub fn simulate_closed_loop(
    scenario: &MergeScenario,
    controller: &dyn LongitudinalController,
    cfg: &SimConfig,
    start_time: f64,
) -> Result<SimTrace, PlantError> {
    cfg.validate()?;
    if scenario.is_empty() {
        return Err(PlantError::BadScenario("empty scenario".into()));
    }
    let i0 = scenario.fv.index_at(start_time);
    let spacing = scenario.spacing_fv_lc();
    let mut state = PlantState {
        d: spacing[i0],
        v: scenario.fv.v_long[i0],
        a: scenario.fv.a_long[i0],
    };
    let mut x_lead = scenario.lc.y_long[i0];
    let t0 = scenario.fv.t[i0];
    let steps = (cfg.horizon / cfg.ts).round() as usize;

    let mut trace = SimTrace::default();
    // Ring of accelerations from JERK_SECANT_STEPS steps back, seeded with
    // the initial value so the engagement starts from an assumed steady past.
    let mut a_ring = [state.a; JERK_SECANT_STEPS];
    let mut last_u = 0.0;
    for k in 0..steps {
        let t = t0 + k as f64 * cfg.ts;
        let a_past = a_ring[k % JERK_SECANT_STEPS];
        let jerk_abs = (state.a - a_past).abs() / (JERK_SECANT_STEPS as f64 * cfg.ts);
        let inputs = ControllerInputs {
            vlat: sample(&scenario.fv.v_lat, scenario, t),
            jerk_abs,
            rel_long: state.d,
            rel_lat: (sample(&scenario.lc.x_lat, scenario, t)
                - sample(&scenario.fv.x_lat, scenario, t))
            .abs(),
        };
        let raw = controller
            .command(&inputs)
            .map_err(|source| PlantError::Controller {
                name: controller.name().to_string(),
                t,
                source,
            })?;
        let u = raw.clamp(cfg.u_min, cfg.u_max);
        let v0 = sample(&scenario.lc.v_long, scenario, t);
        trace.push(t, state, u, v0, x_lead - state.d);

        a_ring[k % JERK_SECANT_STEPS] = state.a;
        state = plant_step(state, u, v0, cfg.ts, cfg.tau);
        x_lead += v0 * cfg.ts;
        last_u = u;
        if !(state.d.is_finite() && state.v.is_finite() && state.a.is_finite()) {
            return Err(PlantError::NonFinite(t + cfg.ts));
        }
    }
    let t_end = t0 + steps as f64 * cfg.ts;
    let v0_end = sample(&scenario.lc.v_long, scenario, t_end);
    trace.push(t_end, state, last_u, v0_end, x_lead - state.d);
    Ok(trace)
}

/// Replays the recorded follower over the same grid and window conventions
/// as [`simulate_closed_loop`], for like-for-like comparison: the recorded
/// acceleration doubles as the command.
pub fn replay_human(
    scenario: &MergeScenario,
    cfg: &SimConfig,
    start_time: f64,
) -> Result<SimTrace, PlantError> {
    cfg.validate()?;
    if scenario.is_empty() {
        return Err(PlantError::BadScenario("empty scenario".into()));
    }
    let i0 = scenario.fv.index_at(start_time);
    let t0 = scenario.fv.t[i0];
    let spacing = scenario.spacing_fv_lc();
    let steps = (cfg.horizon / cfg.ts).round() as usize;
    let mut trace = SimTrace::default();
    for k in 0..=steps {
        let t = t0 + k as f64 * cfg.ts;
        let i = scenario.fv.index_at(t);
        let state = PlantState {
            d: spacing[i],
            v: scenario.fv.v_long[i],
            a: scenario.fv.a_long[i],
        };
        trace.push(
            t,
            state,
            scenario.fv.a_long[i],
            scenario.lc.v_long[i],
            scenario.fv.y_long[i],
        );
    }
    Ok(trace)
}

#[cfg(test)]
mod tests;
