//! Deterministic synthetic data: scripted cut-in events rendered as raw
//! trajectory tables, and seeded fuzzy systems with sampled datasets. Used
//! by the test suites and to produce the bundled sample table.

use crate::anfis::{AnfisError, Dataset};
use crate::fuzzy::{
    grid_partition, FuzzyInferenceSystem, FuzzyVariable, MembershipFunction, MfFamily,
};
use crate::ingest::{RawRow, FRAME_DT, TRAJECTORY_HEADER};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

/// Piecewise longitudinal acceleration profile with closed-form integrals,
/// so sampled positions are exact (no quadrature error on top of the model).
enum Accel {
    Const(f64),
    /// Linear ramp from `a0` to `a1` over the segment.
    Ramp(f64, f64),
    /// `base + amp * sin(2 pi t / period)` from the segment start.
    Sine { base: f64, amp: f64, period: f64 },
}

struct Segment {
    duration: f64,
    accel: Accel,
}

impl Segment {
    fn accel_at(&self, s: f64) -> f64 {
        match self.accel {
            Accel::Const(a) => a,
            Accel::Ramp(a0, a1) => a0 + (a1 - a0) * s / self.duration,
            Accel::Sine { base, amp, period } => {
                base + amp * (2.0 * std::f64::consts::PI * s / period).sin()
            }
        }
    }

    /// Velocity gained over `[0, s]`.
    fn dv(&self, s: f64) -> f64 {
        match self.accel {
            Accel::Const(a) => a * s,
            Accel::Ramp(a0, a1) => a0 * s + (a1 - a0) * s * s / (2.0 * self.duration),
            Accel::Sine { base, amp, period } => {
                let w = 2.0 * std::f64::consts::PI / period;
                base * s + amp / w * (1.0 - (w * s).cos())
            }
        }
    }

    /// Distance covered by the acceleration alone over `[0, s]` (on top of
    /// the entry velocity).
    fn dx(&self, s: f64) -> f64 {
        match self.accel {
            Accel::Const(a) => 0.5 * a * s * s,
            Accel::Ramp(a0, a1) => {
                0.5 * a0 * s * s + (a1 - a0) * s * s * s / (6.0 * self.duration)
            }
            Accel::Sine { base, amp, period } => {
                let w = 2.0 * std::f64::consts::PI / period;
                0.5 * base * s * s + amp / w * (s - (w * s).sin() / w)
            }
        }
    }
}

/// Longitudinal motion: samples `(y, v, a)` on the 10 Hz grid by exact
/// per-segment integration.
fn integrate(y0: f64, v0: f64, segments: &[Segment], n_samples: usize) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::with_capacity(n_samples);
    let mut seg_start_t = 0.0;
    let mut seg = 0;
    let (mut y, mut v) = (y0, v0);
    for k in 0..n_samples {
        let t = k as f64 * FRAME_DT;
        while seg < segments.len() && t > seg_start_t + segments[seg].duration + 1e-12 {
            let d = segments[seg].duration;
            y += v * d + segments[seg].dx(d);
            v += segments[seg].dv(d);
            seg_start_t += d;
            seg += 1;
        }
        if seg >= segments.len() {
            let s = t - seg_start_t;
            out.push((y + v * s, v, 0.0));
        } else {
            let s = t - seg_start_t;
            out.push((
                y + v * s + segments[seg].dx(s),
                v + segments[seg].dv(s),
                segments[seg].accel_at(s),
            ));
        }
    }
    out
}

/// One scripted cut-in. The event spans 15 s at 10 Hz and is laid out so
/// the follower's behavioral boundaries fall near 4 s (lateral reaction),
/// 6-7 s (calm assessment), 7 s (braking onset), 9 s (lane change settles)
/// and 12 s (spacing meets the safe distance) on the event clock.
#[derive(Debug, Clone)]
pub struct MergeEventConfig {
    pub fv_id: u64,
    pub lc_id: u64,
    pub lv_id: u64,
    /// Added to every frame number (shifts the event clock).
    pub frame_offset: u64,
    /// Follower speed before the maneuver (m/s).
    pub v_fv: f64,
    /// Lane changer and leader speed (m/s); must exceed `v_fv - brake`.
    pub v_lc: f64,
    /// Depth of the follower's preparation braking (m/s^2, positive).
    pub brake: f64,
    /// Amplitude (m/s^2) of the follower's slow speed hunting while the gap
    /// reopens; 0 gives a steady approach.
    pub dither: f64,
    /// Standard deviation of the jitter on the follower's reported position
    /// (m); 0 gives the clean scripted trace.
    pub noise: f64,
    pub seed: u64,
}

impl Default for MergeEventConfig {
    fn default() -> Self {
        MergeEventConfig {
            fv_id: 1,
            lc_id: 2,
            lv_id: 3,
            frame_offset: 0,
            v_fv: 10.0,
            v_lc: 10.3,
            brake: 1.2,
            dither: 0.0,
            noise: 0.0,
            seed: 0,
        }
    }
}

const EVENT_SAMPLES: usize = 151;
const FV_LENGTH: f64 = 5.0;
const LC_LENGTH: f64 = 4.6;
const LV_LENGTH: f64 = 4.8;
const LANE_BOUNDARY: f64 = 3.6;
const LANE1_X: f64 = 1.8;
const LANE2_X: f64 = 5.4;

fn smoothstep(x0: f64, x1: f64, s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    x0 + (x1 - x0) * s * s * (3.0 - 2.0 * s)
}

/// Renders one cut-in event as raw trajectory rows (three vehicles, 151
/// frames each). Deterministic in the config.
pub fn merge_event_rows(cfg: &MergeEventConfig) -> Vec<RawRow> {
    let v_brake = cfg.v_fv - cfg.brake;
    // The hunting runs three half-cycles over the reopening stretch, so it
    // enters and leaves the segment at zero acceleration.
    let dither_period = 2.0 * 3.7 / 3.0;
    let dither_dv = 2.0 * cfg.dither * dither_period / (2.0 * std::f64::consts::PI);
    assert!(
        cfg.v_lc > v_brake + dither_dv,
        "leader must outrun the braked follower for the gap to open"
    );
    // Follower: cruise, rough assessment wobble, calm stretch, brake ramp,
    // (possibly unsteady) coasting while the gap reopens, recovery back to
    // the leader's speed once the safe gap is restored.
    let fv_segments = [
        Segment { duration: 4.0, accel: Accel::Const(0.0) },
        Segment { duration: 1.9, accel: Accel::Sine { base: 0.0, amp: -0.4, period: 0.95 } },
        Segment { duration: 1.2, accel: Accel::Const(0.0) },
        Segment { duration: 0.4, accel: Accel::Ramp(0.0, -cfg.brake) },
        Segment { duration: 0.6, accel: Accel::Const(-cfg.brake) },
        Segment { duration: 0.4, accel: Accel::Ramp(-cfg.brake, 0.0) },
        Segment {
            duration: 3.7,
            accel: Accel::Sine { base: 0.0, amp: cfg.dither, period: dither_period },
        },
        Segment {
            duration: 2.0,
            accel: Accel::Const((cfg.v_lc - v_brake - dither_dv) / 2.0),
        },
    ];
    let fv_long = integrate(100.0, cfg.v_fv, &fv_segments, EVENT_SAMPLES);

    // Initial gap chosen so the spacing deficit closes exactly at the 12 s
    // mark: whatever the follower's speed path, spacing(12) must land a
    // nudge past the safe distance at the speed it holds there.
    let (fv_y_at_9, _, _) = fv_long[90];
    let (fv_y_at_12, fv_v_at_12, _) = fv_long[120];
    let s_at_12 = FV_LENGTH * (1.0 + fv_v_at_12 / 4.47);
    let spacing_at_complete = s_at_12 + 0.04 - 3.0 * cfg.v_lc + (fv_y_at_12 - fv_y_at_9);
    let lc_y0 = fv_y_at_9 + spacing_at_complete - cfg.v_lc * 9.0;
    let lv_y0 = lc_y0 + 20.0;

    // Measurement jitter on the follower's reported position: AR(1)-colored
    // and bounded (never integrated into the trajectory), so the scripted
    // spacing geometry survives a noisy replay. The envelope silences it
    // while the calm stretch and its smoothing neighborhood are measured.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rho = 0.9_f64;
    let mut eps = 0.0_f64;
    let jitter: Vec<f64> = (0..EVENT_SAMPLES)
        .map(|k| {
            let t = k as f64 * FRAME_DT;
            // Quiet from just before the lateral reaction through the calm
            // stretch: the script's jerk rides near the calm threshold
            // there, and leaked jitter must not flip it either way; the
            // reaction onset itself stays clean so the maneuver start is
            // read from geometry, not from sensor luck.
            let envelope = if (3.9..=7.5).contains(&t) {
                0.0
            } else if (3.4..3.9).contains(&t) {
                (3.9 - t) / 0.5
            } else if (7.5..8.0).contains(&t) {
                (t - 7.5) / 0.5
            } else {
                1.0
            };
            if cfg.noise > 0.0 {
                // Uniform(-1, 1) scaled to unit variance, AR(1)-colored.
                let white = rng.gen_range(-1.0..1.0) * 3.0_f64.sqrt();
                eps = rho * eps + cfg.noise * (1.0 - rho * rho).sqrt() * white;
                eps * envelope
            } else {
                0.0
            }
        })
        .collect();

    let mut rows = Vec::with_capacity(3 * EVENT_SAMPLES);
    for k in 0..EVENT_SAMPLES {
        let t = k as f64 * FRAME_DT;

        let (fv_y, fv_v, fv_a) = fv_long[k];
        // Reported speed and acceleration follow the provider convention:
        // backward differences of the reported positions.
        let v_jit = if k >= 1 { (jitter[k] - jitter[k - 1]) / FRAME_DT } else { 0.0 };
        let a_jit = if k >= 2 {
            (jitter[k] - 2.0 * jitter[k - 1] + jitter[k - 2]) / (FRAME_DT * FRAME_DT)
        } else {
            0.0
        };
        // Lateral reaction: constant-rate drift away from the seam between
        // 4.0 and 4.8 s.
        let fv_x = if t <= 4.0 {
            LANE2_X
        } else if t < 4.8 {
            LANE2_X + 0.5 * (t - 4.0)
        } else {
            LANE2_X + 0.4
        };

        let lc_x = smoothstep(LANE1_X, LANE2_X, (t - 6.4) / 2.5);
        let lc_y = lc_y0 + cfg.v_lc * t;
        let lv_y = lv_y0 + cfg.v_lc * t;
        let lc_lane = if lc_x > LANE_BOUNDARY { 2 } else { 1 };
        let frame = cfg.frame_offset + k as u64;

        rows.push(RawRow {
            vehicle_id: cfg.fv_id,
            frame_id: frame,
            local_x: fv_x,
            local_y: fv_y + jitter[k],
            v_vel: fv_v + v_jit,
            v_acc: fv_a + a_jit,
            lane_id: 2,
            v_length: FV_LENGTH,
            preceding_id: if lc_lane == 2 { cfg.lc_id } else { 0 },
            following_id: 0,
        });
        rows.push(RawRow {
            vehicle_id: cfg.lc_id,
            frame_id: frame,
            local_x: lc_x,
            local_y: lc_y,
            v_vel: cfg.v_lc,
            v_acc: 0.0,
            lane_id: lc_lane,
            v_length: LC_LENGTH,
            preceding_id: if lc_lane == 1 { cfg.lv_id } else { 0 },
            following_id: if lc_lane == 2 { cfg.fv_id } else { 0 },
        });
        rows.push(RawRow {
            vehicle_id: cfg.lv_id,
            frame_id: frame,
            local_x: LANE1_X,
            local_y: lv_y,
            v_vel: cfg.v_lc,
            v_acc: 0.0,
            lane_id: 1,
            v_length: LV_LENGTH,
            preceding_id: 0,
            following_id: if lc_lane == 1 { cfg.lc_id } else { 0 },
        });
    }
    rows
}

/// Renders rows as a trajectory CSV with the standard header.
pub fn trajectory_csv(rows: &[RawRow]) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.vehicle_id,
            r.frame_id,
            r.local_x,
            r.local_y,
            r.v_vel,
            r.v_acc,
            r.lane_id,
            r.v_length,
            r.preceding_id,
            r.following_id
        );
    }
    out
}

/// The clean scripted event used by tests that pin boundary times.
pub fn clean_event_rows() -> Vec<RawRow> {
    merge_event_rows(&MergeEventConfig::default())
}

/// Content of the bundled sample table: five cut-in events with varied
/// speeds, braking depths and sensor quality. Every driver hunts around the
/// coasting speed while the gap reopens; the first hunts below it and
/// carries by far the roughest position sensor of the set. Byte-stable.
pub fn sample_table() -> String {
    let specs = [
        (1u64, 0u64, 10.0, 10.3, 1.2, -1.0, 0.60, 11u64),
        (11, 200, 9.5, 9.9, 1.0, 0.7, 0.12, 12),
        (21, 400, 10.5, 10.8, 1.4, -0.7, 0.05, 13),
        (31, 600, 9.8, 10.2, 1.1, 0.7, 0.12, 14),
        (41, 800, 10.2, 10.4, 1.3, -0.7, 0.05, 15),
    ];
    let mut rows = Vec::new();
    for (base_id, offset, v_fv, v_lc, brake, dither, noise, seed) in specs {
        rows.extend(merge_event_rows(&MergeEventConfig {
            fv_id: base_id,
            lc_id: base_id + 1,
            lv_id: base_id + 2,
            frame_offset: offset,
            v_fv,
            v_lc,
            brake,
            dither,
            noise,
            seed,
        }));
    }
    trajectory_csv(&rows)
}

/// Seeded random grid-complete system (1-3 inputs, 2-3 functions per input,
/// random first-order consequents) of the given family, plus the generator
/// RNG so callers can sample in-universe inputs from the same stream.
pub fn random_grid_fis(seed: u64, family: MfFamily) -> (FuzzyInferenceSystem, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_inputs = rng.gen_range(1..=3);
    let mut vars = Vec::new();
    for i in 0..n_inputs {
        let lo = rng.gen_range(-5.0..0.0);
        let hi = lo + rng.gen_range(0.5..10.0);
        let count = rng.gen_range(2..=3);
        let mfs = grid_partition(family, lo, hi, count).unwrap();
        vars.push(FuzzyVariable::new(format!("x{i}"), lo, hi, mfs).unwrap());
    }
    let mut fis = FuzzyInferenceSystem::grid(vars, "y").unwrap();
    for r in 0..fis.rules().len() {
        let coeffs: Vec<f64> = (0..=n_inputs).map(|_| rng.gen_range(-3.0..3.0)).collect();
        fis.set_consequent(r, coeffs).unwrap();
    }
    (fis, rng)
}

/// One input vector drawn uniformly from the system's universes.
pub fn random_universe_input(fis: &FuzzyInferenceSystem, rng: &mut ChaCha8Rng) -> Vec<f64> {
    fis.inputs()
        .iter()
        .map(|v| {
            let (lo, hi) = v.universe();
            rng.gen_range(lo..=hi)
        })
        .collect()
}

/// A known Gaussian teacher system: `mfs_per_input` evenly spread Gaussian
/// functions per input over seeded universes, consequents drawn from the
/// seed. Serves as ground truth for recovery experiments.
pub fn gaussian_teacher(seed: u64, n_inputs: usize, mfs_per_input: usize) -> FuzzyInferenceSystem {
    assert!(n_inputs >= 1 && mfs_per_input >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vars = Vec::new();
    for i in 0..n_inputs {
        let lo = rng.gen_range(-2.0..0.0);
        let hi = lo + rng.gen_range(2.0..4.0);
        let step = (hi - lo) / (mfs_per_input - 1) as f64;
        let mfs: Vec<MembershipFunction> = (0..mfs_per_input)
            .map(|m| {
                let c = lo + step * m as f64;
                let sigma = step * rng.gen_range(0.4..0.7);
                MembershipFunction::new(MfFamily::Gaussian, vec![sigma, c]).unwrap()
            })
            .collect();
        vars.push(FuzzyVariable::new(format!("x{i}"), lo, hi, mfs).unwrap());
    }
    let mut fis = FuzzyInferenceSystem::grid(vars, "y").unwrap();
    for r in 0..fis.rules().len() {
        let coeffs: Vec<f64> = (0..=n_inputs).map(|_| rng.gen_range(-2.0..2.0)).collect();
        fis.set_consequent(r, coeffs).unwrap();
    }
    fis
}

/// Samples a noise-free dataset from a system: uniform in-universe inputs,
/// targets by inference.
pub fn dataset_from_fis(
    fis: &FuzzyInferenceSystem,
    n_rows: usize,
    seed: u64,
) -> Result<Dataset, AnfisError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(n_rows);
    let mut ys = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let x = random_universe_input(fis, &mut rng);
        ys.push(fis.infer(&x)?);
        xs.push(x);
    }
    let names: Vec<String> = fis.inputs().iter().map(|v| v.name().to_string()).collect();
    Dataset::new(names, fis.output_name().to_string(), xs, ys)
}
