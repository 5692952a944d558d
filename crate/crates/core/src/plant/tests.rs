use super::*;
use crate::control::{ConstantController, LongitudinalController};
use crate::fuzzy::FuzzyError;
use crate::ingest::{MergeScenario, ScenarioMeta, VehicleTrack, FRAME_DT};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn assert_close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
}

/// Continuous-time solution under a constant command and leader speed.
fn exact_state(s0: PlantState, u: f64, v0: f64, tau: f64, t: f64) -> PlantState {
    let decay = (-t / tau).exp();
    let excess = s0.a - u;
    let advance = s0.v * t + 0.5 * u * t * t + excess * tau * (t - tau * (1.0 - decay));
    PlantState {
        d: s0.d + v0 * t - advance,
        v: s0.v + u * t + excess * tau * (1.0 - decay),
        a: u + excess * decay,
    }
}

fn track_with(id: u64, n: usize, f: impl Fn(f64, &mut VehicleTrack, usize)) -> VehicleTrack {
    let mut tr = VehicleTrack {
        id,
        length: 5.0,
        t: (0..n).map(|k| k as f64 * FRAME_DT).collect(),
        x_lat: vec![0.0; n],
        y_long: vec![0.0; n],
        v_lat: vec![0.0; n],
        v_long: vec![0.0; n],
        a_long: vec![0.0; n],
        a_tot: vec![0.0; n],
        jerk: vec![0.0; n],
        rec_v: vec![0.0; n],
        rec_a: vec![0.0; n],
        lane_id: vec![2; n],
        preceding: vec![0; n],
        following: vec![0; n],
    };
    for i in 0..n {
        let t = tr.t[i];
        f(t, &mut tr, i);
    }
    tr
}

/// Follower and leader both cruising at `v` with a 20 m gap.
fn cruise_scenario(v: f64, n: usize) -> MergeScenario {
    let fv = track_with(1, n, |t, tr, i| {
        tr.y_long[i] = v * t;
        tr.v_long[i] = v;
    });
    let lc = track_with(2, n, |t, tr, i| {
        tr.y_long[i] = v * t + 20.0;
        tr.v_long[i] = v;
    });
    let lv = track_with(3, n, |t, tr, i| {
        tr.y_long[i] = v * t + 40.0;
        tr.v_long[i] = v;
    });
    let meta = ScenarioMeta {
        name: "cruise".into(),
        source: "test".into(),
        fv_id: 1,
        lc_id: 2,
        lv_id: 3,
        source_lane: 1,
        target_lane: 2,
    };
    MergeScenario::new(fv, lc, lv, Some(0), meta).unwrap()
}

struct Unreachable;

impl LongitudinalController for Unreachable {
    fn command(&self, _inputs: &crate::control::ControllerInputs) -> Result<f64, FuzzyError> {
        panic!("controller must not run over an empty horizon");
    }

    fn name(&self) -> &str {
        "unreachable"
    }
}

struct Failing;

impl LongitudinalController for Failing {
    fn command(&self, _inputs: &crate::control::ControllerInputs) -> Result<f64, FuzzyError> {
        Err(FuzzyError::NonFiniteInput)
    }

    fn name(&self) -> &str {
        "failing"
    }
}

#[test]
fn step_matches_the_continuous_solution_over_a_hundred_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let s0 = PlantState {
            d: rng.gen_range(5.0..40.0),
            v: rng.gen_range(0.0..20.0),
            a: rng.gen_range(-3.0..3.0),
        };
        let u = rng.gen_range(-4.0..4.0);
        let v0 = rng.gen_range(0.0..20.0);
        let (ts, tau) = (0.1, 0.1);
        let mut s = s0;
        for k in 1..=100 {
            s = plant_step(s, u, v0, ts, tau);
            let want = exact_state(s0, u, v0, tau, k as f64 * ts);
            assert_close(s.d, want.d, 1e-9);
            assert_close(s.v, want.v, 1e-9);
            assert_close(s.a, want.a, 1e-9);
        }
    }
}

#[test]
fn step_composition_is_exact() {
    // The update is the exact flow of the hold dynamics, so splitting a step
    // into sub-steps must land on the same state.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let s0 = PlantState {
            d: rng.gen_range(5.0..40.0),
            v: rng.gen_range(0.0..20.0),
            a: rng.gen_range(-3.0..3.0),
        };
        let u = rng.gen_range(-4.0..4.0);
        let v0 = rng.gen_range(0.0..20.0);
        let tau = 0.1;
        let whole = plant_step(s0, u, v0, 0.1, tau);
        let mut fine = s0;
        for _ in 0..100 {
            fine = plant_step(fine, u, v0, 0.001, tau);
        }
        assert_close(fine.d, whole.d, 1e-10);
        assert_close(fine.v, whole.v, 1e-10);
        assert_close(fine.a, whole.a, 1e-10);
        let split = plant_step(plant_step(s0, u, v0, 0.03, tau), u, v0, 0.07, tau);
        assert_close(split.d, whole.d, 1e-12);
        assert_close(split.v, whole.v, 1e-12);
        assert_close(split.a, whole.a, 1e-12);
    }
}

#[test]
fn spacing_change_equals_the_speed_gap_integral() {
    // d advances by the integral of v0 - v(t); Simpson quadrature on the
    // closed-form v(t) must agree to 1e-9.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let s0 = PlantState {
            d: rng.gen_range(5.0..40.0),
            v: rng.gen_range(0.0..20.0),
            a: rng.gen_range(-3.0..3.0),
        };
        let u = rng.gen_range(-4.0..4.0);
        let v0 = rng.gen_range(0.0..20.0);
        let (ts, tau) = (0.1, 0.1);
        let after = plant_step(s0, u, v0, ts, tau);
        let n = 100;
        let h = ts / n as f64;
        let v_at = |t: f64| exact_state(s0, u, v0, tau, t).v;
        let mut integral = v_at(0.0) + v_at(ts);
        for j in 1..n {
            integral += v_at(j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 };
        }
        integral *= h / 3.0;
        assert_close(after.d - s0.d, v0 * ts - integral, 1e-9);
    }
}

#[test]
fn worked_step_examples() {
    // Pure lag response: a starts at 0 under u = 1 and reaches 1 - e^-1
    // after one time constant.
    let s = plant_step(PlantState { d: 10.0, v: 5.0, a: 0.0 }, 1.0, 5.0, 0.1, 0.1);
    assert_close(s.a, 1.0 - (-1.0_f64).exp(), 1e-15);

    // Coasting with a 2 m/s closing speed opens the gap by 0.2 m per step.
    let s = plant_step(PlantState { d: 10.0, v: 5.0, a: 0.0 }, 0.0, 7.0, 0.1, 0.1);
    assert_close(s.d, 10.2, 1e-12);
    assert_close(s.v, 5.0, 1e-12);

    // u = a is a fixed point of the lag.
    let s = plant_step(PlantState { d: 10.0, v: 5.0, a: 2.0 }, 2.0, 5.0, 0.1, 0.1);
    assert_eq!(s.a, 2.0);

    // Full equilibrium: matched speeds, no command, no lag state.
    let s = plant_step(PlantState { d: 10.0, v: 5.0, a: 0.0 }, 0.0, 5.0, 0.1, 0.1);
    assert_close(s.d, 10.0, 1e-12);
    assert_eq!(s.v, 5.0);
    assert_eq!(s.a, 0.0);
}

#[test]
fn config_validation_rejects_bad_fields() {
    let ok = SimConfig::default();
    assert!(ok.validate().is_ok());
    for bad in [
        SimConfig { ts: 0.0, ..ok },
        SimConfig { tau: -1.0, ..ok },
        SimConfig { horizon: -0.1, ..ok },
        SimConfig { u_min: 4.0, u_max: 4.0, ..ok },
        SimConfig { ts: f64::NAN, ..ok },
    ] {
        assert!(matches!(bad.validate(), Err(PlantError::BadConfig(_))));
    }
}

#[test]
fn cruising_follower_under_zero_command_holds_the_gap() {
    let scenario = cruise_scenario(8.0, 151);
    let cfg = SimConfig { horizon: 2.0, ..SimConfig::default() };
    let controller = ConstantController::new(0.0, "zero");
    let trace = simulate_closed_loop(&scenario, &controller, &cfg, 0.0).unwrap();
    assert_eq!(trace.len(), 21);
    assert_close(trace.t[20], 2.0, 1e-9);
    for k in 0..trace.len() {
        assert_close(trace.d[k], 20.0, 1e-9);
        assert_close(trace.v[k], 8.0, 1e-9);
        assert_close(trace.x_fv[k], 8.0 * trace.t[k], 1e-9);
        assert_eq!(trace.u[k], 0.0);
        assert_eq!(trace.v0[k], 8.0);
    }
}

#[test]
fn commands_are_clamped_to_the_actuator_limits() {
    let scenario = cruise_scenario(8.0, 151);
    let cfg = SimConfig { horizon: 3.0, ..SimConfig::default() };
    let controller = ConstantController::new(100.0, "floor-it");
    let trace = simulate_closed_loop(&scenario, &controller, &cfg, 0.0).unwrap();
    assert!(trace.u.iter().all(|&u| u == cfg.u_max));
    // After thirty time constants the lag has converged onto the limit.
    assert_close(*trace.a.last().unwrap(), cfg.u_max, 1e-9);
    assert!(trace.d.windows(2).all(|w| w[1] < w[0]), "gap must shrink");
}

#[test]
fn zero_horizon_emits_one_row_without_consulting_the_controller() {
    let scenario = cruise_scenario(8.0, 151);
    let cfg = SimConfig { horizon: 0.0, ..SimConfig::default() };
    let trace = simulate_closed_loop(&scenario, &Unreachable, &cfg, 1.0).unwrap();
    assert_eq!(trace.len(), 1);
    assert_close(trace.t[0], 1.0, 1e-12);
    assert_close(trace.d[0], 20.0, 1e-9);
    assert_eq!(trace.u[0], 0.0);
}

#[test]
fn start_time_snaps_to_the_recorded_grid() {
    let scenario = cruise_scenario(8.0, 151);
    let cfg = SimConfig { horizon: 1.0, ..SimConfig::default() };
    let controller = ConstantController::new(0.0, "zero");
    let trace = simulate_closed_loop(&scenario, &controller, &cfg, 0.24).unwrap();
    assert_close(trace.t[0], 0.2, 1e-12);
}

#[test]
fn controller_failures_carry_name_and_time() {
    let scenario = cruise_scenario(8.0, 151);
    let cfg = SimConfig { horizon: 1.0, ..SimConfig::default() };
    match simulate_closed_loop(&scenario, &Failing, &cfg, 0.5).unwrap_err() {
        PlantError::Controller { name, t, .. } => {
            assert_eq!(name, "failing");
            assert_close(t, 0.5, 1e-12);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn non_finite_commands_are_caught() {
    let scenario = cruise_scenario(8.0, 151);
    let cfg = SimConfig { horizon: 1.0, ..SimConfig::default() };
    let controller = ConstantController::new(f64::NAN, "broken");
    assert!(matches!(
        simulate_closed_loop(&scenario, &controller, &cfg, 0.0),
        Err(PlantError::NonFinite(_))
    ));
}

#[test]
fn simulation_is_deterministic() {
    let scenario = cruise_scenario(9.0, 151);
    let cfg = SimConfig { horizon: 5.0, ..SimConfig::default() };
    let controller = ConstantController::new(0.3, "bias");
    let a = simulate_closed_loop(&scenario, &controller, &cfg, 0.0).unwrap();
    let b = simulate_closed_loop(&scenario, &controller, &cfg, 0.0).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn replay_mirrors_the_recording_on_the_simulation_grid() {
    let scenario = cruise_scenario(8.0, 151);
    let cfg = SimConfig { horizon: 2.0, ..SimConfig::default() };
    let replay = replay_human(&scenario, &cfg, 0.0).unwrap();
    let sim = simulate_closed_loop(&scenario, &ConstantController::new(0.0, "zero"), &cfg, 0.0)
        .unwrap();
    assert_eq!(replay.len(), sim.len());
    for k in 0..replay.len() {
        assert_close(replay.t[k], sim.t[k], 1e-12);
        assert_close(replay.d[k], 20.0, 1e-9);
        assert_close(replay.v[k], 8.0, 1e-9);
        assert_eq!(replay.u[k], replay.a[k]);
        assert_close(replay.x_fv[k], 8.0 * replay.t[k], 1e-9);
    }
}

#[test]
fn trace_window_selects_inclusive_time_bounds() {
    let scenario = cruise_scenario(8.0, 151);
    let cfg = SimConfig { horizon: 2.0, ..SimConfig::default() };
    let trace = replay_human(&scenario, &cfg, 0.0).unwrap();
    let cut = trace.window(0.5, 1.0);
    assert_eq!(cut.len(), 6);
    assert_close(cut.t[0], 0.5, 1e-9);
    assert_close(*cut.t.last().unwrap(), 1.0, 1e-9);
    let empty = trace.window(5.0, 6.0);
    assert!(empty.is_empty());
}

#[test]
fn trace_csv_has_one_line_per_row() {
    let scenario = cruise_scenario(8.0, 151);
    let cfg = SimConfig { horizon: 1.0, ..SimConfig::default() };
    let trace = replay_human(&scenario, &cfg, 0.0).unwrap();
    let csv = trace.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(TRACE_HEADER));
    assert_eq!(lines.count(), trace.len());
}

#[test]
fn trace_csv_round_trips() {
    let scenario = cruise_scenario(8.0, 151);
    let cfg = SimConfig { horizon: 1.0, ..SimConfig::default() };
    let trace = replay_human(&scenario, &cfg, 0.0).unwrap();
    let parsed = SimTrace::from_csv(&trace.to_csv()).unwrap();
    assert_eq!(parsed, trace);
}

#[test]
fn trace_parser_rejects_malformed_text() {
    for bad in [
        "",
        "t,d,v\n",
        "t,d,v,a,u,v0,x_fv\n1,2,3\n",
        "t,d,v,a,u,v0,x_fv\n1,2,3,4,5,6,oops\n",
        "t,d,v,a,u,v0,x_fv\n1,2,3,4,5,6,inf\n",
    ] {
        assert!(matches!(
            SimTrace::from_csv(bad),
            Err(PlantError::BadTrace(_))
        ));
    }
}
