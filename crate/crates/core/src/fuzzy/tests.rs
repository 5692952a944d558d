use super::format::{from_text, to_text, ParseError};
use super::*;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::cast::ToPrimitive;
use proptest::prelude::*;
use rand::Rng;

fn mf(family: MfFamily, params: &[f64]) -> MembershipFunction {
    MembershipFunction::new(family, params.to_vec()).unwrap()
}

fn assert_close(got: f64, want: f64, tol: f64) {
    assert!(
        (got - want).abs() <= tol,
        "got {got}, want {want} (tol {tol})"
    );
}

#[test]
fn triangular_spot_values() {
    let tri = mf(MfFamily::Triangular, &[0.0, 1.0, 2.0]);
    assert_eq!(tri.eval(1.0), 1.0);
    assert_eq!(tri.eval(0.5), 0.5);
    assert_eq!(tri.eval(1.5), 0.5);
    assert_eq!(tri.eval(-0.1), 0.0);
    assert_eq!(tri.eval(2.0), 0.0);
}

#[test]
fn triangular_degenerate_edges_are_steps() {
    let left = mf(MfFamily::Triangular, &[0.0, 0.0, 1.0]);
    assert_eq!(left.eval(0.0), 1.0);
    assert_eq!(left.eval(-1.0), 0.0);
    assert_eq!(left.eval(0.5), 0.5);
    let right = mf(MfFamily::Triangular, &[0.0, 1.0, 1.0]);
    assert_eq!(right.eval(1.0), 1.0);
    assert_eq!(right.eval(2.0), 0.0);
    let spike = mf(MfFamily::Triangular, &[1.0, 1.0, 1.0]);
    assert_eq!(spike.eval(1.0), 1.0);
    assert_eq!(spike.eval(1.1), 0.0);
    assert_eq!(spike.eval(0.9), 0.0);
}

#[test]
fn trapezoidal_spot_values() {
    let trap = mf(MfFamily::Trapezoidal, &[1.0, 2.0, 4.0, 7.0]);
    assert_eq!(trap.eval(1.5), 0.5);
    assert_eq!(trap.eval(2.0), 1.0);
    assert_eq!(trap.eval(3.0), 1.0);
    assert_eq!(trap.eval(4.0), 1.0);
    assert_close(trap.eval(5.0), 2.0 / 3.0, 1e-15);
    assert_eq!(trap.eval(7.0), 0.0);
}

#[test]
fn generalized_bell_spot_values() {
    let bell = mf(MfFamily::GeneralizedBell, &[2.0, 4.0, 6.0]);
    assert_eq!(bell.eval(6.0), 1.0);
    assert_eq!(bell.eval(4.0), 0.5);
    assert_eq!(bell.eval(8.0), 0.5);
    assert_close(bell.eval(7.0), 0.9961089494163424, 1e-15);
}

#[test]
fn gaussian_spot_values() {
    let g = mf(MfFamily::Gaussian, &[1.0, 1.0]);
    assert_eq!(g.eval(1.0), 1.0);
    assert_close(g.eval(2.0), 0.6065306597126334, 1e-15);
    assert_close(g.eval(0.0), 0.6065306597126334, 1e-15);
}

#[test]
fn gaussian_param_order_is_sigma_then_center() {
    // [0.5, 3.0] must read sigma=0.5, center=3.0, not the reverse.
    let g = mf(MfFamily::Gaussian, &[0.5, 3.0]);
    assert_eq!(g.eval(3.0), 1.0);
    assert_close(g.eval(3.5), 0.6065306597126334, 1e-15);
}

#[test]
fn gaussian_combination_plateaus_between_centers() {
    let g2 = mf(MfFamily::GaussianCombination, &[1.0, 3.0, 2.0, 5.0]);
    assert_eq!(g2.eval(3.0), 1.0);
    assert_eq!(g2.eval(4.0), 1.0);
    assert_eq!(g2.eval(5.0), 1.0);
    assert_close(g2.eval(2.0), 0.6065306597126334, 1e-15);
    assert_close(g2.eval(6.0), 0.8824969025845955, 1e-15);
}

#[test]
fn pi_shaped_spot_values() {
    let pi = mf(MfFamily::PiShaped, &[1.0, 2.0, 4.0, 7.0]);
    assert_eq!(pi.eval(1.0), 0.0);
    assert_eq!(pi.eval(1.5), 0.5);
    assert_eq!(pi.eval(2.0), 1.0);
    assert_eq!(pi.eval(3.0), 1.0);
    assert_eq!(pi.eval(4.0), 1.0);
    assert_eq!(pi.eval(5.5), 0.5);
    assert_eq!(pi.eval(7.0), 0.0);
}

#[test]
fn sigmoid_families_spot_values() {
    let ds = mf(MfFamily::DiffSigmoid, &[5.0, 2.0, 5.0, 7.0]);
    assert_close(ds.eval(4.5), 0.9999925467214317, 1e-12);
    let ps = mf(MfFamily::ProdSigmoid, &[5.0, 2.0, 5.0, 7.0]);
    assert_close(ps.eval(4.5), 3.7266253963462068e-6, 1e-18);
}

#[test]
fn diff_sigmoid_stays_in_unit_interval_when_terms_swap() {
    // With the faster sigmoid second, the raw difference would be negative.
    let ds = mf(MfFamily::DiffSigmoid, &[5.0, 7.0, 5.0, 2.0]);
    for i in 0..=100 {
        let x = i as f64 * 0.1;
        let y = ds.eval(x);
        assert!((0.0..=1.0).contains(&y), "x={x} gave {y}");
    }
}

#[test]
fn all_families_map_into_unit_interval() {
    let mfs = [
        mf(MfFamily::Triangular, &[-1.0, 0.0, 2.0]),
        mf(MfFamily::Trapezoidal, &[-1.0, 0.0, 1.0, 2.0]),
        mf(MfFamily::GeneralizedBell, &[1.0, 0.7, 0.5]),
        mf(MfFamily::Gaussian, &[0.3, 0.5]),
        mf(MfFamily::GaussianCombination, &[0.3, 0.2, 0.4, 0.9]),
        mf(MfFamily::PiShaped, &[-1.0, 0.0, 1.0, 2.0]),
        mf(MfFamily::DiffSigmoid, &[8.0, 0.2, 8.0, 0.8]),
        mf(MfFamily::ProdSigmoid, &[8.0, 0.2, -8.0, 0.8]),
    ];
    for m in &mfs {
        for i in -20..=40 {
            let x = i as f64 * 0.1;
            let y = m.eval(x);
            assert!(y.is_finite() && (0.0..=1.0).contains(&y), "{m:?} at {x}: {y}");
        }
    }
}

#[test]
fn parameter_validation_rejects_bad_shapes() {
    assert!(matches!(
        MembershipFunction::new(MfFamily::Triangular, vec![0.0, 1.0]),
        Err(FuzzyError::ArityMismatch { .. })
    ));
    assert!(matches!(
        MembershipFunction::new(MfFamily::Triangular, vec![2.0, 1.0, 3.0]),
        Err(FuzzyError::InvalidParams { .. })
    ));
    assert!(matches!(
        MembershipFunction::new(MfFamily::Gaussian, vec![0.0, 1.0]),
        Err(FuzzyError::InvalidParams { .. })
    ));
    assert!(matches!(
        MembershipFunction::new(MfFamily::Gaussian, vec![-0.5, 1.0]),
        Err(FuzzyError::InvalidParams { .. })
    ));
    assert!(matches!(
        MembershipFunction::new(MfFamily::GeneralizedBell, vec![1.0, 0.0, 0.5]),
        Err(FuzzyError::InvalidParams { .. })
    ));
    assert!(matches!(
        MembershipFunction::new(MfFamily::Gaussian, vec![f64::NAN, 1.0]),
        Err(FuzzyError::InvalidParams { .. })
    ));
}

fn two_input_fis() -> FuzzyInferenceSystem {
    let v1 = FuzzyVariable::new(
        "x1",
        0.0,
        10.0,
        vec![
            mf(MfFamily::Gaussian, &[2.0, 0.0]),
            mf(MfFamily::Gaussian, &[2.0, 10.0]),
        ],
    )
    .unwrap();
    let v2 = FuzzyVariable::new(
        "x2",
        -1.0,
        1.0,
        vec![
            mf(MfFamily::Gaussian, &[0.5, -1.0]),
            mf(MfFamily::Gaussian, &[0.5, 1.0]),
        ],
    )
    .unwrap();
    let rules = vec![
        Rule::new(vec![0, 0], vec![1.0, 0.0, 0.0]),
        Rule::new(vec![0, 1], vec![0.0, 1.0, 0.5]),
        Rule::new(vec![1, 0], vec![-1.0, 2.0, 1.0]),
        Rule::new(vec![1, 1], vec![0.5, 0.5, -0.25]),
    ];
    FuzzyInferenceSystem::new(vec![v1, v2], "u", rules).unwrap()
}

#[test]
fn single_rule_system_reproduces_its_consequent() {
    let v = FuzzyVariable::new("x", 0.0, 1.0, vec![mf(MfFamily::Gaussian, &[0.3, 0.5])]).unwrap();
    let fis =
        FuzzyInferenceSystem::new(vec![v], "y", vec![Rule::new(vec![0], vec![2.0, -1.0])]).unwrap();
    // Normalization makes the single rule's weight irrelevant.
    assert_close(fis.infer(&[0.25]).unwrap(), 2.0 * 0.25 - 1.0, 1e-15);
    assert_close(fis.infer(&[0.9]).unwrap(), 0.8, 1e-15);
}

#[test]
fn inference_matches_exact_rational_weighted_average() {
    // Recomputes the aggregation step in arbitrary precision from the same
    // f64 strengths and rule outputs.
    let fis = two_input_fis();
    let points = [[0.0, 0.0], [3.3, 0.1], [7.2, -0.9], [10.0, 1.0], [5.0, 0.4]];
    for x in points {
        let detail = fis.infer_detail(&x).unwrap();
        let mut num = BigRational::from_integer(BigInt::from(0));
        let mut den = BigRational::from_integer(BigInt::from(0));
        for (w, f) in detail.strengths.iter().zip(&detail.rule_outputs) {
            let w = BigRational::from_float(*w).unwrap();
            let f = BigRational::from_float(*f).unwrap();
            num += &w * &f;
            den += w;
        }
        let exact = (num / den).to_f64().unwrap();
        assert_close(detail.output, exact, 1e-12 * exact.abs().max(1.0));
    }
}

#[test]
fn inference_clamps_inputs_to_universe() {
    let fis = two_input_fis();
    let inside = fis.infer(&[10.0, 1.0]).unwrap();
    let outside = fis.infer(&[25.0, 4.0]).unwrap();
    assert_eq!(inside, outside);
}

#[test]
fn no_rule_fires_is_reported() {
    let v = FuzzyVariable::new(
        "x",
        0.0,
        1.0,
        vec![
            mf(MfFamily::Triangular, &[0.0, 0.0, 0.2]),
            mf(MfFamily::Triangular, &[0.8, 1.0, 1.0]),
        ],
    )
    .unwrap();
    let rules = vec![
        Rule::new(vec![0], vec![1.0, 0.0]),
        Rule::new(vec![1], vec![0.0, 1.0]),
    ];
    let fis = FuzzyInferenceSystem::new(vec![v], "y", rules).unwrap();
    assert!(matches!(fis.infer(&[0.5]), Err(FuzzyError::NoRuleFires)));
    assert!(fis.infer(&[0.1]).is_ok());
}

#[test]
fn construction_rejects_inconsistent_rule_bases() {
    let var = || {
        FuzzyVariable::new(
            "x",
            0.0,
            1.0,
            vec![
                mf(MfFamily::Gaussian, &[0.3, 0.0]),
                mf(MfFamily::Gaussian, &[0.3, 1.0]),
            ],
        )
        .unwrap()
    };
    let dup = FuzzyInferenceSystem::new(
        vec![var()],
        "y",
        vec![
            Rule::new(vec![0], vec![0.0, 0.0]),
            Rule::new(vec![0], vec![1.0, 1.0]),
        ],
    );
    assert!(matches!(dup, Err(FuzzyError::DuplicateAntecedent { .. })));
    let oob = FuzzyInferenceSystem::new(vec![var()], "y", vec![Rule::new(vec![2], vec![0.0, 0.0])]);
    assert!(matches!(oob, Err(FuzzyError::MfIndexOutOfRange { .. })));
    let short = FuzzyInferenceSystem::new(vec![var()], "y", vec![Rule::new(vec![0], vec![0.0])]);
    assert!(matches!(short, Err(FuzzyError::ConsequentLength { .. })));
    let nan = FuzzyInferenceSystem::new(
        vec![var()],
        "y",
        vec![Rule::new(vec![0], vec![f64::NAN, 0.0])],
    );
    assert!(matches!(nan, Err(FuzzyError::NonFiniteConsequent(_))));
    let empty = FuzzyInferenceSystem::new(vec![var()], "y", vec![]);
    assert!(matches!(empty, Err(FuzzyError::EmptyRules)));
}

#[test]
fn dimension_and_finiteness_checks() {
    let fis = two_input_fis();
    assert!(matches!(
        fis.infer(&[1.0]),
        Err(FuzzyError::DimensionMismatch { .. })
    ));
    assert!(matches!(
        fis.infer(&[1.0, f64::NAN]),
        Err(FuzzyError::NonFiniteInput)
    ));
}

#[test]
fn grid_enumerates_every_combination_last_index_fastest() {
    let v1 = FuzzyVariable::new(
        "a",
        0.0,
        1.0,
        grid_partition(MfFamily::Gaussian, 0.0, 1.0, 3).unwrap(),
    )
    .unwrap();
    let v2 = FuzzyVariable::new(
        "b",
        0.0,
        1.0,
        grid_partition(MfFamily::Gaussian, 0.0, 1.0, 2).unwrap(),
    )
    .unwrap();
    let fis = FuzzyInferenceSystem::grid(vec![v1, v2], "y").unwrap();
    assert!(fis.is_grid_complete());
    let ants: Vec<&[usize]> = fis.rules().iter().map(|r| r.antecedent.as_slice()).collect();
    assert_eq!(
        ants,
        [
            &[0, 0][..],
            &[0, 1][..],
            &[1, 0][..],
            &[1, 1][..],
            &[2, 0][..],
            &[2, 1][..],
        ]
    );
}

#[test]
fn grid_partition_neighbors_cross_at_half_for_gaussian() {
    let mfs = grid_partition(MfFamily::Gaussian, 0.0, 10.0, 3).unwrap();
    let step = 5.0;
    for pair in mfs.windows(2) {
        let c = pair[0].params()[1];
        let x = c + 0.5 * step;
        assert_close(pair[0].eval(x), 0.5, 1e-12);
        assert_close(pair[1].eval(x), 0.5, 1e-12);
    }
}

#[test]
fn grid_partition_covers_the_universe_for_every_family() {
    for family in ALL_FAMILIES {
        for count in [1usize, 2, 3, 5] {
            let mfs = grid_partition(family, -2.0, 3.0, count).unwrap();
            assert_eq!(mfs.len(), count);
            for i in 0..=200 {
                let x = -2.0 + 5.0 * i as f64 / 200.0;
                let best = mfs.iter().map(|m| m.eval(x)).fold(0.0f64, f64::max);
                assert!(
                    best > 1e-6,
                    "{family} count={count}: uncovered x={x} (max membership {best})"
                );
            }
        }
    }
}

#[test]
fn serialization_round_trips_byte_identically() {
    let fis = two_input_fis();
    let text = to_text(&fis);
    let reparsed = from_text(&text).unwrap();
    assert_eq!(to_text(&reparsed), text);
    assert_eq!(reparsed, fis);
}

#[test]
fn serialization_round_trips_awkward_floats() {
    let v = FuzzyVariable::new(
        "x",
        -1e-9,
        1e22,
        vec![mf(MfFamily::Gaussian, &[0.1 + 0.2, 1.0 / 3.0])],
    )
    .unwrap();
    let fis = FuzzyInferenceSystem::new(
        vec![v],
        "y",
        vec![Rule::new(vec![0], vec![f64::MIN_POSITIVE, -2.2250738585072014e-308])],
    )
    .unwrap();
    let text = to_text(&fis);
    let reparsed = from_text(&text).unwrap();
    assert_eq!(to_text(&reparsed), text);
    assert_eq!(reparsed, fis);
}

#[test]
fn parse_accepts_comments_blank_lines_and_aliases() {
    let text = "\
# follower controller
version 1

output u
input x 0 1   # universe
mf gaussmf 0.3 0.5
mf gaussian 0.3 0.9
rule 0 -> 1 0
rule 1 -> 0 1
";
    let fis = from_text(text).unwrap();
    assert_eq!(fis.inputs()[0].mfs().len(), 2);
    assert_eq!(fis.inputs()[0].mfs()[0].family(), MfFamily::Gaussian);
}

#[test]
fn parse_errors_carry_line_numbers() {
    let missing_version = "output u\n";
    assert!(matches!(
        from_text(missing_version),
        Err(ParseError::Syntax { line: 1, .. })
    ));

    let bad_number = "version 1\noutput u\ninput x 0 oops\n";
    match from_text(bad_number) {
        Err(ParseError::Syntax { line, message }) => {
            assert_eq!(line, 3);
            assert!(message.contains("oops"), "{message}");
        }
        other => panic!("expected syntax error, got {other:?}"),
    }

    let orphan_mf = "version 1\noutput u\nmf gaussian 1 0\n";
    assert!(matches!(
        from_text(orphan_mf),
        Err(ParseError::Syntax { line: 3, .. })
    ));

    let bad_sigma = "version 1\noutput u\ninput x 0 1\nmf gaussian -1 0\nrule 0 -> 0 0\n";
    assert!(matches!(
        from_text(bad_sigma),
        Err(ParseError::Semantic { line: 4, .. })
    ));

    let unknown = "version 1\nfrobnicate\n";
    assert!(matches!(
        from_text(unknown),
        Err(ParseError::Syntax { line: 2, .. })
    ));

    assert!(matches!(from_text(""), Err(ParseError::Empty)));
    assert!(matches!(from_text("   \n# only comments\n"), Err(ParseError::Empty)));
}

#[test]
fn parse_rejects_missing_arrow_and_bad_indices() {
    let no_arrow = "version 1\noutput u\ninput x 0 1\nmf gaussian 1 0.5\nrule 0 0 0\n";
    assert!(matches!(
        from_text(no_arrow),
        Err(ParseError::Syntax { line: 5, .. })
    ));
    let bad_index = "version 1\noutput u\ninput x 0 1\nmf gaussian 1 0.5\nrule 3 -> 0 0\n";
    assert!(matches!(
        from_text(bad_index),
        Err(ParseError::Invalid(FuzzyError::MfIndexOutOfRange { .. }))
    ));
}

use crate::synth::random_grid_fis;

#[test]
fn grid_systems_keep_output_within_consequent_envelope() {
    for seed in 0..40u64 {
        let family = ALL_FAMILIES[seed as usize % 8];
        let (fis, mut rng) = random_grid_fis(seed, family);
        for _ in 0..25 {
            let x: Vec<f64> = fis
                .inputs()
                .iter()
                .map(|v| {
                    let (lo, hi) = v.universe();
                    rng.gen_range(lo..=hi)
                })
                .collect();
            let detail = fis.infer_detail(&x).unwrap();
            let active: Vec<f64> = detail
                .strengths
                .iter()
                .zip(&detail.rule_outputs)
                .filter(|(w, _)| **w > 0.0)
                .map(|(_, f)| *f)
                .collect();
            let lo = active.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = active.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let slack = 1e-9 * hi.abs().max(lo.abs()).max(1.0);
            assert!(
                detail.output >= lo - slack && detail.output <= hi + slack,
                "seed {seed}: output {} outside [{lo}, {hi}]",
                detail.output
            );
            let norm = fis.normalized_strengths(&fis.clamp_input(&x)).unwrap();
            let sum: f64 = norm.iter().sum();
            assert_close(sum, 1.0, 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn triangular_membership_always_unit_interval(
        a in -100.0f64..100.0,
        da in 0.0f64..50.0,
        db in 0.0f64..50.0,
        x in -300.0f64..300.0,
    ) {
        let tri = mf(MfFamily::Triangular, &[a, a + da, a + da + db]);
        let y = tri.eval(x);
        prop_assert!(y.is_finite());
        prop_assert!((0.0..=1.0).contains(&y));
    }

    #[test]
    fn format_survives_random_gaussian_systems(seed in 0u64..500) {
        let (fis, _) = random_grid_fis(seed, MfFamily::Gaussian);
        let text = to_text(&fis);
        let reparsed = from_text(&text).unwrap();
        prop_assert_eq!(to_text(&reparsed), text);
    }
}
