use mixfbm::fraccalc::Grid;
use mixfbm::ldp::{linear_endpoint_oracle, minimize_rate_endpoint, Constraint, RateOptions, RateProblem};
use mixfbm::multiscale::{build_system, AveragedDrift, SystemParams};
use proptest::prelude::*;

fn problem(system: &str, hurst: f64, target: f64, n: usize) -> RateProblem {
    let mut p = SystemParams::new();
    if system == "linear" {
        p.insert("fast_channel".into(), 0.0);
    }
    let spec = build_system(system, &p).unwrap();
    let drift = AveragedDrift::closed_form(&spec).unwrap();
    RateProblem::new(spec, drift, hurst, Constraint::HitEndpoint(vec![target]), Grid::new(1.0, n).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn energies_are_nonnegative(
        system in prop::sample::select(vec!["linear", "ou_sin", "double_well_bounded"]),
        hurst in 0.55f64..0.95,
        target in -1.5f64..2.5,
    ) {
        let r = minimize_rate_endpoint(&problem(system, hurst, target, 16), &RateOptions::default()).unwrap();
        prop_assert!(r.energy >= 0.0 && r.energy.is_finite());
    }
}

#[test]
fn minimizer_matches_dense_oracle() {
    let grid = Grid::new(1.0, 64).unwrap();
    for hurst in [0.6, 0.7, 0.9] {
        for level in [0.5, 1.0, 2.0] {
            let oracle = linear_endpoint_oracle(&grid, hurst, level).unwrap();
            let r = minimize_rate_endpoint(&problem("linear", hurst, level, 64), &RateOptions::default()).unwrap();
            assert!(r.converged);
            assert!((r.energy / oracle - 1.0).abs() < 0.02, "H {hurst}, z {level}: {} vs {oracle}", r.energy);
        }
    }
}

#[test]
fn energy_is_stable_under_refinement() {
    let coarse = minimize_rate_endpoint(&problem("linear", 0.7, 1.0, 256), &RateOptions::default()).unwrap();
    let fine = minimize_rate_endpoint(&problem("linear", 0.7, 1.0, 512), &RateOptions::default()).unwrap();
    assert!((coarse.energy / fine.energy - 1.0).abs() < 0.01, "{} vs {}", coarse.energy, fine.energy);
}
