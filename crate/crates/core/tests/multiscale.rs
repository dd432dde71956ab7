use mixfbm::fbm::{sample_brownian, sample_fbm, Control, FbmSpec, RngStream, SamplingMethod};
use mixfbm::fraccalc::{Grid, GridPath};
use mixfbm::ldp::{forced_control_for_path, Constraint, ForcedOptions, RateProblem};
use mixfbm::multiscale::{
    build_system, estimate_bar_f1, sample_fast_noise, solve_controlled, solve_frozen_fast,
    solve_frozen_fast_with_noise, solve_slow_fast, AveragedDrift, ErgodicParams, ScaleParams, SystemParams,
};
use proptest::prelude::*;

fn ou() -> mixfbm::multiscale::SystemSpec {
    build_system("ou_sin", &SystemParams::new()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn identical_inputs_give_identical_paths(seed in any::<u64>(), epsilon in 0.1f64..1.0, ratio in 0.05f64..0.5) {
        let spec = build_system("double_well_bounded", &SystemParams::new()).unwrap();
        let scales = ScaleParams::new(epsilon, ratio * epsilon).unwrap();
        let grid = Grid::new(1.0, 32).unwrap();
        let fbm = FbmSpec::new(0.7, 1, grid, SamplingMethod::Cholesky).unwrap();
        let bh = sample_fbm(&fbm, RngStream::new(seed, 0)).unwrap();
        let w = sample_fast_noise(&spec, &grid, &scales, &mut RngStream::new(seed, 1).rng()).unwrap();
        let du = GridPath::scalar(grid, |t| (3.0 * t).sin()).unwrap();
        let ctrl = Control::new(du, None).unwrap();
        let a = solve_controlled(&spec, &scales, 0.7, &ctrl, &bh, w.as_ref()).unwrap();
        let b = solve_controlled(&spec, &scales, 0.7, &ctrl, &bh, w.as_ref()).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn unit_speed_control_shifts_the_noise() {
    // single scale, no fast channel, zero drift: x = x0 + u + B^H with u(t) = t
    let mut p = SystemParams::new();
    p.insert("fast_channel".into(), 0.0);
    p.insert("x0".into(), 0.3);
    let spec = build_system("linear", &p).unwrap();
    let grid = Grid::new(1.0, 256).unwrap();
    let target = GridPath::scalar(grid, |t| 0.3 + t).unwrap();
    let drift = AveragedDrift::closed_form(&spec).unwrap();
    let problem =
        RateProblem::new(spec.clone(), drift, 0.7, Constraint::MatchPath { target, tol: 5e-3 }, grid).unwrap();
    let forced = forced_control_for_path(&problem, &ForcedOptions::default()).unwrap();
    assert!(forced.converged, "residual {}", forced.constraint_residual);

    let scales = ScaleParams::new(1.0, 0.5).unwrap();
    let bh = sample_fbm(&FbmSpec::new(0.7, 1, grid, SamplingMethod::Cholesky).unwrap(), RngStream::new(9, 0)).unwrap();
    let ctrl = Control::new(forced.du_star, None).unwrap();
    let x = solve_controlled(&spec, &scales, 0.7, &ctrl, &bh, None).unwrap().slow;
    let expected = GridPath::scalar(grid, |t| 0.3 + t).unwrap().lincomb(1.0, &bh, 1.0).unwrap();
    let err = x.sup_distance(&expected).unwrap();
    assert!(err <= forced.constraint_residual + 1e-12, "{err}");
}

#[test]
fn frozen_fast_marginal_is_stationary_gaussian() {
    let spec = ou();
    let x = [0.8];
    let grid = Grid::new(10.0, 1000).unwrap();
    let n = 2000;
    let ends: Vec<f64> =
        (0..n).map(|k| solve_frozen_fast(&spec, &x, &grid, RngStream::new(4, k)).unwrap().last()[0]).collect();
    let nf = n as f64;
    let mean = ends.iter().sum::<f64>() / nf;
    let var = ends.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    assert!((mean - x[0]).abs() < 3.0 / nf.sqrt(), "mean {mean}");
    assert!((var - 1.0).abs() < 3.0 * (2.0 / (nf - 1.0)).sqrt(), "variance {var}");
}

#[test]
fn slow_fast_marginal_tracks_the_slow_state() {
    // with δ small the fast variable equilibrates around the current slow state
    let spec = ou();
    let scales = ScaleParams::new(0.5, 1e-3).unwrap();
    let grid = Grid::new(1.0, 64).unwrap();
    let fbm = FbmSpec::new(0.7, 1, grid, SamplingMethod::Cholesky).unwrap();
    let n = 1000;
    let diffs: Vec<f64> = (0..n)
        .map(|k| {
            let bh = sample_fbm(&fbm, RngStream::new(21, 2 * k)).unwrap();
            let w = sample_fast_noise(&spec, &grid, &scales, &mut RngStream::new(21, 2 * k + 1).rng()).unwrap();
            let path = solve_slow_fast(&spec, &scales, &bh, w.as_ref()).unwrap();
            path.fast.unwrap().last()[0] - path.slow.last()[0]
        })
        .collect();
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    assert!(mean.abs() < 3.0 * (var / nf).sqrt(), "mean {mean}");
    assert!((var - 1.0).abs() < 3.0 * (2.0 / (nf - 1.0)).sqrt(), "variance {var}");
}

#[test]
fn shared_noise_contracts_at_the_dissipativity_rate() {
    let spec = ou();
    let grid = Grid::new(5.0, 5000).unwrap();
    let w = sample_brownian(&grid, 1, &mut RngStream::new(8, 0).rng());
    let a = solve_frozen_fast_with_noise(&spec, &[0.2], &[3.0], &w).unwrap();
    let b = solve_frozen_fast_with_noise(&spec, &[0.2], &[-1.0], &w).unwrap();
    let gap = |i: usize| (a.at(i)[0] - b.at(i)[0]).abs();
    let rate = -(gap(5000) / gap(0)).ln() / 5.0;
    // β1 = 2 for the OU system, so |y1 - y2| decays like e^{-β1 t / 2}
    assert!((rate - 1.0).abs() < 0.01, "{rate}");
}

#[test]
fn averaged_drift_estimate_is_periodic() {
    let spec = ou();
    let params = ErgodicParams { horizon: 50.0, replicas: 4, seed: 13, ..ErgodicParams::default() };
    for x in [0.0, 1.0, -2.5] {
        let a = estimate_bar_f1(&spec, &[x], &params).unwrap();
        let b = estimate_bar_f1(&spec, &[x + std::f64::consts::TAU], &params).unwrap();
        let se = a.stderr[0].hypot(b.stderr[0]);
        assert!((a.mean[0] - b.mean[0]).abs() < 3.0 * se, "x {x}: {} vs {}", a.mean[0], b.mean[0]);
    }
}
