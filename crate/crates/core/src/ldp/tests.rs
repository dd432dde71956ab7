use super::*;
use crate::fbm::{cameron_martin_map, Control};
use crate::multiscale::{build_system, solve_averaged, solve_skeleton, SystemParams};

fn linear(fast: bool) -> SystemSpec {
    let mut p = SystemParams::new();
    p.insert("fast_channel".into(), if fast { 1.0 } else { 0.0 });
    build_system("linear", &p).unwrap()
}

fn endpoint_problem(hurst: f64, level: f64, n: usize) -> RateProblem {
    let spec = linear(false);
    let drift = AveragedDrift::closed_form(&spec).unwrap();
    let z = vec![spec.x0[0] + level];
    RateProblem::new(spec, drift, hurst, Constraint::HitEndpoint(z), Grid::new(1.0, n).unwrap()).unwrap()
}

#[test]
fn averaged_endpoint_costs_nothing() {
    let spec = build_system("ou_sin", &SystemParams::new()).unwrap();
    let drift = AveragedDrift::closed_form(&spec).unwrap();
    let grid = Grid::new(1.0, 64).unwrap();
    let xbar = solve_averaged(&drift, &spec.x0, &grid).unwrap();
    let problem = RateProblem::new(spec, drift, 0.7, Constraint::HitEndpoint(xbar.last().to_vec()), grid).unwrap();
    let r = minimize_rate_endpoint(&problem, &RateOptions::default()).unwrap();
    assert!(r.energy <= 1e-6 && r.energy >= 0.0, "{}", r.energy);
}

#[test]
fn linear_endpoint_matches_reproducing_kernel_value() {
    let r = minimize_rate_endpoint(&endpoint_problem(0.7, 1.0, 128), &RateOptions::default()).unwrap();
    assert!(r.converged);
    assert!((r.energy - 0.5).abs() < 0.01, "{}", r.energy);
    let doubled = minimize_rate_endpoint(&endpoint_problem(0.7, 2.0, 128), &RateOptions::default()).unwrap();
    assert!((doubled.energy / r.energy - 4.0).abs() < 0.01);
}

#[test]
fn minimizer_agrees_with_dense_oracle() {
    for &h in &[0.6, 0.9] {
        let grid = Grid::new(1.0, 64).unwrap();
        let oracle = linear_endpoint_oracle(&grid, h, 1.0).unwrap();
        let r = minimize_rate_endpoint(&endpoint_problem(h, 1.0, 64), &RateOptions::default()).unwrap();
        assert!((r.energy / oracle - 1.0).abs() < 0.02, "H={h}: {} vs {oracle}", r.energy);
    }
}

#[test]
fn discrete_rate_converges_from_above() {
    // piecewise-linear densities resolve the s^{1/2-H} singularity of the
    // optimal control at rate h^{2-2H}, slowly for H near one
    let at = |h: f64, n: usize| linear_endpoint_oracle(&Grid::new(1.0, n).unwrap(), h, 1.0).unwrap();
    assert!((at(0.6, 64) - 0.5).abs() < 1e-3);
    let seq: Vec<f64> = [32, 64, 128, 256].iter().map(|&n| at(0.9, n)).collect();
    assert!(seq.windows(2).all(|w| w[1] < w[0] && w[1] > 0.5), "{seq:?}");
}

#[test]
fn adjoint_gradient_matches_finite_differences() {
    let spec = build_system("double_well_bounded", &SystemParams::new()).unwrap();
    let drift = AveragedDrift::closed_form(&spec).unwrap();
    let grid = Grid::new(1.0, 16).unwrap();
    let target = GridPath::scalar(grid, |t| -0.5 + 0.3 * t * t).unwrap();
    for constraint in [
        Constraint::HitEndpoint(vec![0.4]),
        Constraint::EnterSet { a: vec![1.0], b: 0.8 },
        Constraint::MatchPath { target, tol: 1e-3 },
    ] {
        let problem = RateProblem::new(spec.clone(), drift.clone(), 0.7, constraint, grid).unwrap();
        let mut obj = Objective::new(&problem, false);
        obj.mu = 7.0;
        let phi: Vec<f64> = (0..obj.dim()).map(|k| 0.3 * (k as f64 * 0.9).sin()).collect();
        let (fa, ga) = obj.value_and_grad(&phi, GradientMode::Adjoint).unwrap();
        let (ff, gf) = obj.value_and_grad(&phi, GradientMode::FiniteDifference).unwrap();
        assert_eq!(fa, ff);
        for (a, f) in ga.iter().zip(&gf) {
            assert!((a - f).abs() < 1e-6 * (1.0 + f.abs()), "{a} vs {f}");
        }
    }
}

#[test]
fn finite_difference_mode_reaches_same_energy() {
    let opts = RateOptions { gradient: GradientMode::FiniteDifference, ..RateOptions::default() };
    let a = minimize_rate_endpoint(&endpoint_problem(0.7, 1.0, 16), &opts).unwrap();
    let b = minimize_rate_endpoint(&endpoint_problem(0.7, 1.0, 16), &RateOptions::default()).unwrap();
    assert!((a.energy - b.energy).abs() < 1e-6 * b.energy);
}

#[test]
fn joint_optimization_drops_fast_control() {
    let spec = linear(true);
    let drift = AveragedDrift::zero(1);
    let z = vec![spec.x0[0] + 1.0];
    let problem = RateProblem::new(spec, drift, 0.7, Constraint::HitEndpoint(z), Grid::new(1.0, 64).unwrap()).unwrap();
    let opts = RateOptions { joint_v: true, ..RateOptions::default() };
    let joint = minimize_rate(&problem, &opts).unwrap();
    let plain = minimize_rate(&problem, &RateOptions::default()).unwrap();
    let v = joint.vprime_star.unwrap();
    assert!(crate::fbm::l2_norm_sq(&v).sqrt() < 1e-8);
    assert!((joint.energy - plain.energy).abs() < 1e-8);
}

#[test]
fn ball_restriction_keeps_interior_minimizer() {
    let free = minimize_rate_endpoint(&endpoint_problem(0.7, 1.0, 64), &RateOptions::default()).unwrap();
    let m = free.energy + 0.1;
    let n = 64.0;
    let restricted = endpoint_problem(0.7, 1.0, 64).with_ball(m + 1.0 / n).unwrap();
    let r = minimize_rate_endpoint(&restricted, &RateOptions::default()).unwrap();
    assert!((r.energy - free.energy).abs() < 1e-9);
}

#[test]
fn forced_control_of_averaged_path_is_free() {
    let spec = build_system("ou_sin", &SystemParams::new()).unwrap();
    let drift = AveragedDrift::closed_form(&spec).unwrap();
    let grid = Grid::new(1.0, 128).unwrap();
    let target = solve_averaged(&drift, &spec.x0, &grid).unwrap();
    let problem = RateProblem::new(spec, drift, 0.7, Constraint::MatchPath { target, tol: 1e-3 }, grid).unwrap();
    let r = forced_control_for_path(&problem, &ForcedOptions::default()).unwrap();
    assert!(r.energy < 1e-6, "{}", r.energy);
    assert!(r.converged);
}

#[test]
fn forced_control_round_trip() {
    let spec = linear(false);
    let drift = AveragedDrift::closed_form(&spec).unwrap();
    let grid = Grid::new(1.0, 256).unwrap();
    let du0 = GridPath::scalar(grid, |t| 1.0 + 0.5 * (2.0 * t).cos()).unwrap();
    let target = cameron_martin_map(&du0, 0.7).unwrap();
    let problem = RateProblem::new(spec, drift, 0.7, Constraint::MatchPath { target, tol: 5e-3 }, grid).unwrap();
    let r = forced_control_for_path(&problem, &ForcedOptions::default()).unwrap();
    let want = 0.5 * crate::fbm::l2_norm_sq(&du0);
    assert!((r.energy / want - 1.0).abs() < 0.02, "{} vs {want}", r.energy);
    // pointwise recovery away from the first nodes, where the derivative of u is least resolved
    let err = (16..grid.n_nodes()).map(|i| (r.du_star.at(i)[0] - du0.at(i)[0]).abs()).fold(0.0, f64::max);
    assert!(err < 0.05, "{err}");
    assert!(r.converged, "residual {}", r.constraint_residual);
}

#[test]
fn forced_control_rejects_steep_target() {
    let spec = linear(false);
    let drift = AveragedDrift::closed_form(&spec).unwrap();
    let grid = Grid::new(1.0, 128).unwrap();
    let target = GridPath::scalar(grid, |t| if t > 0.5 { 1.0 } else { 0.0 }).unwrap();
    let problem = RateProblem::new(spec, drift, 0.7, Constraint::MatchPath { target, tol: 1e-3 }, grid).unwrap();
    let err = forced_control_for_path(&problem, &ForcedOptions::default()).unwrap_err();
    assert!(matches!(err, Error::IllConditioned(_)), "{err:?}");
}

#[test]
fn forced_control_matches_minimizer_on_path_target() {
    let spec = build_system("ou_sin", &SystemParams::new()).unwrap();
    let drift = AveragedDrift::closed_form(&spec).unwrap();
    let grid = Grid::new(1.0, 32).unwrap();
    let du0 = GridPath::scalar(grid, |t| 0.8 - t).unwrap();
    let target = solve_skeleton(&spec, &drift, &Control::new(du0, None).unwrap(), 0.7).unwrap();
    let problem = RateProblem::new(spec, drift, 0.7, Constraint::MatchPath { target, tol: 2e-2 }, grid).unwrap();
    let forced = forced_control_for_path(&problem, &ForcedOptions::default()).unwrap();
    let opt = minimize_rate(&problem, &RateOptions::default()).unwrap();
    assert!(opt.energy <= forced.energy * 1.05 + 1e-9, "{} vs {}", opt.energy, forced.energy);
}

#[test]
fn envelope_examples() {
    let spec = linear(false);
    let drift = AveragedDrift::closed_form(&spec).unwrap();
    let grid = Grid::new(1.0, 64).unwrap();
    let x0 = spec.x0[0];
    let set = Constraint::EnterSet { a: vec![1.0], b: x0 + 1.0 };
    let problem = RateProblem::new(spec.clone(), drift.clone(), 0.7, set, grid).unwrap();
    let opts = RateOptions::default();
    let boundary = rate_lower_envelope(&problem, &[vec![x0 + 1.0]], &opts).unwrap();
    assert!((boundary.energy - 0.5).abs() < 0.01);
    let more = rate_lower_envelope(&problem, &[vec![x0 + 1.0], vec![x0 + 1.5], vec![x0 + 3.0]], &opts).unwrap();
    assert!(more.energy >= boundary.energy - 1e-12);
    assert_eq!(more.best, Some(0));
    assert!(rate_lower_envelope(&problem, &[], &opts).is_err());
    assert!(rate_lower_envelope(&problem, &[vec![x0]], &opts).is_err());

    let containing = Constraint::EnterSet { a: vec![1.0], b: x0 - 1.0 };
    let problem = RateProblem::new(spec, drift, 0.7, containing, grid).unwrap();
    assert_eq!(rate_lower_envelope(&problem, &[vec![x0]], &opts).unwrap().energy, 0.0);
}

#[test]
fn nonlinear_endpoint_converges_in_both_gradient_modes() {
    let spec = build_system("ou_sin", &SystemParams::new()).unwrap();
    let drift = AveragedDrift::closed_form(&spec).unwrap();
    let problem =
        RateProblem::new(spec, drift, 0.7, Constraint::HitEndpoint(vec![2.0]), Grid::new(1.0, 32).unwrap()).unwrap();
    let adj = minimize_rate_endpoint(&problem, &RateOptions::default()).unwrap();
    let fd_opts = RateOptions { gradient: GradientMode::FiniteDifference, ..RateOptions::default() };
    let fd = minimize_rate_endpoint(&problem, &fd_opts).unwrap();
    assert!(adj.converged && fd.converged);
    assert!((adj.energy - fd.energy).abs() < 1e-6 * adj.energy);
    let strict = RateOptions { stall_tol: 0.0, ..RateOptions::default() };
    assert!(!minimize_rate_endpoint(&problem, &strict).unwrap().converged);
}
