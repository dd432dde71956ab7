//! Rate-function evaluation: minimal Cameron-Martin energy of controls
//! whose skeleton path satisfies a constraint.

mod envelope;
mod forced;
mod lbfgs;
mod objective;
mod oracle;

use serde::{Deserialize, Serialize};

pub use envelope::{rate_lower_envelope, EnvelopeResult};
pub use forced::{forced_control_for_path, ForcedOptions};
pub use oracle::linear_endpoint_oracle;

use crate::error::{Error, Result};
use crate::fbm::check_hurst;
use crate::fraccalc::{Grid, GridPath};
use crate::multiscale::{AveragedDrift, SystemSpec};
use lbfgs::{minimize, LbfgsOptions};
use objective::Objective;

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// Skeleton path within `tol` of `target` at every node.
    MatchPath { target: GridPath, tol: f64 },
    /// `x̃_T = z`.
    HitEndpoint(Vec<f64>),
    /// `a · x̃_T >= b`.
    EnterSet { a: Vec<f64>, b: f64 },
}

#[derive(Debug, Clone)]
pub struct RateProblem {
    pub spec: SystemSpec,
    pub drift: AveragedDrift,
    pub hurst: f64,
    pub constraint: Constraint,
    pub grid: Grid,
    /// Restricts controls to `½‖u̇‖² <= N`.
    pub ball_bound: Option<f64>,
}

impl RateProblem {
    pub fn new(spec: SystemSpec, drift: AveragedDrift, hurst: f64, constraint: Constraint, grid: Grid) -> Result<Self> {
        check_hurst(hurst)?;
        spec.validate()?;
        let m = spec.dims.m;
        if drift.dim() != m {
            return Err(Error::usage("averaged drift dimension differs from the slow dimension"));
        }
        match &constraint {
            Constraint::HitEndpoint(z) if z.len() != m => return Err(Error::usage("endpoint has the wrong dimension")),
            Constraint::EnterSet { a, .. } if a.len() != m => {
                return Err(Error::usage("half-space normal has the wrong dimension"))
            }
            Constraint::EnterSet { a, .. } if a.iter().all(|v| *v == 0.0) => {
                return Err(Error::domain("half-space normal must be nonzero"))
            }
            Constraint::MatchPath { target, tol } => {
                if *target.grid() != grid || target.dim() != m {
                    return Err(Error::usage("target path must live on the problem grid with dim m"));
                }
                if !(*tol > 0.0) {
                    return Err(Error::domain("match tolerance must be positive"));
                }
                let start = target.at(0).iter().zip(&spec.x0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if start > *tol {
                    return Err(Error::domain("target path must start at x0"));
                }
            }
            _ => {}
        }
        Ok(Self { spec, drift, hurst, constraint, grid, ball_bound: None })
    }

    pub fn with_ball(mut self, bound: f64) -> Result<Self> {
        if !(bound > 0.0) {
            return Err(Error::domain("ball bound must be positive"));
        }
        self.ball_bound = Some(bound);
        Ok(self)
    }

    pub(crate) fn with_constraint(&self, constraint: Constraint) -> Self {
        Self { constraint, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    #[default]
    Adjoint,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RateOptions {
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub stages: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
    /// A final stage that stalls is still accepted when
    /// `‖g‖ <= stall_tol * max(1, ‖φ‖)`: with nonlinear coefficients the
    /// gradient is only as accurate as the drift's difference Jacobian.
    pub stall_tol: f64,
    /// Residual accepted for endpoint and set constraints.
    pub constraint_tol: f64,
    pub gradient: GradientMode,
    /// Also optimize a fast-channel density `v'` (started away from zero).
    pub joint_v: bool,
    pub memory: usize,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            initial_penalty: 10.0,
            penalty_growth: 10.0,
            stages: 5,
            max_iter: 500,
            grad_tol: 1e-9,
            stall_tol: 1e-5,
            constraint_tol: 1e-3,
            gradient: GradientMode::Adjoint,
            joint_v: false,
            memory: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateResult {
    /// `½‖u̇*‖²`.
    pub energy: f64,
    pub du_star: GridPath,
    pub vprime_star: Option<GridPath>,
    pub skeleton_path: GridPath,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub constraint_residual: f64,
    pub converged: bool,
}

/// Penalty-continuation L-BFGS minimization of `½‖u̇‖²` subject to the
/// problem's constraint on the skeleton path.
pub fn minimize_rate(problem: &RateProblem, opts: &RateOptions) -> Result<RateResult> {
    if opts.stages == 0 || !(opts.initial_penalty > 0.0) || !(opts.penalty_growth >= 1.0) {
        return Err(Error::domain("penalty schedule needs at least one stage, positive start and growth >= 1"));
    }
    let mut obj = Objective::new(problem, opts.joint_v);
    let mut phi = vec![0.0; obj.dim()];
    if opts.joint_v {
        let ones = vec![1.0; obj.n_v];
        let d2 = problem.spec.dims.d2;
        phi[obj.n_u..].copy_from_slice(&obj.to_phi(&ones, d2));
    }
    let lb = LbfgsOptions { memory: opts.memory, max_iter: opts.max_iter, grad_tol: opts.grad_tol };
    let mut iterations = 0;
    let mut last = None;
    for stage in 0..opts.stages {
        obj.mu = opts.initial_penalty * opts.penalty_growth.powi(stage as i32);
        let out = minimize(|x| obj.value_and_grad(x, opts.gradient), phi.clone(), &lb)?;
        iterations += out.iterations;
        log::debug!(
            "penalty stage {stage}: mu = {:e}, f = {:.6e}, |g| = {:.2e}, {} iterations",
            obj.mu,
            out.f,
            out.grad_norm,
            out.iterations
        );
        // keep the smaller-norm iterate when the objective ties
        let tie = (out.f - obj.value(&phi)?).abs() <= 1e-14 * out.f.abs().max(1e-300);
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        if !(tie && norm(&phi) < norm(&out.x)) {
            phi = out.x.clone();
        }
        last = Some(out);
    }
    let last = last.expect("at least one stage");
    let (ev, _) = obj.forward(&phi)?;
    let tol = match &problem.constraint {
        Constraint::MatchPath { tol, .. } => *tol,
        _ => opts.constraint_tol,
    };
    let phi_norm = phi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let stationary = last.converged || last.grad_norm <= opts.stall_tol * phi_norm.max(1.0);
    let converged = stationary && ev.residual <= tol;
    if !converged {
        log::warn!(
            "rate minimization did not converge: residual {:.3e} (tol {tol:.1e}), |g| = {:.3e}",
            ev.residual,
            last.grad_norm
        );
    }
    let du_star = obj.du(&phi);
    let energy = 0.5 * phi[..obj.n_u].iter().map(|v| v * v).sum::<f64>();
    Ok(RateResult {
        energy,
        vprime_star: obj.vprime(&phi),
        du_star,
        skeleton_path: ev.path,
        iterations,
        gradient_norm: last.grad_norm,
        constraint_residual: ev.residual,
        converged,
    })
}

/// [`minimize_rate`] for an endpoint constraint.
pub fn minimize_rate_endpoint(problem: &RateProblem, opts: &RateOptions) -> Result<RateResult> {
    if !matches!(problem.constraint, Constraint::HitEndpoint(_)) {
        return Err(Error::usage("minimize_rate_endpoint needs an endpoint constraint"));
    }
    minimize_rate(problem, opts)
}

#[cfg(test)]
mod tests;
