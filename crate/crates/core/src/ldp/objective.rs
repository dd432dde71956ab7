//! Penalized energy of a control and its gradient through the discrete skeleton.

use std::sync::Arc;

use super::{Constraint, GradientMode, RateProblem};
use crate::error::Result;
use crate::fbm::{derivative_operator, NodeOperator};
use crate::fraccalc::GridPath;
use crate::multiscale::ode::{rk4, SkeletonField};

/// Optimization variable `φ = W^{1/2} θ`, where `θ` holds the nodal control
/// densities and `W` the trapezoid weights, so the energy is `½|φ|²`.
pub(crate) struct Objective<'a> {
    pub problem: &'a RateProblem,
    dop: Arc<NodeOperator>,
    sqrt_w: Vec<f64>,
    pub n_u: usize,
    pub n_v: usize,
    pub mu: f64,
}

pub(crate) struct Evaluation {
    pub path: GridPath,
    pub residual: f64,
}

impl<'a> Objective<'a> {
    pub fn new(problem: &'a RateProblem, joint_v: bool) -> Self {
        let grid = problem.grid;
        let h = grid.step();
        let n = grid.n_nodes();
        let sqrt_w = (0..n).map(|i| if i == 0 || i + 1 == n { (0.5 * h).sqrt() } else { h.sqrt() }).collect();
        let dims = problem.spec.dims;
        let n_v = if joint_v { n * dims.d2 } else { 0 };
        Self { problem, dop: derivative_operator(&grid, problem.hurst), sqrt_w, n_u: n * dims.d1, n_v, mu: 1.0 }
    }

    pub fn dim(&self) -> usize {
        self.n_u + self.n_v
    }

    /// Node densities `θ` of one block of `φ`.
    pub fn densities(&self, phi: &[f64], dim: usize) -> Vec<f64> {
        phi.iter().enumerate().map(|(k, v)| v / self.sqrt_w[k / dim]).collect()
    }

    pub fn to_phi(&self, theta: &[f64], dim: usize) -> Vec<f64> {
        theta.iter().enumerate().map(|(k, v)| v * self.sqrt_w[k / dim]).collect()
    }

    pub fn du(&self, phi: &[f64]) -> GridPath {
        let d1 = self.problem.spec.dims.d1;
        GridPath::from_raw(self.problem.grid, d1, self.densities(&phi[..self.n_u], d1))
    }

    pub fn vprime(&self, phi: &[f64]) -> Option<GridPath> {
        let d2 = self.problem.spec.dims.d2;
        (self.n_v > 0).then(|| GridPath::from_raw(self.problem.grid, d2, self.densities(&phi[self.n_u..], d2)))
    }

    fn field(&self) -> SkeletonField<'_> {
        SkeletonField { drift: &self.problem.drift, spec: Some(&self.problem.spec) }
    }

    /// Skeleton path and constraint residual of a control.
    pub fn forward(&self, phi: &[f64]) -> Result<(Evaluation, GridPath)> {
        let d1 = self.problem.spec.dims.d1;
        let theta = self.densities(&phi[..self.n_u], d1);
        let uprime = GridPath::from_raw(self.problem.grid, d1, self.dop.apply(d1, &theta));
        let path = rk4(&self.field(), &self.problem.spec.x0, &self.problem.grid, Some(&uprime))?;
        let residual = self.problem.constraint.residual(&path);
        Ok((Evaluation { path, residual }, uprime))
    }

    fn penalty(&self, path: &GridPath) -> f64 {
        match &self.problem.constraint {
            Constraint::HitEndpoint(z) => path.last().iter().zip(z).map(|(x, z)| (x - z).powi(2)).sum(),
            Constraint::EnterSet { a, b } => {
                let s = b - path.last().iter().zip(a).map(|(x, a)| x * a).sum::<f64>();
                s.max(0.0).powi(2)
            }
            Constraint::MatchPath { target, .. } => (0..path.grid().n_nodes())
                .map(|i| {
                    let w = self.sqrt_w[i].powi(2);
                    w * path.at(i).iter().zip(target.at(i)).map(|(x, t)| (x - t).powi(2)).sum::<f64>()
                })
                .sum(),
        }
    }

    /// `∂penalty/∂x_i`.
    fn penalty_grad(&self, path: &GridPath, i: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let last = path.grid().n_steps();
        match &self.problem.constraint {
            Constraint::HitEndpoint(z) if i == last => {
                out.iter_mut().zip(path.last().iter().zip(z)).for_each(|(o, (x, z))| *o = 2.0 * (x - z));
            }
            Constraint::EnterSet { a, b } if i == last => {
                let s = b - path.last().iter().zip(a).map(|(x, a)| x * a).sum::<f64>();
                if s > 0.0 {
                    out.iter_mut().zip(a).for_each(|(o, a)| *o = -2.0 * s * a);
                }
            }
            Constraint::MatchPath { target, .. } => {
                let w = self.sqrt_w[i].powi(2);
                out.iter_mut().zip(path.at(i).iter().zip(target.at(i))).for_each(|(o, (x, t))| *o = 2.0 * w * (x - t));
            }
            _ => {}
        }
    }

    fn ball_excess(&self, phi: &[f64]) -> f64 {
        match self.problem.ball_bound {
            Some(n) => (0.5 * phi.iter().map(|v| v * v).sum::<f64>() - n).max(0.0),
            None => 0.0,
        }
    }

    pub fn value(&self, phi: &[f64]) -> Result<f64> {
        let (ev, _) = self.forward(phi)?;
        let energy = 0.5 * phi.iter().map(|v| v * v).sum::<f64>();
        Ok(energy + self.mu * (self.penalty(&ev.path) + self.ball_excess(phi).powi(2)))
    }

    pub fn value_and_grad(&self, phi: &[f64], mode: GradientMode) -> Result<(f64, Vec<f64>)> {
        match mode {
            GradientMode::Adjoint => self.adjoint(phi),
            GradientMode::FiniteDifference => {
                let f = self.value(phi)?;
                let mut g = vec![0.0; phi.len()];
                let mut probe = phi.to_vec();
                for k in 0..phi.len() {
                    let step = 1e-6 * phi[k].abs().max(1.0);
                    probe[k] = phi[k] + step;
                    let fp = self.value(&probe)?;
                    probe[k] = phi[k] - step;
                    let fm = self.value(&probe)?;
                    probe[k] = phi[k];
                    g[k] = (fp - fm) / (2.0 * step);
                }
                Ok((f, g))
            }
        }
    }

    fn adjoint(&self, phi: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (ev, uprime) = self.forward(phi)?;
        let path = &ev.path;
        let spec = &self.problem.spec;
        let (m, d1) = (spec.dims.m, spec.dims.d1);
        let grid = self.problem.grid;
        let h = grid.step();
        let field = self.field();

        let mut lambda = vec![0.0; m];
        let mut pg = vec![0.0; m];
        self.penalty_grad(path, grid.n_steps(), &mut pg);
        lambda.iter_mut().zip(&pg).for_each(|(l, p)| *l = self.mu * p);
        let mut g_uprime = vec![0.0; grid.n_nodes() * d1];

        let mut stage = StageBuffers::new(m, d1);
        for j in (0..grid.n_steps()).rev() {
            let (w0, w1) = (uprime.at(j), uprime.at(j + 1));
            let wm: Vec<f64> = w0.iter().zip(w1).map(|(a, b)| 0.5 * (a + b)).collect();
            let (gx, gw0, gwm, gw1) = stage.backprop(&field, spec, path.at(j), w0, &wm, w1, h, &lambda);
            for c in 0..d1 {
                g_uprime[j * d1 + c] += gw0[c] + 0.5 * gwm[c];
                g_uprime[(j + 1) * d1 + c] += gw1[c] + 0.5 * gwm[c];
            }
            lambda = gx;
            self.penalty_grad(path, j, &mut pg);
            lambda.iter_mut().zip(&pg).for_each(|(l, p)| *l += self.mu * p);
        }
        // θ-gradient of the penalty is Dᵀ g_u'; chain to φ divides by √w
        let g_theta = self.dop.apply_transpose(d1, &g_uprime);
        let excess = self.ball_excess(phi);
        let mut grad: Vec<f64> = phi.iter().map(|v| v * (1.0 + 2.0 * self.mu * excess)).collect();
        for (k, g) in g_theta.iter().enumerate() {
            grad[k] += g / self.sqrt_w[k / d1];
        }
        let energy = 0.5 * phi.iter().map(|v| v * v).sum::<f64>();
        let f = energy + self.mu * (self.penalty(path) + excess * excess);
        Ok((f, grad))
    }
}

struct StageBuffers {
    m: usize,
    d1: usize,
}

impl StageBuffers {
    fn new(m: usize, d1: usize) -> Self {
        Self { m, d1 }
    }

    /// Reverse pass through one RK4 step; returns gradients with respect to
    /// the step's start state and its three forcing values.
    #[allow(clippy::too_many_arguments)]
    fn backprop(
        &mut self,
        field: &SkeletonField<'_>,
        spec: &crate::multiscale::SystemSpec,
        x: &[f64],
        w0: &[f64],
        wm: &[f64],
        w1: &[f64],
        h: f64,
        lambda: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let (m, d1) = (self.m, self.d1);
        let axpy = |x: &[f64], a: f64, k: &[f64]| -> Vec<f64> { x.iter().zip(k).map(|(x, k)| x + a * k).collect() };
        let mut k1 = vec![0.0; m];
        field.eval(x, w0, &mut k1);
        let x2 = axpy(x, 0.5 * h, &k1);
        let mut k2 = vec![0.0; m];
        field.eval(&x2, wm, &mut k2);
        let x3 = axpy(x, 0.5 * h, &k2);
        let mut k3 = vec![0.0; m];
        field.eval(&x3, wm, &mut k3);
        let x4 = axpy(x, h, &k3);

        // vector-Jacobian products of F(x, w) = f̄(x) + σ1(x) w
        let vjp_x = |at: &[f64], w: &[f64], v: &[f64]| -> Vec<f64> {
            let jac = field_jacobian(field, at, w);
            (0..m).map(|c| (0..m).map(|r| jac[r * m + c] * v[r]).sum()).collect()
        };
        let vjp_w = |at: &[f64], v: &[f64]| -> Vec<f64> {
            let s = spec.eval_sigma1(at);
            (0..d1).map(|c| (0..m).map(|r| s[r * d1 + c] * v[r]).sum()).collect()
        };

        let gk4: Vec<f64> = lambda.iter().map(|l| h / 6.0 * l).collect();
        let mut gk3: Vec<f64> = lambda.iter().map(|l| h / 3.0 * l).collect();
        let mut gk2 = gk3.clone();
        let mut gk1 = gk4.clone();
        let mut gx = lambda.to_vec();

        let gx4 = vjp_x(&x4, w1, &gk4);
        let gw1 = vjp_w(&x4, &gk4);
        gx.iter_mut().zip(&gx4).for_each(|(g, v)| *g += v);
        gk3.iter_mut().zip(&gx4).for_each(|(g, v)| *g += h * v);

        let gx3 = vjp_x(&x3, wm, &gk3);
        let mut gwm = vjp_w(&x3, &gk3);
        gx.iter_mut().zip(&gx3).for_each(|(g, v)| *g += v);
        gk2.iter_mut().zip(&gx3).for_each(|(g, v)| *g += 0.5 * h * v);

        let gx2 = vjp_x(&x2, wm, &gk2);
        gwm.iter_mut().zip(vjp_w(&x2, &gk2)).for_each(|(g, v)| *g += v);
        gx.iter_mut().zip(&gx2).for_each(|(g, v)| *g += v);
        gk1.iter_mut().zip(&gx2).for_each(|(g, v)| *g += 0.5 * h * v);

        let gx1 = vjp_x(x, w0, &gk1);
        let gw0 = vjp_w(x, &gk1);
        gx.iter_mut().zip(&gx1).for_each(|(g, v)| *g += v);
        (gx, gw0, gwm, gw1)
    }
}

/// Central-difference Jacobian `∂F/∂x`, row-major `m × m`.
fn field_jacobian(field: &SkeletonField<'_>, x: &[f64], w: &[f64]) -> Vec<f64> {
    let m = x.len();
    let mut jac = vec![0.0; m * m];
    let mut probe = x.to_vec();
    let mut fp = vec![0.0; m];
    let mut fm = vec![0.0; m];
    for c in 0..m {
        let step = 1e-6 * x[c].abs().max(1.0);
        probe[c] = x[c] + step;
        field.eval(&probe, w, &mut fp);
        probe[c] = x[c] - step;
        field.eval(&probe, w, &mut fm);
        probe[c] = x[c];
        for r in 0..m {
            jac[r * m + c] = (fp[r] - fm[r]) / (2.0 * step);
        }
    }
    jac
}

impl Constraint {
    /// Distance from satisfying the constraint.
    pub fn residual(&self, path: &GridPath) -> f64 {
        match self {
            Constraint::HitEndpoint(z) => path.last().iter().zip(z).map(|(x, z)| (x - z).powi(2)).sum::<f64>().sqrt(),
            Constraint::EnterSet { a, b } => (b - path.last().iter().zip(a).map(|(x, a)| x * a).sum::<f64>()).max(0.0),
            Constraint::MatchPath { target, .. } => path.sup_distance(target).unwrap_or(f64::INFINITY),
        }
    }
}
