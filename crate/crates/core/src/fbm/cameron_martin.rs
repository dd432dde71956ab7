use super::kernel::{derivative_operator, kernel_operator};
use super::sampler::check_hurst;
use crate::error::{Error, Result};
use crate::fraccalc::{Grid, GridPath, MaskedPath};

/// A pair of control densities `(u̇, v')` on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Control {
    du: GridPath,
    vprime: Option<GridPath>,
    ball: Option<f64>,
}

impl Control {
    pub fn new(du: GridPath, vprime: Option<GridPath>) -> Result<Self> {
        if let Some(v) = &vprime {
            du.ensure_same_grid(v)?;
        }
        Ok(Self { du, vprime, ball: None })
    }

    /// Attaches a ball bound `N`; fails if `½‖(u̇, v')‖² > N`.
    pub fn with_ball(mut self, bound: f64) -> Result<Self> {
        let energy = 0.5 * cm_norm_sq(&self);
        if !(bound >= 0.0) || energy > bound * (1.0 + 1e-12) {
            return Err(Error::domain(format!("control energy {energy} exceeds ball bound {bound}")));
        }
        self.ball = Some(bound);
        Ok(self)
    }

    pub fn zero(grid: Grid, d1: usize, d2: usize) -> Self {
        let vprime = (d2 > 0).then(|| GridPath::zeros(grid, d2));
        Self { du: GridPath::zeros(grid, d1), vprime, ball: None }
    }

    pub fn grid(&self) -> &Grid {
        self.du.grid()
    }

    pub fn du(&self) -> &GridPath {
        &self.du
    }

    pub fn vprime(&self) -> Option<&GridPath> {
        self.vprime.as_ref()
    }

    pub fn ball(&self) -> Option<f64> {
        self.ball
    }
}

/// Trapezoid rule for `∫_0^T |f|² dt`.
pub fn l2_norm_sq(path: &GridPath) -> f64 {
    let n = path.grid().n_nodes();
    let h = path.grid().step();
    let sq = |i: usize| path.at(i).iter().map(|v| v * v).sum::<f64>();
    let inner: f64 = (1..n - 1).map(sq).sum();
    h * (inner + 0.5 * (sq(0) + sq(n - 1)))
}

/// `‖u̇‖²_{L²} + ‖v'‖²_{L²}`.
pub fn cm_norm_sq(c: &Control) -> f64 {
    l2_norm_sq(&c.du) + c.vprime.as_ref().map_or(0.0, l2_norm_sq)
}

/// `u(t_i) = ∫_0^{t_i} K_H(t_i, s) u̇(s) ds` for piecewise-linear `u̇`.
pub fn cameron_martin_map(du: &GridPath, hurst: f64) -> Result<GridPath> {
    check_hurst(hurst)?;
    let op = kernel_operator(du.grid(), hurst);
    Ok(GridPath::from_raw(*du.grid(), du.dim(), op.apply(du.dim(), du.values())))
}

/// Time derivative of `cameron_martin_map(du)`; undefined (and zero) at `t = 0`.
pub fn control_time_derivative(du: &GridPath, hurst: f64) -> Result<MaskedPath> {
    check_hurst(hurst)?;
    let op = derivative_operator(du.grid(), hurst);
    let path = GridPath::from_raw(*du.grid(), du.dim(), op.apply(du.dim(), du.values()));
    let mut defined = vec![true; du.grid().n_nodes()];
    defined[0] = false;
    Ok(MaskedPath { path, defined })
}
