use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fbm::kernel_operator;
use crate::fraccalc::Grid;

/// Minimal energy `½ θᵀWθ` subject to `u(T) = (Mθ)_T = level`, where `M`
/// is the discretized Cameron-Martin map and `W` the trapezoid weights;
/// solved as a dense KKT system. This is the discrete rate of reaching
/// `x0 + level` when the averaged drift vanishes and `σ1 = 1`.
pub fn linear_endpoint_oracle(grid: &Grid, hurst: f64, level: f64) -> Result<f64> {
    let op = kernel_operator(grid, hurst);
    let n = grid.n_nodes();
    let h = grid.step();
    let row = op.hat_row(n - 1);
    let mut kkt = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        kkt[(i, i)] = if i == 0 || i + 1 == n { 0.5 * h } else { h };
        kkt[(i, n)] = row[i];
        kkt[(n, i)] = row[i];
    }
    let mut rhs = DVector::zeros(n + 1);
    rhs[n] = level;
    let sol = kkt.clone().lu().solve(&rhs).ok_or_else(|| Error::IllConditioned("singular KKT system".into()))?;
    let energy = (0..n).map(|i| 0.5 * kkt[(i, i)] * sol[i] * sol[i]).sum();
    Ok(energy)
}
