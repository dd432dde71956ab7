use statrs::function::gamma::gamma;

use super::check_order;
use super::path::{euclid, Grid, GridPath};
use super::weights::CellWeights;
use crate::error::{Error, Result};
use crate::par;

fn dist(f: &GridPath, i: usize, j: usize) -> f64 {
    f.at(i).iter().zip(f.at(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// `∫_0^{t_i} |f(t_i) - f(s)| / (t_i - s)^{alpha + 1} ds` at every node.
fn left_singular_abs(f: &GridPath, alpha: f64) -> Vec<f64> {
    let grid = f.grid();
    let n = grid.n_steps();
    let w = CellWeights::new(-alpha - 1.0, n);
    let hpow = grid.step().powf(-alpha);
    par::map_indexed(n + 1, |i| {
        if i == 0 {
            return 0.0;
        }
        let mut s = dist(f, i, i - 1) / (1.0 - alpha);
        for j in 0..i - 1 {
            let a = i - j - 1;
            s += w.near[a] * dist(f, i, j + 1) + w.far[a] * dist(f, i, j);
        }
        hpow * s
    })
}

/// `‖f‖_{α,1} = ∫ |f(s)| s^{-α} ds + ∫∫_{y<s} |f(s) - f(y)| (s - y)^{-α-1} dy ds`.
pub fn norm_alpha_1(f: &GridPath, alpha: f64) -> Result<f64> {
    check_order(alpha)?;
    let grid = f.grid();
    let n = grid.n_steps();
    let h = grid.step();
    let w = CellWeights::new(-alpha, n);
    let abs: Vec<f64> = (0..=n).map(|i| euclid(f.at(i))).collect();
    let first: f64 = (0..n).map(|j| w.near[j] * abs[j] + w.far[j] * abs[j + 1]).sum::<f64>() * h.powf(1.0 - alpha);
    let inner = left_singular_abs(f, alpha);
    let second = trapezoid(grid, &inner);
    Ok(first + second)
}

/// `‖f‖_{α,∞} = sup_t ( |f(t)| + ∫_0^t |f(t) - f(s)| (t - s)^{-α-1} ds )`.
pub fn norm_alpha_infty(f: &GridPath, alpha: f64) -> Result<f64> {
    check_order(alpha)?;
    let inner = left_singular_abs(f, alpha);
    Ok(inner.iter().enumerate().map(|(i, s)| euclid(f.at(i)) + s).fold(0.0, f64::max))
}

/// `‖g‖_{1-α,∞,T}`: sup over node pairs `s < t` of
/// `|g(t) - g(s)| / (t - s)^{1-α} + ∫_s^t |g(y) - g(s)| / (y - s)^{2-α} dy`.
pub fn norm_1malpha_infty(g: &GridPath, alpha: f64) -> Result<f64> {
    norm_1malpha_infty_strided(g, alpha, 1)
}

/// As [`norm_1malpha_infty`] with the left point `s` restricted to every
/// `stride`-th node. `stride = 1` is exact.
pub fn norm_1malpha_infty_strided(g: &GridPath, alpha: f64, stride: usize) -> Result<f64> {
    check_order(alpha)?;
    if stride == 0 {
        return Err(Error::usage("stride must be positive"));
    }
    let grid = g.grid();
    let n = grid.n_steps();
    let h = grid.step();
    let w = CellWeights::new(alpha - 2.0, n);
    let hpow = h.powf(alpha - 1.0);
    let starts: Vec<usize> = (0..n).step_by(stride).collect();
    let sups = par::map_indexed(starts.len(), |k| {
        let j = starts[k];
        let mut integral = 0.0;
        let mut best: f64 = 0.0;
        for i in j + 1..=n {
            let a = i - j - 1;
            integral += if a == 0 {
                dist(g, j + 1, j) / alpha
            } else {
                w.near[a] * dist(g, i - 1, j) + w.far[a] * dist(g, i, j)
            } * hpow;
            let d = grid.node(i) - grid.node(j);
            best = best.max(dist(g, i, j) / d.powf(1.0 - alpha) + integral);
        }
        best
    });
    Ok(sups.into_iter().fold(0.0, f64::max))
}

/// `Λ_α(g)` through its bound `‖g‖_{1-α,∞,T} / (Γ(1-α) Γ(α))`.
pub fn lambda_alpha(g: &GridPath, alpha: f64) -> Result<f64> {
    Ok(norm_1malpha_infty(g, alpha)? / (gamma(1.0 - alpha) * gamma(alpha)))
}

/// Discrete Hölder seminorm `max_{i<j} |f_j - f_i| / (t_j - t_i)^alpha`.
pub fn holder_seminorm(f: &GridPath, alpha: f64) -> f64 {
    let grid = f.grid();
    let n = grid.n_steps();
    par::map_indexed(n, |i| {
        (i + 1..=n).map(|j| dist(f, j, i) / (grid.node(j) - grid.node(i)).powf(alpha)).fold(0.0, f64::max)
    })
    .into_iter()
    .fold(0.0, f64::max)
}

fn trapezoid(grid: &Grid, v: &[f64]) -> f64 {
    let n = v.len() - 1;
    let inner: f64 = v[1..n].iter().sum();
    grid.step() * (inner + 0.5 * (v[0] + v[n]))
}
