//! Discretized Volterra operators on a uniform grid.
//!
//! Both operators act on piecewise-linear densities and have the form
//! `row_scale(t_i) ∫_0^{t_i} s^a (t_i - s)^b q(t_i, s) φ(s) ds`, with `q`
//! smooth. The endpoint powers are integrated exactly by Gauss-Jacobi rules
//! on the first and last cell; interior cells use Gauss-Legendre.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use statrs::function::gamma::gamma;

use super::hypergeometric::{kernel_constant, VolterraKernel};
use crate::fraccalc::weights::JacobiRule;
use crate::fraccalc::Grid;
use crate::par;

/// Dense lower-triangular operator on grid nodes.
#[derive(Debug, Clone)]
pub struct NodeOperator {
    n_nodes: usize,
    /// `hat[i * n_nodes + j]`: weight of the density value at node `j` in row `i`.
    hat: Vec<f64>,
    /// `cell[i * n_nodes + k]`: integral of the row kernel over cell `k`.
    cell: Vec<f64>,
}

impl NodeOperator {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn hat_row(&self, i: usize) -> &[f64] {
        &self.hat[i * self.n_nodes..(i + 1) * self.n_nodes]
    }

    pub fn cell_row(&self, i: usize) -> &[f64] {
        &self.cell[i * self.n_nodes..(i + 1) * self.n_nodes]
    }

    /// Applies the operator to each component of a node-major array.
    pub fn apply(&self, dim: usize, values: &[f64]) -> Vec<f64> {
        debug_assert_eq!(values.len(), self.n_nodes * dim);
        let mut out = vec![0.0; values.len()];
        for i in 0..self.n_nodes {
            let row = self.hat_row(i);
            for d in 0..dim {
                let mut acc = par::KahanSum::default();
                for (j, w) in row[..=i].iter().enumerate() {
                    acc.add(w * values[j * dim + d]);
                }
                out[i * dim + d] = acc.value();
            }
        }
        out
    }

    /// Transpose action, used by adjoint gradients.
    pub fn apply_transpose(&self, dim: usize, values: &[f64]) -> Vec<f64> {
        debug_assert_eq!(values.len(), self.n_nodes * dim);
        let mut out = vec![0.0; values.len()];
        for i in 0..self.n_nodes {
            let row = self.hat_row(i);
            for d in 0..dim {
                let v = values[i * dim + d];
                if v == 0.0 {
                    continue;
                }
                for (j, w) in row[..=i].iter().enumerate() {
                    out[j * dim + d] += w * v;
                }
            }
        }
        out
    }
}

type Smooth<'a> = &'a (dyn Fn(f64, f64) -> f64 + Sync);
type Split<'a> = &'a (dyn Fn(f64, f64) -> (f64, f64) + Sync);

struct Shape<'a> {
    a: f64,
    b: f64,
    smooth: Smooth<'a>,
    /// `smooth = head * s^shift + tail` near the origin.
    split: Option<(f64, Split<'a>)>,
    row_scale: &'a (dyn Fn(f64) -> f64 + Sync),
}

/// Integral of `s^a (t - s)^b w(s)` over `[lo, hi]` by a rule that absorbs
/// `s^le (t - s)^re` exactly; the remaining powers are evaluated pointwise.
fn weighted(
    rule: &JacobiRule,
    lo: f64,
    hi: f64,
    t: f64,
    (a, b): (f64, f64),
    (le, re): (f64, f64),
    w: impl Fn(f64) -> f64,
) -> f64 {
    rule.integrate(lo, hi, le, re, |s| {
        let mut v = w(s);
        if a != le {
            v *= s.powf(a - le);
        }
        if b != re {
            v *= (t - s).powf(b - re);
        }
        v
    })
}

fn build(grid: &Grid, shape: &Shape<'_>) -> NodeOperator {
    let n_nodes = grid.n_nodes();
    let h = grid.step();
    let (a, b) = (shape.a, shape.b);
    // Jacobi rules with exponents summing to -1 are broken upstream, so the
    // two endpoint singularities are never absorbed by the same rule.
    let first = JacobiRule::new(a, 0.0);
    let last = JacobiRule::new(0.0, b);
    let plain = JacobiRule::new(0.0, 0.0);
    let head_rule = shape.split.map(|(shift, _)| JacobiRule::new(a + shift, 0.0));
    let rows = par::map_indexed(n_nodes, |i| {
        let mut hat = vec![0.0; n_nodes];
        let mut cell = vec![0.0; n_nodes];
        if i == 0 {
            return (hat, cell);
        }
        let t = grid.node(i);
        let scale = (shape.row_scale)(t);
        let smooth = |s: f64| (shape.smooth)(t, s);
        for k in 0..i {
            let (lo, hi) = (grid.node(k), grid.node(k + 1));
            let near_w = |s: f64| (hi - s) / h;
            let far_w = |s: f64| (s - lo) / h;
            let pair = |rule: &JacobiRule, c0: f64, c1: f64, ex: (f64, f64), g: &dyn Fn(f64) -> f64| {
                (
                    weighted(rule, c0, c1, t, (a, b), ex, |s| g(s) * near_w(s)),
                    weighted(rule, c0, c1, t, (a, b), ex, |s| g(s) * far_w(s)),
                )
            };
            type Pair<'a> = dyn Fn(&JacobiRule, f64, f64, (f64, f64), &dyn Fn(f64) -> f64) -> (f64, f64) + 'a;
            let origin = |c0: f64, c1: f64, pair: &Pair| {
                match (shape.split, &head_rule) {
                    (Some((shift, split)), Some(hr)) => {
                        let head = |s: f64| split(t, s).0;
                        let tail = |s: f64| split(t, s).1;
                        // s^a * head * s^shift: the rule absorbs s^{a + shift}
                        let n1 = weighted(hr, c0, c1, t, (a + shift, b), (a + shift, 0.0), |s| head(s) * near_w(s));
                        let f1 = weighted(hr, c0, c1, t, (a + shift, b), (a + shift, 0.0), |s| head(s) * far_w(s));
                        let (n2, f2) = pair(&first, c0, c1, (a, 0.0), &tail);
                        (n1 + n2, f1 + f2)
                    }
                    _ => pair(&first, c0, c1, (a, 0.0), &smooth),
                }
            };
            let (near, far) = match (k == 0, k + 1 == i) {
                (true, true) => {
                    let mid = 0.5 * (lo + hi);
                    let (n1, f1) = origin(lo, mid, &pair);
                    let (n2, f2) = pair(&last, mid, hi, (0.0, b), &smooth);
                    (n1 + n2, f1 + f2)
                }
                (true, false) => origin(lo, hi, &pair),
                (false, true) => pair(&last, lo, hi, (0.0, b), &smooth),
                (false, false) => pair(&plain, lo, hi, (0.0, 0.0), &smooth),
            };
            hat[k] += scale * near;
            hat[k + 1] += scale * far;
            cell[k] = scale * (near + far);
        }
        (hat, cell)
    });
    let mut hat = Vec::with_capacity(n_nodes * n_nodes);
    let mut cell = Vec::with_capacity(n_nodes * n_nodes);
    for (h_row, c_row) in rows {
        hat.extend(h_row);
        cell.extend(c_row);
    }
    NodeOperator { n_nodes, hat, cell }
}

/// `u(t_i) = ∫_0^{t_i} K_H(t_i, s) du(s) ds`.
pub fn kernel_operator_uncached(grid: &Grid, hurst: f64) -> NodeOperator {
    let kernel = VolterraKernel::new(hurst);
    let smooth = move |t: f64, s: f64| kernel.regular(t, s);
    let split = move |t: f64, s: f64| kernel.split(t, s);
    let unit = |_: f64| 1.0;
    build(
        grid,
        &Shape {
            a: 0.5 - hurst,
            b: hurst - 0.5,
            smooth: &smooth,
            split: Some((2.0 * hurst - 1.0, &split)),
            row_scale: &unit,
        },
    )
}

/// `u'(t_i) = c_H t_i^{H-1/2} / Γ(H-1/2) ∫_0^{t_i} (t_i - s)^{H-3/2} s^{1/2-H} du(s) ds`.
pub fn derivative_operator_uncached(grid: &Grid, hurst: f64) -> NodeOperator {
    let pre = kernel_constant(hurst) / gamma(hurst - 0.5);
    let smooth = |_: f64, _: f64| 1.0;
    let row_scale = move |t: f64| pre * t.powf(hurst - 0.5);
    build(grid, &Shape { a: 0.5 - hurst, b: hurst - 1.5, smooth: &smooth, split: None, row_scale: &row_scale })
}

pub(crate) type CacheKey = (usize, u64, u64);

pub(crate) fn cache_key(grid: &Grid, hurst: f64) -> CacheKey {
    (grid.n_steps(), grid.horizon().to_bits(), hurst.to_bits())
}

pub(crate) struct Cache<T> {
    inner: OnceLock<Mutex<HashMap<CacheKey, Arc<T>>>>,
}

impl<T> Cache<T> {
    pub const fn new() -> Self {
        Self { inner: OnceLock::new() }
    }

    /// Returns the cached value, building it outside the lock on a miss.
    pub fn get_or_build<E>(&self, key: CacheKey, build: impl FnOnce() -> Result<T, E>) -> Result<Arc<T>, E> {
        let map = self.inner.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(v) = map.lock().expect("cache poisoned").get(&key) {
            return Ok(Arc::clone(v));
        }
        let built = Arc::new(build()?);
        let mut guard = map.lock().expect("cache poisoned");
        Ok(Arc::clone(guard.entry(key).or_insert(built)))
    }
}

static KERNEL_OPS: Cache<NodeOperator> = Cache::new();
static DERIVATIVE_OPS: Cache<NodeOperator> = Cache::new();

/// Cached [`kernel_operator_uncached`].
pub fn kernel_operator(grid: &Grid, hurst: f64) -> Arc<NodeOperator> {
    let built: Result<_, std::convert::Infallible> =
        KERNEL_OPS.get_or_build(cache_key(grid, hurst), || Ok(kernel_operator_uncached(grid, hurst)));
    built.unwrap_or_else(|e| match e {})
}

/// Cached [`derivative_operator_uncached`].
pub fn derivative_operator(grid: &Grid, hurst: f64) -> Arc<NodeOperator> {
    let built: Result<_, std::convert::Infallible> =
        DERIVATIVE_OPS.get_or_build(cache_key(grid, hurst), || Ok(derivative_operator_uncached(grid, hurst)));
    built.unwrap_or_else(|e| match e {})
}

/// `∫_0^{t_i ∧ t_j} K_H(t_i, r) K_H(t_j, r) dr`, which equals the fBm
/// covariance `R_H(t_i, t_j)`.
pub fn kernel_gram(grid: &Grid, i: usize, j: usize, hurst: f64) -> f64 {
    let (lo_idx, hi_idx) = if i <= j { (i, j) } else { (j, i) };
    if lo_idx == 0 {
        return 0.0;
    }
    let kernel = VolterraKernel::new(hurst);
    let (s, t) = (grid.node(lo_idx), grid.node(hi_idx));
    let same = lo_idx == hi_idx;
    // r^a (s - r)^b (t - r)^c R(s, r) R(t, r)
    let a = 1.0 - 2.0 * hurst;
    let (b, c) = if same { (2.0 * hurst - 1.0, 0.0) } else { (hurst - 0.5, hurst - 0.5) };
    let outer = |r: f64| if c == 0.0 { 1.0 } else { (t - r).powf(c) };
    let full = |r: f64| kernel.regular(s, r) * kernel.regular(t, r) * outer(r);
    let first = JacobiRule::new(a, 0.0);
    let last = JacobiRule::new(0.0, b);
    let plain = JacobiRule::new(0.0, 0.0);
    // R(x, r) = head_x r^{2H-1} + tail_x for r <= x/2, so near the origin
    // the product splits into powers r^{1-2H}, r^0 and r^{2H-1}
    let p = 2.0 * hurst - 1.0;
    let up = JacobiRule::new(p, 0.0);
    let origin = |c0: f64, c1: f64| {
        let parts = |r: f64| {
            let (hs, ts) = kernel.split(s, r);
            let (ht, tt) = kernel.split(t, r);
            (ts * tt, hs * tt + ts * ht, hs * ht)
        };
        weighted(&first, c0, c1, s, (a, b), (a, 0.0), |r| parts(r).0 * outer(r))
            + weighted(&plain, c0, c1, s, (0.0, b), (0.0, 0.0), |r| parts(r).1 * outer(r))
            + weighted(&up, c0, c1, s, (p, b), (p, 0.0), |r| parts(r).2 * outer(r))
    };
    let mut acc = par::KahanSum::default();
    for k in 0..lo_idx {
        let (c0, c1) = (grid.node(k), grid.node(k + 1));
        match (k == 0, k + 1 == lo_idx) {
            (true, true) => {
                let mid = 0.5 * (c0 + c1);
                acc.add(origin(c0, mid));
                acc.add(weighted(&last, mid, c1, s, (a, b), (0.0, b), full));
            }
            (true, false) => acc.add(origin(c0, c1)),
            (false, true) => acc.add(weighted(&last, c0, c1, s, (a, b), (0.0, b), full)),
            (false, false) => acc.add(weighted(&plain, c0, c1, s, (a, b), (0.0, 0.0), full)),
        }
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::fbm_covariance;
    use approx::assert_relative_eq;

    #[test]
    fn gram_matches_covariance() {
        let grid = Grid::new(1.0, 64).unwrap();
        for &h in &[0.6, 0.7, 0.9] {
            for &(i, j) in &[(32, 64), (64, 64), (5, 40), (1, 64)] {
                let got = kernel_gram(&grid, i, j, h);
                let want = fbm_covariance(grid.node(i), grid.node(j), h);
                assert!((got - want).abs() < 1e-6, "H={h} ({i},{j}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn kernel_operator_of_constant_matches_gram_column() {
        // ∫ K(t, s) ds over [0, t]: check against a fine midpoint sum of the kernel
        let grid = Grid::new(1.0, 32).unwrap();
        let h = 0.7;
        let op = kernel_operator_uncached(&grid, h);
        let ones = vec![1.0; grid.n_nodes()];
        let u = op.apply(1, &ones);
        let k = VolterraKernel::new(h);
        let m = 400_000;
        let brute: f64 = (0..m).map(|q| k.eval(1.0, (q as f64 + 0.5) / m as f64)).sum::<f64>() / m as f64;
        assert_relative_eq!(u[32], brute, max_relative = 1e-4);
        assert_eq!(u[0], 0.0);
    }

    #[test]
    fn derivative_near_half_is_identity() {
        let grid = Grid::new(1.0, 16).unwrap();
        let op = derivative_operator_uncached(&grid, 0.5 + 1e-6);
        let du: Vec<f64> = grid.nodes().map(|t| 1.0 + t * t).collect();
        let v = op.apply(1, &du);
        for i in 1..grid.n_nodes() {
            assert!((v[i] - du[i]).abs() < 1e-4, "node {i}: {} vs {}", v[i], du[i]);
        }
    }

    #[test]
    fn transpose_is_adjoint() {
        let grid = Grid::new(1.0, 10).unwrap();
        let op = kernel_operator_uncached(&grid, 0.8);
        let x: Vec<f64> = (0..22).map(|k| (k as f64 * 0.7).sin()).collect();
        let y: Vec<f64> = (0..22).map(|k| (k as f64 * 0.3).cos()).collect();
        let ax = op.apply(2, &x);
        let aty = op.apply_transpose(2, &y);
        let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
    }

    #[test]
    fn cache_returns_shared_instance() {
        let grid = Grid::new(2.0, 8).unwrap();
        let a = kernel_operator(&grid, 0.65);
        let b = kernel_operator(&grid, 0.65);
        assert!(Arc::ptr_eq(&a, &b));
    }
}
