use statrs::function::gamma::gamma;

use super::check_order;
use super::path::{Grid, GridPath, MaskedPath};
use super::weights::CellWeights;
use crate::error::Result;
use crate::par;

/// Left-sided Riemann-Liouville integral `I^alpha_{0+} f` at every node.
pub fn rl_integral_left(f: &GridPath, alpha: f64) -> Result<GridPath> {
    check_order(alpha)?;
    let grid = *f.grid();
    let dim = f.dim();
    let n = grid.n_steps();
    let w = CellWeights::new(alpha - 1.0, n);
    let scale = grid.step().powf(alpha) / gamma(alpha);

    let rows = par::map_indexed(n + 1, |i| {
        let mut out = vec![0.0; dim];
        for j in 0..i {
            let a = i - j - 1;
            let (lo, hi) = (f.at(j), f.at(j + 1));
            for d in 0..dim {
                out[d] += w.near[a] * hi[d] + w.far[a] * lo[d];
            }
        }
        out.iter_mut().for_each(|v| *v *= scale);
        out
    });
    Ok(GridPath::from_raw(grid, dim, rows.concat()))
}

/// Left-sided Weyl derivative `D^alpha_{0+}` of `f - f(0)`.
///
/// Undefined at `t = 0`, which is reported as a masked node.
pub fn weyl_derivative_left(f: &GridPath, alpha: f64) -> Result<MaskedPath> {
    check_order(alpha)?;
    let grid = *f.grid();
    let dim = f.dim();
    let values = weyl_left_raw(&grid, dim, f.values(), alpha);
    let mut defined = vec![true; grid.n_nodes()];
    defined[0] = false;
    Ok(MaskedPath { path: GridPath::from_raw(grid, dim, values), defined })
}

/// Right-sided Weyl derivative of order `order` of `g - g(T)`, without the
/// complex phase factor. Undefined at `t = T`.
pub fn weyl_derivative_right(g: &GridPath, order: f64) -> Result<MaskedPath> {
    check_order(order)?;
    let rev = g.reversed();
    let d = weyl_left_raw(g.grid(), g.dim(), rev.values(), order);
    let path = GridPath::from_raw(*g.grid(), g.dim(), d).reversed();
    let mut defined = vec![true; g.grid().n_nodes()];
    defined[g.grid().n_steps()] = false;
    Ok(MaskedPath { path, defined })
}

pub(crate) fn weyl_left_raw(grid: &Grid, dim: usize, f: &[f64], alpha: f64) -> Vec<f64> {
    let n = grid.n_steps();
    let h = grid.step();
    let w = CellWeights::new(-alpha - 1.0, n);
    let norm = 1.0 / gamma(1.0 - alpha);
    let hpow = h.powf(-alpha);
    let at = |i: usize, d: usize| f[i * dim + d] - f[d];

    let rows = par::map_indexed(n + 1, |i| {
        let mut out = vec![0.0; dim];
        if i == 0 {
            return out;
        }
        let t = grid.node(i);
        for (d, o) in out.iter_mut().enumerate() {
            let fi = at(i, d);
            // last cell: f_i - f(s) is exactly slope * (t_i - s)
            let mut s = (fi - at(i - 1, d)) / (1.0 - alpha);
            for j in 0..i - 1 {
                let a = i - j - 1;
                s += w.near[a] * (fi - at(j + 1, d)) + w.far[a] * (fi - at(j, d));
            }
            *o = norm * (fi / t.powf(alpha) + alpha * hpow * s);
        }
        out
    });
    rows.concat()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(n: usize) -> Grid {
        Grid::new(1.0, n).unwrap()
    }

    #[test]
    fn rl_of_constant_is_closed_form() {
        let f = GridPath::scalar(grid(64), |_| 1.0).unwrap();
        let i = rl_integral_left(&f, 0.5).unwrap();
        assert_relative_eq!(i.last()[0], 1.0 / gamma(1.5), max_relative = 1e-12);
        assert_relative_eq!(i.last()[0], std::f64::consts::FRAC_2_SQRT_PI, max_relative = 1e-12);
        for (k, t) in f.grid().nodes().enumerate() {
            assert_relative_eq!(i.at(k)[0], t.powf(0.5) / gamma(1.5), epsilon = 1e-12);
        }
    }

    #[test]
    fn rl_of_zero_and_order_one_limit() {
        let z = GridPath::zeros(grid(16), 2);
        assert!(rl_integral_left(&z, 0.3).unwrap().values().iter().all(|&v| v == 0.0));
        let f = GridPath::scalar(grid(32), |t| t).unwrap();
        let i = rl_integral_left(&f, 1.0 - 1e-9).unwrap();
        assert_relative_eq!(i.last()[0], 0.5, epsilon = 1e-7);
    }

    #[test]
    fn rl_rejects_bad_order() {
        let f = GridPath::zeros(grid(4), 1);
        assert!(rl_integral_left(&f, 0.0).is_err());
        assert!(rl_integral_left(&f, 1.0).is_err());
        assert!(weyl_derivative_left(&f, -0.1).is_err());
    }

    #[test]
    fn weyl_of_linear_is_closed_form() {
        let f = GridPath::scalar(grid(50), |t| t).unwrap();
        let d = weyl_derivative_left(&f, 0.5).unwrap();
        assert!(d.value(0).is_none());
        assert_relative_eq!(d.path.last()[0], 1.0 / gamma(1.5), max_relative = 1e-12);
        for (k, t) in f.grid().nodes().enumerate().skip(1) {
            assert_relative_eq!(d.path.at(k)[0], t.sqrt() / gamma(1.5), max_relative = 1e-11);
        }
    }

    #[test]
    fn weyl_of_zero_is_zero() {
        let z = GridPath::zeros(grid(10), 1);
        let d = weyl_derivative_left(&z, 0.4).unwrap();
        assert!(d.path.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn weyl_inverts_rl_of_constant_away_from_origin() {
        for &alpha in &[0.25, 0.5, 0.75] {
            let one = GridPath::scalar(grid(512), |_| 1.0).unwrap();
            let i = rl_integral_left(&one, alpha).unwrap();
            let d = weyl_derivative_left(&i, alpha).unwrap();
            for (k, t) in one.grid().nodes().enumerate() {
                if t >= 0.1 {
                    assert!((d.path.at(k)[0] - 1.0).abs() < 5e-3, "alpha {alpha} t {t}");
                }
            }
        }
    }

    #[test]
    fn right_derivative_of_constant_vanishes() {
        let g = GridPath::scalar(grid(20), |_| 3.5).unwrap();
        let d = weyl_derivative_right(&g, 0.3).unwrap();
        assert!(d.value(20).is_none());
        assert!(d.path.values().iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn right_derivative_mirrors_left() {
        // g(t) = T - t vanishes at T, so D_{T-} g(t) = (T - t)^{1 - o} / Gamma(2 - o)
        let o = 0.5;
        let g = GridPath::scalar(grid(40), |t| 1.0 - t).unwrap();
        let d = weyl_derivative_right(&g, o).unwrap();
        for (k, t) in g.grid().nodes().enumerate().take(40) {
            let exact = (1.0 - t).powf(1.0 - o) / gamma(2.0 - o);
            assert_relative_eq!(d.path.at(k)[0], exact, max_relative = 1e-10);
        }
    }
}
