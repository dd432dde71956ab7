use super::check_order;
use super::operators::weyl_left_raw;
use super::path::GridPath;
use crate::error::{Error, Result};
use crate::par::KahanSum;

fn split_dims(f: &GridPath, g: &GridPath) -> Result<(usize, usize)> {
    f.ensure_same_grid(g)?;
    let k = g.dim();
    if !f.dim().is_multiple_of(k) {
        return Err(Error::usage(format!("integrand dim {} is not a multiple of integrator dim {k}", f.dim())));
    }
    Ok((f.dim() / k, k))
}

/// Running Young integral `t_i -> ∫_0^{t_i} f dg`.
///
/// `f` holds an `l x k` matrix per node (row-major) and `g` a `k`-vector.
/// Evaluated as the left-point Riemann sum with compensated accumulation.
pub fn young_integral(f: &GridPath, g: &GridPath, alpha: f64) -> Result<GridPath> {
    check_order(alpha)?;
    let (l, k) = split_dims(f, g)?;
    let grid = *g.grid();
    let mut acc = vec![KahanSum::default(); l];
    let mut out = GridPath::zeros(grid, l);
    for j in 0..grid.n_steps() {
        let (fj, g0, g1) = (f.at(j), g.at(j), g.at(j + 1));
        for (r, a) in acc.iter_mut().enumerate() {
            for c in 0..k {
                a.add(fj[r * k + c] * (g1[c] - g0[c]));
            }
        }
        for (o, a) in out.at_mut(j + 1).iter_mut().zip(&acc) {
            *o = a.value();
        }
    }
    Ok(out)
}

/// `∫_0^T f dg` through the fractional-derivative representation
///
/// `-∫ D^alpha_{0+} f_{0+}(x) D^{1-alpha}_{T-} g_{T-}(x) dx + f(0) (g(T) - g(0))`,
///
/// where the minus sign is the product of the two complex phase factors.
/// Costs O(n^2); meant for cross-checking [`young_integral`].
pub fn young_integral_fractional(f: &GridPath, g: &GridPath, alpha: f64) -> Result<Vec<f64>> {
    check_order(alpha)?;
    let (l, k) = split_dims(f, g)?;
    let grid = *g.grid();
    let n = grid.n_steps();
    let h = grid.step();

    let df = weyl_left_raw(&grid, f.dim(), f.values(), alpha);
    let g_rev = g.reversed();
    let dg_rev = weyl_left_raw(&grid, k, g_rev.values(), 1.0 - alpha);

    let mut out = vec![0.0; l];
    for (r, o) in out.iter_mut().enumerate() {
        let mut total = 0.0;
        for c in 0..k {
            // masked end values are the (vanishing) limits at 0 and T
            let prod = |i: usize| {
                if i == 0 || i == n {
                    0.0
                } else {
                    df[i * f.dim() + r * k + c] * dg_rev[(n - i) * k + c]
                }
            };
            let mut s = KahanSum::default();
            for i in 0..n {
                s.add(0.5 * h * (prod(i) + prod(i + 1)));
            }
            total += -s.value() + f.at(0)[r * k + c] * (g.last()[c] - g.at(0)[c]);
        }
        *o = total;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fraccalc::Grid;
    use approx::assert_relative_eq;

    #[test]
    fn constant_integrand_gives_increment() {
        let grid = Grid::new(1.0, 100).unwrap();
        let f = GridPath::constant(grid, &[2.5]);
        let g = GridPath::scalar(grid, |t| (3.0 * t).sin()).unwrap();
        let y = young_integral(&f, &g, 0.4).unwrap();
        for i in 0..=100 {
            assert_relative_eq!(y.at(i)[0], 2.5 * (g.at(i)[0] - g.at(0)[0]), epsilon = 1e-14);
        }
        let z = young_integral_fractional(&f, &g, 0.4).unwrap();
        assert_relative_eq!(z[0], 2.5 * g.last()[0], epsilon = 1e-14);
    }

    #[test]
    fn riemann_stieltjes_of_identity() {
        let grid = Grid::new(1.0, 2000).unwrap();
        let f = GridPath::scalar(grid, |t| t).unwrap();
        let y = young_integral(&f, &f, 0.4).unwrap();
        assert_relative_eq!(y.last()[0], 0.5, epsilon = 1e-3);
        let z = young_integral_fractional(&f, &f, 0.4).unwrap();
        assert_relative_eq!(z[0], 0.5, epsilon = 1e-3);
    }

    #[test]
    fn matrix_integrand_against_vector_driver() {
        let grid = Grid::new(1.0, 10).unwrap();
        // f = [[1, 0], [0, 2], [1, 1]] constant, g = (t, t^2)
        let f = GridPath::constant(grid, &[1.0, 0.0, 0.0, 2.0, 1.0, 1.0]);
        let g = GridPath::from_fn(grid, 2, |t, o| {
            o[0] = t;
            o[1] = t * t;
        })
        .unwrap();
        let y = young_integral(&f, &g, 0.3).unwrap();
        assert_eq!(y.dim(), 3);
        assert_relative_eq!(y.last()[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(y.last()[1], 2.0, epsilon = 1e-14);
        assert_relative_eq!(y.last()[2], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn mismatches_are_usage_errors() {
        let g1 = Grid::new(1.0, 10).unwrap();
        let g2 = Grid::new(1.0, 11).unwrap();
        let a = GridPath::zeros(g1, 1);
        let b = GridPath::zeros(g2, 1);
        assert!(matches!(young_integral(&a, &b, 0.4), Err(Error::Usage(_))));
        let c = GridPath::zeros(g1, 3);
        let d = GridPath::zeros(g1, 2);
        assert!(matches!(young_integral(&c, &d, 0.4), Err(Error::Usage(_))));
    }
}
