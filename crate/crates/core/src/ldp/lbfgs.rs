//! Limited-memory BFGS with a strong Wolfe line search.

use std::collections::VecDeque;

use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub(crate) struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop once `‖g‖ <= grad_tol * max(1, |f|)`.
    pub grad_tol: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;

/// Minimizes `f`, where `eval(x)` returns `(f(x), ∇f(x))`.
pub(crate) fn minimize<F>(mut eval: F, x0: Vec<f64>, opts: &LbfgsOptions) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut x = x0;
    let (mut f, mut g) = eval(&x)?;
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut iterations = 0;
    let tol = |f: f64| opts.grad_tol * f.abs().max(1.0);
    while iterations < opts.max_iter {
        if norm(&g) <= tol(f) {
            return Ok(LbfgsOutcome { grad_norm: norm(&g), x, f, iterations, converged: true });
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let gamma = pairs.back().map_or(1.0, |(s, y, _)| dot(s, y) / dot(y, y));
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            pairs.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let first_step = if pairs.is_empty() { (1.0 / norm(&g)).min(1.0) } else { 1.0 };
        let Some((step, f_new, g_new)) = line_search(&mut eval, &x, f, slope, &dir, first_step)? else {
            if pairs.is_empty() {
                // steepest descent failed too: no further progress possible
                let grad_norm = norm(&g);
                return Ok(LbfgsOutcome { grad_norm, x, f, iterations, converged: false });
            }
            pairs.clear();
            continue;
        };
        iterations += 1;
        let s: Vec<f64> = dir.iter().map(|d| step * d).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        x.iter_mut().zip(&s).for_each(|(xi, si)| *xi += si);
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        let f_old = f;
        f = f_new;
        g = g_new;
        if (f_old - f).abs() <= 1e-16 * f.abs().max(1e-300) && norm(&g) <= 1e3 * tol(f) {
            return Ok(LbfgsOutcome { grad_norm: norm(&g), x, f, iterations, converged: true });
        }
    }
    let grad_norm = norm(&g);
    let converged = grad_norm <= tol(f);
    Ok(LbfgsOutcome { grad_norm, x, f, iterations, converged })
}

type Probe = (f64, f64, Vec<f64>);

/// Strong Wolfe line search; `None` when no acceptable step is found.
fn line_search<F>(
    eval: &mut F,
    x: &[f64],
    f0: f64,
    slope0: f64,
    dir: &[f64],
    first: f64,
) -> Result<Option<(f64, f64, Vec<f64>)>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut probe = |a: f64| -> Result<Probe> {
        let xt: Vec<f64> = x.iter().zip(dir).map(|(xi, di)| xi + a * di).collect();
        let (f, g) = eval(&xt)?;
        Ok((f, dot(&g, dir), g))
    };
    let (mut a_prev, mut f_prev, mut d_prev) = (0.0, f0, slope0);
    let mut a = first;
    for i in 0..40 {
        let (fa, da, ga) = probe(a)?;
        if !fa.is_finite() || fa > f0 + C1 * a * slope0 || (i > 0 && fa >= f_prev) {
            return zoom(&mut probe, f0, slope0, (a_prev, f_prev, d_prev), (a, fa, da));
        }
        if da.abs() <= -C2 * slope0 {
            return Ok(Some((a, fa, ga)));
        }
        if da >= 0.0 {
            return zoom(&mut probe, f0, slope0, (a, fa, da), (a_prev, f_prev, d_prev));
        }
        (a_prev, f_prev, d_prev) = (a, fa, da);
        a *= 2.0;
    }
    Ok(None)
}

fn zoom(
    probe: &mut impl FnMut(f64) -> Result<Probe>,
    f0: f64,
    slope0: f64,
    mut lo: (f64, f64, f64),
    mut hi: (f64, f64, f64),
) -> Result<Option<(f64, f64, Vec<f64>)>> {
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for _ in 0..60 {
        // minimizer of the quadratic through lo with slope, and hi; bisection fallback
        let (a0, f_lo, d_lo) = lo;
        let (a1, f_hi, _) = hi;
        let span = a1 - a0;
        let denom = 2.0 * (f_hi - f_lo - d_lo * span);
        let mut a = if denom.is_finite() && denom.abs() > 0.0 { a0 - d_lo * span * span / denom } else { f64::NAN };
        let (left, right) = if a0 < a1 { (a0, a1) } else { (a1, a0) };
        let margin = 0.1 * (right - left);
        if !(a > left + margin && a < right - margin) {
            a = 0.5 * (a0 + a1);
        }
        if (right - left) <= 1e-16 * right.abs().max(1e-300) {
            break;
        }
        let (fa, da, ga) = probe(a)?;
        if fa.is_finite() && fa < f0 && best.as_ref().is_none_or(|b| fa < b.1) {
            best = Some((a, fa, ga.clone()));
        }
        if !fa.is_finite() || fa > f0 + C1 * a * slope0 || fa >= f_lo {
            hi = (a, fa, da);
        } else {
            if da.abs() <= -C2 * slope0 {
                return Ok(Some((a, fa, ga)));
            }
            if da * (a1 - a0) >= 0.0 {
                hi = lo;
            }
            lo = (a, fa, da);
        }
    }
    // accept any decrease found when the interval collapses
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let eval = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            Ok((f, g))
        };
        let opts = LbfgsOptions { memory: 8, max_iter: 500, grad_tol: 1e-10 };
        let out = minimize(eval, vec![-1.2, 1.0], &opts).unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6, "{:?}", out.x);
    }

    #[test]
    fn ill_conditioned_quadratic() {
        let eval = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let scales = [1.0, 1e3, 1e5];
            let f = x.iter().zip(&scales).map(|(v, s)| 0.5 * s * (v - 1.0).powi(2)).sum();
            let g = x.iter().zip(&scales).map(|(v, s)| s * (v - 1.0)).collect();
            Ok((f, g))
        };
        let opts = LbfgsOptions { memory: 5, max_iter: 200, grad_tol: 1e-9 };
        let out = minimize(eval, vec![0.0; 3], &opts).unwrap();
        assert!(out.converged);
        assert!(out.x.iter().all(|v| (v - 1.0).abs() < 1e-6));
    }
}
