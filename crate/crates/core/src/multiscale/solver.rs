use rand::Rng;

use super::system::{ScaleParams, SystemSpec};
use crate::error::{Error, Result};
use crate::fbm::{cameron_martin_map, sample_brownian, Control, RngStream};
use crate::fraccalc::{Grid, GridPath};

/// Slow and fast components on the slow grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SlowFastPath {
    pub slow: GridPath,
    /// `None` when the system has no fast channel.
    pub fast: Option<GridPath>,
}

/// Fast grid matching `slow` for the given scales.
pub fn fast_grid(slow: &Grid, scales: &ScaleParams) -> Result<Grid> {
    slow.refine(scales.substeps_for(slow.step()))
}

/// Draws the fast-channel Brownian motion on the fast grid.
pub fn sample_fast_noise<R: Rng + ?Sized>(
    spec: &SystemSpec,
    slow: &Grid,
    scales: &ScaleParams,
    rng: &mut R,
) -> Result<Option<GridPath>> {
    if !spec.has_fast_channel() {
        return Ok(None);
    }
    Ok(Some(sample_brownian(&fast_grid(slow, scales)?, spec.dims.d2, rng)))
}

/// Fast-channel control terms for [`integrate`].
struct FastControl<'a> {
    vprime: &'a GridPath,
    /// `1/√(δε)`: coefficient of `σ2 v'` in the fast drift.
    scale: f64,
}

/// Euler scheme for the slow-fast system with optional control shifts.
///
/// Each slow step freezes `x_j`, advances `y` through the fast sub-grid
/// with Euler-Maruyama, accumulates `∫ f1(x_j, y) dt` along the way, and
/// adds the left-point Young increment `√ε σ1(x_j) ΔB^H_j` plus `σ1(x_j) Δu_j`.
fn integrate(
    spec: &SystemSpec,
    scales: &ScaleParams,
    bh: &GridPath,
    w: Option<&GridPath>,
    shift: Option<&GridPath>,
    fast_control: Option<FastControl<'_>>,
) -> Result<SlowFastPath> {
    spec.validate()?;
    let grid = *bh.grid();
    let dims = spec.dims;
    if bh.dim() != dims.d1 {
        return Err(Error::usage(format!("fBm has dim {}, system expects d1 = {}", bh.dim(), dims.d1)));
    }
    if let Some(u) = shift {
        bh.ensure_same_grid(u)?;
    }
    let h = grid.step();
    let substeps = if spec.has_fast_channel() { scales.check_stability(h)? } else { 1 };
    let w = match (spec.has_fast_channel(), w) {
        (true, Some(w)) => {
            let expected = grid.refine(substeps)?;
            if *w.grid() != expected || w.dim() != dims.d2 {
                return Err(Error::usage(format!(
                    "fast noise must live on {} steps with dim {}, got {} steps with dim {}",
                    expected.n_steps(),
                    dims.d2,
                    w.grid().n_steps(),
                    w.dim()
                )));
            }
            Some(w)
        }
        (true, None) => return Err(Error::usage("system has a fast channel but no fast noise was given")),
        (false, _) => None,
    };
    if let Some(fc) = &fast_control {
        if fc.vprime.dim() != dims.d2 || *fc.vprime.grid() != grid {
            return Err(Error::usage("v' must live on the slow grid with dim d2"));
        }
    }
    let hf = h / substeps as f64;
    let (eps, delta) = (scales.epsilon(), scales.delta());
    let sqrt_eps = eps.sqrt();
    let inv_sqrt_delta = 1.0 / delta.sqrt();

    let n_nodes = grid.n_nodes();
    let mut xs = vec![0.0; n_nodes * dims.m];
    let mut ys = vec![0.0; n_nodes * dims.n];
    xs[..dims.m].copy_from_slice(&spec.x0);
    ys[..dims.n].copy_from_slice(&spec.y0);

    let mut x = spec.x0.clone();
    let mut y = spec.y0.clone();
    let mut f1v = vec![0.0; dims.m];
    let mut f2v = vec![0.0; dims.n];
    let mut s1 = vec![0.0; dims.m * dims.d1];
    let mut s2 = vec![0.0; dims.n * dims.d2];
    let mut drift = vec![0.0; dims.m];
    let mut vp = vec![0.0; dims.d2];

    for j in 0..grid.n_steps() {
        drift.iter_mut().for_each(|d| *d = 0.0);
        if let Some(w) = w {
            for q in 0..substeps {
                (spec.f1)(&x, &y, &mut f1v);
                drift.iter_mut().zip(&f1v).for_each(|(d, f)| *d += hf * f);
                (spec.f2)(&x, &y, &mut f2v);
                (spec.sigma2)(&x, &y, &mut s2);
                let k = j * substeps + q;
                let (w0, w1) = (w.at(k), w.at(k + 1));
                if let Some(fc) = &fast_control {
                    // v' is held piecewise linear between slow nodes
                    let theta = q as f64 / substeps as f64;
                    let (a, b) = (fc.vprime.at(j), fc.vprime.at(j + 1));
                    vp.iter_mut().zip(a.iter().zip(b)).for_each(|(v, (p, r))| *v = (1.0 - theta) * p + theta * r);
                }
                for r in 0..dims.n {
                    let mut dy = hf * f2v[r] / delta;
                    for c in 0..dims.d2 {
                        let sig = s2[r * dims.d2 + c];
                        dy += sig * (w1[c] - w0[c]) * inv_sqrt_delta;
                        if let Some(fc) = &fast_control {
                            dy += hf * sig * vp[c] * fc.scale;
                        }
                    }
                    y[r] += dy;
                }
            }
        } else {
            (spec.f1)(&x, &y, &mut f1v);
            drift.iter_mut().zip(&f1v).for_each(|(d, f)| *d = h * f);
        }
        (spec.sigma1)(&x, &mut s1);
        let (b0, b1) = (bh.at(j), bh.at(j + 1));
        for r in 0..dims.m {
            let mut dx = drift[r];
            for c in 0..dims.d1 {
                let sig = s1[r * dims.d1 + c];
                dx += sqrt_eps * sig * (b1[c] - b0[c]);
                if let Some(u) = shift {
                    dx += sig * (u.at(j + 1)[c] - u.at(j)[c]);
                }
            }
            x[r] += dx;
        }
        if !x.iter().chain(&y).all(|v| v.is_finite()) {
            return Err(Error::BlowUp { node: j + 1, time: grid.node(j + 1) });
        }
        xs[(j + 1) * dims.m..(j + 2) * dims.m].copy_from_slice(&x);
        ys[(j + 1) * dims.n..(j + 2) * dims.n].copy_from_slice(&y);
    }
    let slow = GridPath::new(grid, dims.m, xs)?;
    let fast = if spec.has_fast_channel() { Some(GridPath::new(grid, dims.n, ys)?) } else { None };
    Ok(SlowFastPath { slow, fast })
}

/// Solves the slow-fast system driven by `bh` (slow grid) and `w` (fast grid).
pub fn solve_slow_fast(
    spec: &SystemSpec,
    scales: &ScaleParams,
    bh: &GridPath,
    w: Option<&GridPath>,
) -> Result<SlowFastPath> {
    integrate(spec, scales, bh, w, None, None)
}

/// Solves the controlled system: the slow channel is shifted by
/// `σ1(x) du` with `u = K_H u̇`, the fast drift by `σ2 v' / √(δε)`.
pub fn solve_controlled(
    spec: &SystemSpec,
    scales: &ScaleParams,
    hurst: f64,
    ctrl: &Control,
    bh: &GridPath,
    w: Option<&GridPath>,
) -> Result<SlowFastPath> {
    if ctrl.du().dim() != spec.dims.d1 {
        return Err(Error::usage("control density must have dim d1"));
    }
    let u = cameron_martin_map(ctrl.du(), hurst)?;
    let fast_control = match (spec.has_fast_channel(), ctrl.vprime()) {
        (true, Some(v)) => Some(FastControl { vprime: v, scale: 1.0 / (scales.delta() * scales.epsilon()).sqrt() }),
        _ => None,
    };
    integrate(spec, scales, bh, w, Some(&u), fast_control)
}

/// Control cost `½‖(u̇, v')‖²`; independent of the trajectory.
pub fn control_cost(ctrl: &Control) -> f64 {
    0.5 * crate::fbm::cm_norm_sq(ctrl)
}

/// Euler-Maruyama for `dy = f2(x, y) dt + σ2(x, y) dW` with `x` frozen.
pub fn solve_frozen_fast_with_noise(spec: &SystemSpec, x: &[f64], y0: &[f64], w: &GridPath) -> Result<GridPath> {
    let dims = spec.dims;
    if !spec.has_fast_channel() {
        return Err(Error::usage("system has no fast channel"));
    }
    if x.len() != dims.m || y0.len() != dims.n || w.dim() != dims.d2 {
        return Err(Error::usage("dimension mismatch in frozen fast solve"));
    }
    let grid = *w.grid();
    let h = grid.step();
    let mut y = y0.to_vec();
    let mut out = Vec::with_capacity(grid.n_nodes() * dims.n);
    out.extend_from_slice(&y);
    let mut f2v = vec![0.0; dims.n];
    let mut s2 = vec![0.0; dims.n * dims.d2];
    for k in 0..grid.n_steps() {
        (spec.f2)(x, &y, &mut f2v);
        (spec.sigma2)(x, &y, &mut s2);
        let (w0, w1) = (w.at(k), w.at(k + 1));
        for r in 0..dims.n {
            let mut dy = h * f2v[r];
            for c in 0..dims.d2 {
                dy += s2[r * dims.d2 + c] * (w1[c] - w0[c]);
            }
            y[r] += dy;
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp { node: k + 1, time: grid.node(k + 1) });
        }
        out.extend_from_slice(&y);
    }
    GridPath::new(grid, dims.n, out)
}

/// [`solve_frozen_fast_with_noise`] from the system's `y0` with fresh noise.
pub fn solve_frozen_fast(spec: &SystemSpec, x: &[f64], grid: &Grid, stream: RngStream) -> Result<GridPath> {
    let w = sample_brownian(grid, spec.dims.d2, &mut stream.rng());
    solve_frozen_fast_with_noise(spec, x, &spec.y0, &w)
}
