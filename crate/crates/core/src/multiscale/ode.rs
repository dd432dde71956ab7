use super::averaged::AveragedDrift;
use super::system::SystemSpec;
use crate::error::{Error, Result};
use crate::fbm::{control_time_derivative, Control};
use crate::fraccalc::{Grid, GridPath};

/// Right-hand side `f̄1(x) + σ1(x) w` of the skeleton equation.
pub(crate) struct SkeletonField<'a> {
    pub drift: &'a AveragedDrift,
    pub spec: Option<&'a SystemSpec>,
}

impl SkeletonField<'_> {
    pub fn eval(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        self.drift.eval(x, out);
        if let Some(spec) = self.spec {
            if w.iter().any(|v| *v != 0.0) {
                let d1 = spec.dims.d1;
                let s = spec.eval_sigma1(x);
                for (r, o) in out.iter_mut().enumerate() {
                    *o += (0..d1).map(|c| s[r * d1 + c] * w[c]).sum::<f64>();
                }
            }
        }
    }
}

/// Classical RK4 with forcing `w` given at the nodes and averaged at midpoints.
pub(crate) fn rk4(field: &SkeletonField<'_>, x0: &[f64], grid: &Grid, forcing: Option<&GridPath>) -> Result<GridPath> {
    let m = x0.len();
    let h = grid.step();
    let d1 = forcing.map_or(0, GridPath::dim);
    let zero = vec![0.0; d1];
    let mut mid = vec![0.0; d1];
    let mut x = x0.to_vec();
    let mut out = Vec::with_capacity(grid.n_nodes() * m);
    out.extend_from_slice(&x);
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut tmp = vec![0.0; m];
    for j in 0..grid.n_steps() {
        let (w0, w1) = match forcing {
            Some(f) => (f.at(j), f.at(j + 1)),
            None => (&zero[..], &zero[..]),
        };
        mid.iter_mut().zip(w0.iter().zip(w1)).for_each(|(m, (a, b))| *m = 0.5 * (a + b));
        field.eval(&x, w0, &mut k1);
        tmp.iter_mut().zip(x.iter().zip(&k1)).for_each(|(t, (x, k))| *t = x + 0.5 * h * k);
        field.eval(&tmp, &mid, &mut k2);
        tmp.iter_mut().zip(x.iter().zip(&k2)).for_each(|(t, (x, k))| *t = x + 0.5 * h * k);
        field.eval(&tmp, &mid, &mut k3);
        tmp.iter_mut().zip(x.iter().zip(&k3)).for_each(|(t, (x, k))| *t = x + h * k);
        field.eval(&tmp, w1, &mut k4);
        for r in 0..m {
            x[r] += h / 6.0 * (k1[r] + 2.0 * k2[r] + 2.0 * k3[r] + k4[r]);
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp { node: j + 1, time: grid.node(j + 1) });
        }
        out.extend_from_slice(&x);
    }
    Ok(GridPath::from_raw(*grid, m, out))
}

/// Solves `dx̄ = f̄1(x̄) dt` with RK4.
pub fn solve_averaged(drift: &AveragedDrift, x0: &[f64], grid: &Grid) -> Result<GridPath> {
    if x0.len() != drift.dim() {
        return Err(Error::usage("initial state does not match the drift dimension"));
    }
    rk4(&SkeletonField { drift, spec: None }, x0, grid, None)
}

/// Solves the skeleton equation `dx̃ = f̄1(x̃) dt + σ1(x̃) u'(t) dt` on the
/// control's grid. Only `u̇` enters; `v'` is ignored.
pub fn solve_skeleton(spec: &SystemSpec, drift: &AveragedDrift, ctrl: &Control, hurst: f64) -> Result<GridPath> {
    if ctrl.du().dim() != spec.dims.d1 {
        return Err(Error::usage("control density must have dim d1"));
    }
    let uprime = control_time_derivative(ctrl.du(), hurst)?;
    rk4(&SkeletonField { drift, spec: Some(spec) }, &spec.x0, ctrl.grid(), Some(&uprime.path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::cameron_martin_map;
    use crate::multiscale::registry::{build_system, SystemParams};

    #[test]
    fn zero_drift_is_constant() {
        let grid = Grid::new(1.0, 10).unwrap();
        let p = solve_averaged(&AveragedDrift::zero(2), &[1.0, -2.0], &grid).unwrap();
        assert!(p.values().chunks(2).all(|c| c == [1.0, -2.0]));
    }

    #[test]
    fn averaged_ou_matches_separable_solution() {
        // dx/dt = k sin x  =>  tan(x/2) = tan(x0/2) e^{k t}
        let spec = build_system("ou_sin", &SystemParams::new()).unwrap();
        let drift = AveragedDrift::closed_form(&spec).unwrap();
        let grid = Grid::new(1.0, 1024).unwrap();
        let p = solve_averaged(&drift, &[1.0], &grid).unwrap();
        let k = (-0.5f64).exp();
        let exact = 2.0 * ((0.5f64).tan() * k.exp()).atan();
        assert!((p.last()[0] - exact).abs() < 1e-6);
    }

    #[test]
    fn flow_property() {
        let spec = build_system("ou_sin", &SystemParams::new()).unwrap();
        let drift = AveragedDrift::closed_form(&spec).unwrap();
        let full = solve_averaged(&drift, &[1.0], &Grid::new(2.0, 200).unwrap()).unwrap();
        let half = solve_averaged(&drift, &[1.0], &Grid::new(1.0, 100).unwrap()).unwrap();
        let rest = solve_averaged(&drift, half.last(), &Grid::new(1.0, 100).unwrap()).unwrap();
        assert!((full.last()[0] - rest.last()[0]).abs() < 1e-12);
    }

    #[test]
    fn skeleton_reduces_to_cm_map_and_ignores_v() {
        let mut p = SystemParams::new();
        p.insert("fast_channel".into(), 0.0);
        let spec = build_system("linear", &p).unwrap();
        let drift = AveragedDrift::closed_form(&spec).unwrap();
        let grid = Grid::new(1.0, 256).unwrap();
        let du = GridPath::scalar(grid, |t| 1.0 + t).unwrap();
        let ctrl = Control::new(du.clone(), None).unwrap();
        let x = solve_skeleton(&spec, &drift, &ctrl, 0.7).unwrap();
        let u = cameron_martin_map(&du, 0.7).unwrap();
        let err = x.sup_distance(&u.lincomb(1.0, &GridPath::constant(grid, &spec.x0), 1.0).unwrap()).unwrap();
        assert!(err < 2e-3, "{err}");
        let with_v = Control::new(du, Some(GridPath::constant(grid, &[3.0]))).unwrap();
        assert_eq!(solve_skeleton(&spec, &drift, &with_v, 0.7).unwrap(), x);
    }

    #[test]
    fn zero_control_skeleton_is_averaged_path() {
        let spec = build_system("double_well_bounded", &SystemParams::new()).unwrap();
        let drift = AveragedDrift::closed_form(&spec).unwrap();
        let grid = Grid::new(1.0, 64).unwrap();
        let a = solve_averaged(&drift, &spec.x0, &grid).unwrap();
        let b = solve_skeleton(&spec, &drift, &Control::zero(grid, 1, 1), 0.7).unwrap();
        assert_eq!(a, b);
    }
}
