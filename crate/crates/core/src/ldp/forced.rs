use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Constraint, RateProblem, RateResult};
use crate::error::{Error, Result};
use crate::fbm::{derivative_operator, Control, NodeOperator};
use crate::fraccalc::{Grid, GridPath};
use crate::multiscale::solve_skeleton;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForcedOptions {
    /// Largest accepted relative change of the energy when the target is
    /// recovered on the grid coarsened by two.
    pub resolution_tol: f64,
    /// Energies below this are compared in absolute terms.
    pub energy_floor: f64,
}

impl Default for ForcedOptions {
    fn default() -> Self {
        Self { resolution_tol: 0.25, energy_floor: 1e-8 }
    }
}

/// Recovers the unique control of a target path when `σ1` is square and
/// invertible: `u' = σ1(ξ)^{-1}(ξ̇ - f̄1(ξ))` nodewise, then `u̇` from the
/// lower-triangular system `D u̇ = u'` with the closure `u̇_0 = u̇_1`.
///
/// A target the grid cannot resolve (its energy moves by more than
/// `resolution_tol` under coarsening) is reported as ill-conditioned.
pub fn forced_control_for_path(problem: &RateProblem, opts: &ForcedOptions) -> Result<RateResult> {
    let Constraint::MatchPath { target, tol } = &problem.constraint else {
        return Err(Error::usage("forced control needs a path-matching constraint"));
    };
    let dims = problem.spec.dims;
    if dims.m != dims.d1 {
        return Err(Error::usage(format!("sigma1 must be square, got {} x {}", dims.m, dims.d1)));
    }
    if problem.grid.n_steps() < 2 {
        return Err(Error::domain("path recovery needs at least two steps"));
    }
    let (du, energy) = recover(problem, target)?;
    let n = problem.grid.n_steps();
    if n.is_multiple_of(2) && n >= 8 {
        let coarse_grid = Grid::new(problem.grid.horizon(), n / 2)?;
        let coarse_vals: Vec<f64> = (0..coarse_grid.n_nodes()).flat_map(|i| target.at(2 * i).to_vec()).collect();
        let coarse = GridPath::from_raw(coarse_grid, dims.m, coarse_vals);
        let (_, coarse_energy) = recover(&RateProblem { grid: coarse_grid, ..problem.clone() }, &coarse)?;
        let scale = energy.max(coarse_energy);
        if scale > opts.energy_floor && (energy - coarse_energy).abs() > opts.resolution_tol * scale {
            return Err(Error::IllConditioned(format!(
                "target not resolved by the grid: energy {energy:.4e} on {n} steps vs {coarse_energy:.4e} on {} steps",
                n / 2
            )));
        }
    }
    let ctrl = Control::new(du.clone(), None)?;
    let skeleton_path = solve_skeleton(&problem.spec, &problem.drift, &ctrl, problem.hurst)?;
    let residual = skeleton_path.sup_distance(target)?;
    Ok(RateResult {
        energy,
        du_star: du,
        vprime_star: None,
        skeleton_path,
        iterations: 0,
        gradient_norm: 0.0,
        constraint_residual: residual,
        converged: residual <= *tol,
    })
}

fn recover(problem: &RateProblem, target: &GridPath) -> Result<(GridPath, f64)> {
    let grid = problem.grid;
    let m = problem.spec.dims.m;
    let h = grid.step();
    let n = grid.n_steps();
    let mut uprime = vec![0.0; grid.n_nodes() * m];
    let mut fbar = vec![0.0; m];
    for i in 1..=n {
        let xi = target.at(i);
        let deriv: Vec<f64> = (0..m)
            .map(|r| {
                if i == n {
                    (3.0 * xi[r] - 4.0 * target.at(i - 1)[r] + target.at(i - 2)[r]) / (2.0 * h)
                } else {
                    (target.at(i + 1)[r] - target.at(i - 1)[r]) / (2.0 * h)
                }
            })
            .collect();
        problem.drift.eval(xi, &mut fbar);
        let sigma = DMatrix::from_row_slice(m, m, &problem.spec.eval_sigma1(xi));
        let rhs = DVector::from_iterator(m, deriv.iter().zip(&fbar).map(|(d, f)| d - f));
        let scale = sigma.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let lu = sigma.lu();
        if !(scale > 0.0) || lu.determinant().abs() <= 1e-12 * scale.powi(m as i32) {
            return Err(Error::SingularSigma { node: i });
        }
        let sol = lu.solve(&rhs).ok_or(Error::SingularSigma { node: i })?;
        uprime[i * m..(i + 1) * m].copy_from_slice(sol.as_slice());
    }
    let dop = derivative_operator(&grid, problem.hurst);
    let theta = solve_lower(&dop, m, &uprime)?;
    if !theta.iter().all(|v| v.is_finite()) {
        return Err(Error::IllConditioned("non-finite control density".into()));
    }
    let du = GridPath::from_raw(grid, m, theta);
    let energy = 0.5 * crate::fbm::l2_norm_sq(&du);
    Ok((du, energy))
}

/// Forward substitution for `D θ = u'` on rows `1..=n`, with `θ_0 = θ_1`.
fn solve_lower(dop: &NodeOperator, dim: usize, rhs: &[f64]) -> Result<Vec<f64>> {
    let n_nodes = dop.n_nodes();
    let mut theta = vec![0.0; n_nodes * dim];
    for i in 1..n_nodes {
        let row = dop.hat_row(i);
        let pivot = if i == 1 { row[0] + row[1] } else { row[i] };
        let row_scale = row[..=i].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !(pivot.abs() > 1e-14 * row_scale) {
            return Err(Error::IllConditioned(format!("vanishing pivot in row {i}")));
        }
        for d in 0..dim {
            let mut acc = rhs[i * dim + d];
            if i > 1 {
                acc -= (row[0] + row[1]) * theta[dim + d];
                for j in 2..i {
                    acc -= row[j] * theta[j * dim + d];
                }
            }
            theta[i * dim + d] = acc / pivot;
        }
    }
    for d in 0..dim {
        theta[d] = theta[dim + d];
    }
    Ok(theta)
}
