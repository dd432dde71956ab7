use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::kernel::{cache_key, kernel_operator, Cache};
use super::{fbm_covariance, RngStream};
use crate::error::{Error, Result};
use crate::fraccalc::{Grid, GridPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMethod {
    #[default]
    Cholesky,
    Volterra,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FbmSpec {
    hurst: f64,
    dim: usize,
    grid: Grid,
    method: SamplingMethod,
}

impl FbmSpec {
    pub fn new(hurst: f64, dim: usize, grid: Grid, method: SamplingMethod) -> Result<Self> {
        check_hurst(hurst)?;
        if dim == 0 {
            return Err(Error::domain("fBm dimension must be positive"));
        }
        Ok(Self { hurst, dim, grid, method })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn method(&self) -> SamplingMethod {
        self.method
    }
}

pub(crate) fn check_hurst(hurst: f64) -> Result<()> {
    if hurst > 0.5 && hurst < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("Hurst index must lie in (1/2, 1), got {hurst}")))
    }
}

/// Lower Cholesky factor of the covariance over nodes `1..=n`, row-major.
struct CholeskyFactor {
    n: usize,
    lower: Vec<f64>,
}

static CHOLESKY: Cache<CholeskyFactor> = Cache::new();

fn cholesky_factor(grid: &Grid, hurst: f64) -> Result<Arc<CholeskyFactor>> {
    CHOLESKY.get_or_build(cache_key(grid, hurst), || {
        let n = grid.n_steps();
        let cov = DMatrix::from_fn(n, n, |i, j| fbm_covariance(grid.node(i + 1), grid.node(j + 1), hurst));
        let chol = cov.cholesky().ok_or_else(|| {
            Error::Factorization(format!("fBm covariance not positive definite (n = {n}, H = {hurst})"))
        })?;
        let l = chol.l();
        let mut lower = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..=i {
                lower[i * n + k] = l[(i, k)];
            }
        }
        log::debug!("cached Cholesky factor for n = {n}, H = {hurst}");
        Ok(CholeskyFactor { n, lower })
    })
}

/// Draws one fBm path from `rng`, coordinate by coordinate.
pub fn sample_fbm_with<R: Rng + ?Sized>(spec: &FbmSpec, rng: &mut R) -> Result<GridPath> {
    let grid = spec.grid;
    let n = grid.n_steps();
    let dim = spec.dim;
    let mut values = vec![0.0; grid.n_nodes() * dim];
    let mut xi = vec![0.0; n];
    match spec.method {
        SamplingMethod::Cholesky => {
            let factor = cholesky_factor(&grid, spec.hurst)?;
            debug_assert_eq!(factor.n, n);
            for d in 0..dim {
                xi.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
                for i in 0..n {
                    let row = &factor.lower[i * n..i * n + i + 1];
                    let v: f64 = row.iter().zip(&xi).map(|(l, x)| l * x).sum();
                    values[(i + 1) * dim + d] = v;
                }
            }
        }
        SamplingMethod::Volterra => {
            let op = kernel_operator(&grid, spec.hurst);
            let scale = 1.0 / grid.step().sqrt();
            for d in 0..dim {
                xi.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
                for i in 1..=n {
                    let row = &op.cell_row(i)[..i];
                    let v: f64 = row.iter().zip(&xi).map(|(c, x)| c * x).sum();
                    values[i * dim + d] = v * scale;
                }
            }
        }
    }
    Ok(GridPath::from_raw(grid, dim, values))
}

pub fn sample_fbm(spec: &FbmSpec, stream: RngStream) -> Result<GridPath> {
    sample_fbm_with(spec, &mut stream.rng())
}

/// Standard Brownian motion of dimension `dim` on `grid`.
pub fn sample_brownian<R: Rng + ?Sized>(grid: &Grid, dim: usize, rng: &mut R) -> GridPath {
    let sd = grid.step().sqrt();
    let mut values = vec![0.0; grid.n_nodes() * dim];
    for i in 1..grid.n_nodes() {
        for d in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            values[i * dim + d] = values[(i - 1) * dim + d] + sd * z;
        }
    }
    GridPath::from_raw(*grid, dim, values)
}
