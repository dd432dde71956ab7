use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform partition of `[0, horizon]` into `n_steps` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    horizon: f64,
    n_steps: usize,
}

impl Grid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
        }
        if n_steps == 0 {
            return Err(Error::domain("grid needs at least one step"));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// `t_i = i * T / n`; the last node is exactly `T`.
    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.horizon
        } else {
            i as f64 * self.horizon / self.n_steps as f64
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(move |i| self.node(i))
    }

    /// Grid with `factor` sub-steps per cell of `self`.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        Grid::new(self.horizon, self.n_steps * factor)
    }

    /// The grid covering `[0, t_end]` for `end <= n_steps`.
    pub fn prefix(&self, end: usize) -> Result<Self> {
        if end == 0 || end > self.n_steps {
            return Err(Error::usage(format!("prefix end {end} outside 1..={}", self.n_steps)));
        }
        Grid::new(self.node(end), end)
    }
}

/// Values of an `R^dim`-valued function at the nodes of a grid, stored node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    grid: Grid,
    dim: usize,
    values: Vec<f64>,
}

impl GridPath {
    pub fn new(grid: Grid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::usage("path dimension must be positive"));
        }
        if values.len() != grid.n_nodes() * dim {
            return Err(Error::usage(format!(
                "expected {} values ({} nodes x {dim}), got {}",
                grid.n_nodes() * dim,
                grid.n_nodes(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite value at node {}", k / dim)));
        }
        Ok(Self { grid, dim, values })
    }

    pub(crate) fn from_raw(grid: Grid, dim: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_nodes() * dim);
        Self { grid, dim, values }
    }

    pub fn zeros(grid: Grid, dim: usize) -> Self {
        Self::from_raw(grid, dim, vec![0.0; grid.n_nodes() * dim])
    }

    pub fn constant(grid: Grid, value: &[f64]) -> Self {
        let values = (0..grid.n_nodes()).flat_map(|_| value.iter().copied()).collect();
        Self::from_raw(grid, value.len(), values)
    }

    /// Fills each node with `f(t, out)`.
    pub fn from_fn(grid: Grid, dim: usize, mut f: impl FnMut(f64, &mut [f64])) -> Result<Self> {
        let mut values = vec![0.0; grid.n_nodes() * dim];
        for (i, chunk) in values.chunks_mut(dim).enumerate() {
            f(grid.node(i), chunk);
        }
        Self::new(grid, dim, values)
    }

    pub fn scalar(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_fn(grid, 1, |t, out| out[0] = f(t))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn at_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn component(&self, d: usize) -> Vec<f64> {
        self.values.iter().skip(d).step_by(self.dim).copied().collect()
    }

    pub fn last(&self) -> &[f64] {
        self.at(self.grid.n_steps())
    }

    /// The restriction of the path to `[0, t_end]`.
    pub fn prefix(&self, end: usize) -> Result<Self> {
        let grid = self.grid.prefix(end)?;
        Ok(Self::from_raw(grid, self.dim, self.values[..(end + 1) * self.dim].to_vec()))
    }

    /// Node values in reverse time order, on the same grid.
    pub fn reversed(&self) -> Self {
        let n = self.grid.n_nodes();
        let mut values = Vec::with_capacity(self.values.len());
        for i in (0..n).rev() {
            values.extend_from_slice(self.at(i));
        }
        Self::from_raw(self.grid, self.dim, values)
    }

    pub fn ensure_same_grid(&self, other: &GridPath) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::usage(format!("grid mismatch: {:?} vs {:?}", self.grid, other.grid)));
        }
        Ok(())
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: f64, other: &GridPath, b: f64) -> Result<Self> {
        self.ensure_same_grid(other)?;
        if self.dim != other.dim {
            return Err(Error::usage("dimension mismatch in linear combination"));
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Self::from_raw(self.grid, self.dim, values))
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self::from_raw(self.grid, self.dim, self.values.iter().map(|v| a * v).collect())
    }

    /// Max over nodes of the Euclidean distance to `other`.
    pub fn sup_distance(&self, other: &GridPath) -> Result<f64> {
        let diff = self.lincomb(1.0, other, -1.0)?;
        Ok((0..diff.grid.n_nodes()).map(|i| euclid(diff.at(i))).fold(0.0, f64::max))
    }
}

pub(crate) fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A path whose value is undefined at some nodes (for example a Weyl
/// derivative at the origin). Undefined nodes hold `0.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedPath {
    pub path: GridPath,
    pub defined: Vec<bool>,
}

impl MaskedPath {
    pub fn value(&self, i: usize) -> Option<&[f64]> {
        self.defined[i].then(|| self.path.at(i))
    }

    pub fn is_defined(&self, i: usize) -> bool {
        self.defined[i]
    }

    pub fn masked_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.defined.iter().enumerate().filter(|(_, d)| !**d).map(|(i, _)| i)
    }
}

/// A Hölder exponent paired with the Hurst index it is used with,
/// constrained to `1 - H < alpha < 1/2` and `1/2 < H < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderExponent {
    alpha: f64,
    hurst: f64,
}

impl HolderExponent {
    pub fn new(alpha: f64, hurst: f64) -> Result<Self> {
        if !(hurst > 0.5 && hurst < 1.0) {
            return Err(Error::domain(format!("hurst index {hurst} outside (1/2, 1)")));
        }
        if !(alpha > 1.0 - hurst && alpha < 0.5) {
            return Err(Error::domain(format!("alpha {alpha} outside (1 - H, 1/2) = ({}, 0.5)", 1.0 - hurst)));
        }
        Ok(Self { alpha, hurst })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }
}
