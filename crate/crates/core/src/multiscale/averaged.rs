use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::solver::solve_frozen_fast;
use super::system::{SlowMap, SystemSpec};
use crate::error::{Error, Result};
use crate::fbm::RngStream;
use crate::fraccalc::Grid;
use crate::par;

/// Settings for the ergodic estimate of the averaged drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicParams {
    pub burn_in: f64,
    pub horizon: f64,
    /// Euler-Maruyama step of the frozen fast dynamics.
    pub step: f64,
    pub replicas: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr_threshold: Option<f64>,
}

impl Default for ErgodicParams {
    fn default() -> Self {
        Self { burn_in: 5.0, horizon: 100.0, step: 0.01, replicas: 8, seed: 0, stderr_threshold: None }
    }
}

impl ErgodicParams {
    fn validate(&self) -> Result<()> {
        if !(self.burn_in >= 0.0 && self.horizon > self.burn_in) {
            return Err(Error::domain("ergodic window needs 0 <= burn_in < horizon"));
        }
        if !(self.step > 0.0 && self.step < self.horizon - self.burn_in) {
            return Err(Error::domain("ergodic step must be positive and below the window length"));
        }
        if self.replicas < 2 {
            return Err(Error::domain("ergodic estimate needs at least two replicas"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftEstimate {
    pub mean: Vec<f64>,
    /// Standard error across replicas.
    pub stderr: Vec<f64>,
}

/// Running mean and sum of squared deviations; exact for constant input.
#[derive(Debug, Clone)]
struct Welford {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(dim: usize) -> Self {
        Self { count: 0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    fn push(&mut self, v: &[f64]) {
        self.count += 1;
        let k = self.count as f64;
        for ((m, s), x) in self.mean.iter_mut().zip(&mut self.m2).zip(v) {
            let d = x - *m;
            *m += d / k;
            *s += d * (x - *m);
        }
    }
}

/// Time average of `f1(x, ỹ)` over `[burn_in, horizon]` of the frozen fast
/// dynamics, averaged over independent replicas.
pub fn estimate_bar_f1(spec: &SystemSpec, x: &[f64], params: &ErgodicParams) -> Result<DriftEstimate> {
    estimate_at(spec, x, params, 0)
}

fn estimate_at(spec: &SystemSpec, x: &[f64], params: &ErgodicParams, block: u64) -> Result<DriftEstimate> {
    params.validate()?;
    let m = spec.dims.m;
    if x.len() != m {
        return Err(Error::usage(format!("state has dim {}, system expects {m}", x.len())));
    }
    if !spec.has_fast_channel() {
        let f = spec.eval_f1(x, &[]);
        return Ok(DriftEstimate { mean: f, stderr: vec![0.0; m] });
    }
    let n_steps = (params.horizon / params.step).round() as usize;
    let grid = Grid::new(params.horizon, n_steps)?;
    let first = (params.burn_in / grid.step()).ceil() as usize;
    let replicas = par::try_map_indexed(params.replicas, |r| {
        let stream = RngStream::new(params.seed, (block << 32) | r as u64);
        let y = solve_frozen_fast(spec, x, &grid, stream)?;
        let mut acc = Welford::new(m);
        let mut f = vec![0.0; m];
        for k in first..grid.n_nodes() {
            (spec.f1)(x, y.at(k), &mut f);
            acc.push(&f);
        }
        Ok(acc.mean)
    })?;
    let mut acc = Welford::new(m);
    replicas.iter().for_each(|r| acc.push(r));
    let n = acc.count as f64;
    let stderr: Vec<f64> = acc.m2.iter().map(|s| (s / (n - 1.0) / n).sqrt()).collect();
    if let Some(threshold) = params.stderr_threshold {
        if let Some(&worst) = stderr.iter().find(|s| **s > threshold) {
            return Err(Error::Precision { stderr: worst, threshold });
        }
    }
    Ok(DriftEstimate { mean: acc.mean, stderr })
}

/// Axis-aligned lattice on which ergodic estimates are cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub points: Vec<usize>,
}

impl Lattice {
    pub fn uniform(lo: f64, hi: f64, points: usize, dim: usize) -> Self {
        Self { lo: vec![lo; dim], hi: vec![hi; dim], points: vec![points; dim] }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.lo.len() != dim || self.hi.len() != dim || self.points.len() != dim {
            return Err(Error::usage(format!("lattice must have dimension {dim}")));
        }
        for d in 0..dim {
            if !(self.hi[d] > self.lo[d]) || self.points[d] < 2 {
                return Err(Error::domain("lattice axes need lo < hi and at least two points"));
            }
        }
        Ok(())
    }

    fn size(&self) -> usize {
        self.points.iter().product()
    }

    fn coord(&self, d: usize, k: usize) -> f64 {
        self.lo[d] + (self.hi[d] - self.lo[d]) * k as f64 / (self.points[d] - 1) as f64
    }

    fn unflatten(&self, mut idx: usize) -> Vec<usize> {
        self.points
            .iter()
            .map(|&p| {
                let k = idx % p;
                idx /= p;
                k
            })
            .collect()
    }
}

/// Ergodic estimates of the averaged drift on a lattice, interpolated
/// multilinearly and clamped to the lattice box.
#[derive(Debug, Clone)]
pub struct DriftLattice {
    lattice: Lattice,
    dim: usize,
    values: Vec<f64>,
    max_stderr: f64,
}

impl DriftLattice {
    pub fn build(spec: &SystemSpec, params: &ErgodicParams, lattice: Lattice) -> Result<Self> {
        let dim = spec.dims.m;
        lattice.validate(dim)?;
        let mut values = Vec::with_capacity(lattice.size() * dim);
        let mut max_stderr: f64 = 0.0;
        for idx in 0..lattice.size() {
            let ks = lattice.unflatten(idx);
            let x: Vec<f64> = ks.iter().enumerate().map(|(d, &k)| lattice.coord(d, k)).collect();
            let est = estimate_at(spec, &x, params, idx as u64)?;
            max_stderr = est.stderr.iter().fold(max_stderr, |a, b| a.max(*b));
            values.extend(est.mean);
        }
        log::debug!("averaged drift lattice of {} points, max stderr {max_stderr:e}", lattice.size());
        Ok(Self { lattice, dim, values, max_stderr })
    }

    pub fn max_stderr(&self) -> f64 {
        self.max_stderr
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        let l = &self.lattice;
        let mut base = Vec::with_capacity(self.dim);
        let mut frac = Vec::with_capacity(self.dim);
        for (d, &xd) in x.iter().enumerate() {
            let cells = (l.points[d] - 1) as f64;
            let u = ((xd - l.lo[d]) / (l.hi[d] - l.lo[d]) * cells).clamp(0.0, cells);
            let k = (u.floor() as usize).min(l.points[d] - 2);
            base.push(k);
            frac.push(u - k as f64);
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for corner in 0..(1usize << self.dim) {
            let mut weight = 1.0;
            let mut flat = 0;
            let mut stride = 1;
            for d in 0..self.dim {
                let up = (corner >> d) & 1 == 1;
                weight *= if up { frac[d] } else { 1.0 - frac[d] };
                flat += (base[d] + usize::from(up)) * stride;
                stride *= l.points[d];
            }
            if weight == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(&self.values[flat * self.dim..(flat + 1) * self.dim]) {
                *o += weight * v;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftSource {
    ClosedForm,
    ErgodicEstimate,
}

/// The drift `f̄1` of the averaged equation.
#[derive(Clone)]
pub enum AveragedDrift {
    ClosedForm { dim: usize, map: SlowMap },
    Ergodic(Arc<DriftLattice>),
}

impl std::fmt::Debug for AveragedDrift {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::ClosedForm { dim, .. } => write!(f, "AveragedDrift::ClosedForm(dim = {dim})"),
            Self::Ergodic(l) => write!(f, "AveragedDrift::Ergodic({} lattice points)", l.lattice.size()),
        }
    }
}

impl AveragedDrift {
    /// The system's closed-form averaged drift.
    pub fn closed_form(spec: &SystemSpec) -> Result<Self> {
        let map = spec
            .bar_f1
            .clone()
            .ok_or_else(|| Error::usage(format!("system '{}' has no closed-form averaged drift", spec.name)))?;
        Ok(Self::ClosedForm { dim: spec.dims.m, map })
    }

    pub fn ergodic(spec: &SystemSpec, params: &ErgodicParams, lattice: Lattice) -> Result<Self> {
        Ok(Self::Ergodic(Arc::new(DriftLattice::build(spec, params, lattice)?)))
    }

    pub fn zero(dim: usize) -> Self {
        Self::ClosedForm { dim, map: Arc::new(|_, out| out.iter_mut().for_each(|o| *o = 0.0)) }
    }

    pub fn source(&self) -> DriftSource {
        match self {
            Self::ClosedForm { .. } => DriftSource::ClosedForm,
            Self::Ergodic(_) => DriftSource::ErgodicEstimate,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::ClosedForm { dim, .. } => *dim,
            Self::Ergodic(l) => l.dim,
        }
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Self::ClosedForm { map, .. } => map(x, out),
            Self::Ergodic(l) => l.eval(x, out),
        }
    }
}
