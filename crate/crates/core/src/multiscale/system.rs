use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::RngStream;

/// `(x, y, out)`: a map `R^m × R^n → R^k`.
pub type Coupled = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `(x, out)`: a map `R^m → R^k`.
pub type SlowMap = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// Slow state dimension.
    pub m: usize,
    /// Fast state dimension; zero disables the fast channel.
    pub n: usize,
    /// fBm dimension.
    pub d1: usize,
    /// Brownian dimension of the fast channel.
    pub d2: usize,
}

/// Declared constants of the standing assumptions. Declared, not verified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub lipschitz: f64,
    pub lipschitz_sigma: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub growth: f64,
}

/// Coefficients and initial state of a slow-fast system.
#[derive(Clone)]
pub struct SystemSpec {
    pub name: String,
    pub dims: Dims,
    pub f1: Coupled,
    pub f2: Coupled,
    /// `m × d1`, row-major.
    pub sigma1: SlowMap,
    /// `n × d2`, row-major.
    pub sigma2: Coupled,
    /// Closed-form averaged drift, when known.
    pub bar_f1: Option<SlowMap>,
    pub constants: Constants,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    /// Violates a standing assumption; only for diagnostics and oracles.
    pub diagnostics_only: bool,
}

impl fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemSpec")
            .field("name", &self.name)
            .field("dims", &self.dims)
            .field("constants", &self.constants)
            .field("x0", &self.x0)
            .field("y0", &self.y0)
            .field("closed_form_average", &self.bar_f1.is_some())
            .field("diagnostics_only", &self.diagnostics_only)
            .finish()
    }
}

impl SystemSpec {
    pub fn validate(&self) -> Result<()> {
        let Dims { m, n, d1, d2 } = self.dims;
        if m == 0 || d1 == 0 {
            return Err(Error::domain("slow dimension and fBm dimension must be positive"));
        }
        if (n == 0) != (d2 == 0) {
            return Err(Error::domain("fast dimension and its noise dimension must vanish together"));
        }
        if self.x0.len() != m || self.y0.len() != n {
            return Err(Error::usage(format!(
                "initial state has dims ({}, {}), system expects ({m}, {n})",
                self.x0.len(),
                self.y0.len()
            )));
        }
        let c = self.constants;
        for (label, v) in
            [("L", c.lipschitz), ("L'", c.lipschitz_sigma), ("beta1", c.beta1), ("beta2", c.beta2), ("C", c.growth)]
        {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("declared constant {label} must be positive, got {v}")));
            }
        }
        if !self.x0.iter().chain(&self.y0).all(|v| v.is_finite()) {
            return Err(Error::domain("initial state must be finite"));
        }
        Ok(())
    }

    pub fn has_fast_channel(&self) -> bool {
        self.dims.n > 0
    }

    pub fn eval_f1(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dims.m];
        (self.f1)(x, y, &mut out);
        out
    }

    pub fn eval_sigma1(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dims.m * self.dims.d1];
        (self.sigma1)(x, &mut out);
        out
    }

    /// Spot-checks the declared constants on random states in `[-radius, radius]`.
    pub fn check_assumptions(&self, samples: usize, radius: f64, seed: u64) -> AssumptionReport {
        let Dims { m, n, d1, d2 } = self.dims;
        let mut rng = RngStream::new(seed, 0).rng();
        let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.random_range(-radius..=radius)).collect() };
        let mut report = AssumptionReport { samples, ..Default::default() };
        let c = self.constants;
        for _ in 0..samples {
            let (x1, x2, y1, y2) = (draw(m), draw(m), draw(n), draw(n));
            let dx = dist(&x1, &x2);
            let dy = dist(&y1, &y2);
            let mut a = vec![0.0; m];
            let mut b = vec![0.0; m];
            (self.f1)(&x1, &y1, &mut a);
            (self.f1)(&x2, &y2, &mut b);
            let lip = dist(&a, &b) / (dx + dy).max(1e-300);
            report.max_lipschitz_ratio = report.max_lipschitz_ratio.max(lip / c.lipschitz);
            report.max_f1_norm = report.max_f1_norm.max(dist(&a, &vec![0.0; m]));
            let mut s1 = vec![0.0; m * d1];
            let mut s2 = vec![0.0; m * d1];
            (self.sigma1)(&x1, &mut s1);
            (self.sigma1)(&x2, &mut s2);
            let lip_s = dist(&s1, &s2) / dx.max(1e-300);
            report.max_sigma_lipschitz_ratio = report.max_sigma_lipschitz_ratio.max(lip_s / c.lipschitz_sigma);
            if n > 0 && dy > 0.0 {
                let mut g1 = vec![0.0; n];
                let mut g2 = vec![0.0; n];
                (self.f2)(&x1, &y1, &mut g1);
                (self.f2)(&x1, &y2, &mut g2);
                let mut q1 = vec![0.0; n * d2];
                let mut q2 = vec![0.0; n * d2];
                (self.sigma2)(&x1, &y1, &mut q1);
                (self.sigma2)(&x1, &y2, &mut q2);
                let inner: f64 =
                    g1.iter().zip(&g2).zip(y1.iter().zip(&y2)).map(|((p, q), (u, v))| (p - q) * (u - v)).sum();
                let lhs = 2.0 * inner + dist(&q1, &q2).powi(2);
                // dissipativity: lhs <= -beta1 |y1 - y2|^2
                let slack = lhs + c.beta1 * dy * dy;
                report.max_dissipativity_excess = report.max_dissipativity_excess.max(slack / (dy * dy));
            }
        }
        report
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Outcome of [`SystemSpec::check_assumptions`]. Ratios above one and
/// positive excess indicate a declared constant that the samples contradict.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub samples: usize,
    pub max_lipschitz_ratio: f64,
    pub max_sigma_lipschitz_ratio: f64,
    pub max_f1_norm: f64,
    pub max_dissipativity_excess: f64,
}

impl AssumptionReport {
    pub fn consistent(&self) -> bool {
        self.max_lipschitz_ratio <= 1.0 + 1e-9
            && self.max_sigma_lipschitz_ratio <= 1.0 + 1e-9
            && self.max_dissipativity_excess <= 1e-9
    }
}

/// Time-scale parameters `0 < delta < epsilon <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    epsilon: f64,
    delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fast_substeps: Option<usize>,
    #[serde(default)]
    strict: bool,
}

/// Fast steps above this fraction of `delta` trigger a stability warning.
pub const STABILITY_LIMIT: f64 = 0.5;

impl ScaleParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::domain(format!("epsilon must lie in (0, 1], got {epsilon}")));
        }
        if !(delta > 0.0 && delta < epsilon) {
            return Err(Error::domain(format!("delta must lie in (0, epsilon), got {delta} with epsilon = {epsilon}")));
        }
        Ok(Self { epsilon, delta, fast_substeps: None, strict: false })
    }

    pub fn with_fast_substeps(mut self, substeps: usize) -> Result<Self> {
        if substeps == 0 {
            return Err(Error::domain("fast_substeps must be positive"));
        }
        self.fast_substeps = Some(substeps);
        Ok(self)
    }

    /// Escalates the stability warning to an error.
    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    /// Fast sub-steps per slow step; by default the fast step is `min(h, delta/20)`.
    pub fn substeps_for(&self, slow_step: f64) -> usize {
        self.fast_substeps.unwrap_or_else(|| {
            let fast = slow_step.min(self.delta / 20.0);
            ((slow_step / fast) * (1.0 - 1e-12)).ceil().max(1.0) as usize
        })
    }

    /// Checks the fast step against `delta`; warns, or fails when strict.
    pub fn check_stability(&self, slow_step: f64) -> Result<usize> {
        let substeps = self.substeps_for(slow_step);
        let fast_step = slow_step / substeps as f64;
        let ratio = fast_step / self.delta;
        if ratio > STABILITY_LIMIT {
            if self.strict {
                return Err(Error::Stability { fast_step, delta: self.delta, ratio, limit: STABILITY_LIMIT });
            }
            log::warn!("fast step {fast_step:e} is coarse for delta = {:e} (ratio {ratio:.3})", self.delta);
        }
        Ok(substeps)
    }
}
