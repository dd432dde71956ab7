use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fraccalc::GridPath;
use crate::multiscale::{ScaleParams, SystemParams, SystemSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    /// `a · x_T >= b`.
    EndpointExceeds { a: Vec<f64>, b: f64 },
    /// `sup_t |x_t - x0| > r`.
    SupNormExceeds(f64),
}

impl Event {
    pub fn occurs(&self, slow: &GridPath) -> bool {
        match self {
            Event::EndpointExceeds { a, b } => slow.last().iter().zip(a).map(|(x, a)| x * a).sum::<f64>() >= *b,
            Event::SupNormExceeds(r) => {
                let x0 = slow.at(0);
                (1..slow.grid().n_nodes())
                    .any(|i| slow.at(i).iter().zip(x0).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt() > *r)
            }
        }
    }

    fn validate(&self, m: usize) -> Result<()> {
        match self {
            Event::EndpointExceeds { a, .. } if a.len() != m => {
                Err(Error::usage("event normal has the wrong dimension"))
            }
            Event::SupNormExceeds(r) if !(*r >= 0.0) => Err(Error::domain("sup-norm radius must be non-negative")),
            _ => Ok(()),
        }
    }
}

/// Maps `epsilon` to `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaRule {
    /// `delta = epsilon^exponent`, `exponent > 1`.
    Power(f64),
    /// `delta = ratio * epsilon`; not `o(epsilon)`, for diagnostics.
    Ratio(f64),
}

impl Default for DeltaRule {
    fn default() -> Self {
        DeltaRule::Power(2.0)
    }
}

impl DeltaRule {
    pub fn delta(&self, epsilon: f64) -> f64 {
        match *self {
            DeltaRule::Power(p) => epsilon.powf(p),
            DeltaRule::Ratio(r) => r * epsilon,
        }
    }
}

/// A rare-event Monte Carlo experiment over a schedule of `epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub system: String,
    #[serde(default)]
    pub system_params: SystemParams,
    pub hurst: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub event: Event,
    pub epsilon_schedule: Vec<f64>,
    #[serde(default)]
    pub delta_rule: DeltaRule,
    /// One count per scheduled epsilon.
    pub n_samples: Vec<usize>,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fast_substeps: Option<usize>,
    /// Wall-clock budget per epsilon in seconds; stops between chunks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_secs: Option<f64>,
    #[serde(default)]
    pub strict: bool,
}

impl ExperimentPlan {
    pub fn scales(&self) -> Result<Vec<ScaleParams>> {
        self.epsilon_schedule
            .iter()
            .map(|&eps| {
                let mut s = ScaleParams::new(eps, self.delta_rule.delta(eps))?.strict(self.strict);
                if let Some(k) = self.fast_substeps {
                    s = s.with_fast_substeps(k)?;
                }
                Ok(s)
            })
            .collect()
    }

    /// Checks the schedule contract against `spec`.
    pub fn validate(&self, spec: &SystemSpec) -> Result<()> {
        if self.epsilon_schedule.is_empty() {
            return Err(Error::Plan("epsilon schedule is empty".into()));
        }
        if self.n_samples.len() != self.epsilon_schedule.len() {
            return Err(Error::Plan("n_samples needs one entry per scheduled epsilon".into()));
        }
        if self.n_samples.contains(&0) {
            return Err(Error::Plan("sample counts must be positive".into()));
        }
        if !self.epsilon_schedule.windows(2).all(|w| w[1] < w[0]) {
            return Err(Error::Plan("epsilon schedule must be strictly decreasing".into()));
        }
        if let DeltaRule::Power(p) = self.delta_rule {
            if !(p > 1.0) {
                return Err(Error::Plan(format!("delta = epsilon^{p} is not o(epsilon)")));
            }
        }
        let scales = self.scales()?;
        let ratios: Vec<f64> = scales.iter().map(|s| s.delta() / s.epsilon()).collect();
        if !ratios.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)) {
            return Err(Error::Plan("delta/epsilon must be non-increasing along the schedule".into()));
        }
        if spec.has_fast_channel() {
            let bound = (spec.constants.beta2 / 2.0).powi(2);
            if let Some(r) = ratios.iter().find(|r| **r > bound) {
                let msg = format!("delta/epsilon = {r} exceeds (beta2/2)^2 = {bound}");
                if self.strict {
                    return Err(Error::Plan(msg));
                }
                log::warn!("{msg}");
            }
        }
        self.event.validate(spec.dims.m)?;
        Ok(())
    }
}

/// `(p̂, √(p̂(1-p̂)/n))`.
pub fn proportion(n_hits: usize, n: usize) -> (f64, f64) {
    let p = n_hits as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}
