use std::path::{Path, PathBuf};

use mixfbm::fbm::SamplingMethod;
use mixfbm::ldp::RateOptions;
use mixfbm::mc::{DeltaRule, Event};
use mixfbm::multiscale::{ErgodicParams, Lattice, ScaleParams, SystemParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// One run of any subcommand. Task blocks not used by the command are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: String,
    #[serde(default)]
    pub system_params: SystemParams,
    pub hurst: f64,
    pub alpha: f64,
    pub horizon: f64,
    pub n_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<ScalesConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub sample: SampleConfig,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub average: Option<AverageConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalesConfig {
    pub epsilon: f64,
    /// Explicit delta; otherwise `delta_rule`, otherwise `epsilon^2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_rule: Option<DeltaRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fast_substeps: Option<usize>,
}

impl ScalesConfig {
    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or_else(|| self.delta_rule.unwrap_or_default().delta(self.epsilon))
    }

    pub fn params(&self, strict: bool) -> Result<ScaleParams> {
        let mut s = ScaleParams::new(self.epsilon, self.delta())?.strict(strict);
        if let Some(k) = self.fast_substeps {
            s = s.with_fast_substeps(k)?;
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub n_paths: usize,
    pub dim: usize,
    pub method: SamplingMethod,
    /// Side of the node lattice used by the covariance diagnostic.
    pub covariance_lattice: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { n_paths: 1, dim: 1, method: SamplingMethod::Cholesky, covariance_lattice: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub n_paths: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { n_paths: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftConfig {
    ClosedForm,
    Ergodic { params: ErgodicParams, lattice: Lattice },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AverageConfig {
    pub delta_schedule: Vec<f64>,
    pub n_samples: usize,
    /// With slow noise on, `scales.epsilon` sets its size.
    #[serde(default)]
    pub slow_noise: bool,
    #[serde(default = "closed_form")]
    pub drift: DriftConfig,
}

fn closed_form() -> DriftConfig {
    DriftConfig::ClosedForm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RateTarget {
    HitEndpoint(Vec<f64>),
    /// `a · x_T >= b`, lower-enveloped over `candidates`.
    EnterSet {
        a: Vec<f64>,
        b: f64,
        candidates: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub target: RateTarget,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ball_bound: Option<f64>,
    #[serde(default)]
    pub options: RateOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub event: Event,
    pub epsilon_schedule: Vec<f64>,
    #[serde(default)]
    pub delta_rule: DeltaRule,
    pub n_samples: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_secs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fast_substeps: Option<usize>,
    /// Endpoint candidates for comparing decay rates with the rate function;
    /// needs an `endpoint_exceeds` event.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consistency_candidates: Option<Vec<Vec<f64>>>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Domain checks that do not need a built system.
    pub fn validate(&self) -> Result<()> {
        let h = self.hurst;
        if !(h > 0.5 && h < 1.0) {
            return Err(CliError::config(format!("hurst must lie in (1/2, 1), got {h}")));
        }
        if !(self.alpha > 1.0 - h && self.alpha < 0.5) {
            return Err(CliError::config(format!(
                "alpha must lie in (1 - H, 1/2) = ({}, 0.5), got {}",
                1.0 - h,
                self.alpha
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(CliError::config("horizon must be positive"));
        }
        if self.n_steps == 0 {
            return Err(CliError::config("n_steps must be positive"));
        }
        if let Some(s) = &self.scales {
            let (eps, delta) = (s.epsilon, s.delta());
            if !(eps > 0.0 && eps <= 1.0 && delta > 0.0 && delta < eps) {
                return Err(CliError::config(format!(
                    "scales need 0 < delta < epsilon <= 1, got delta = {delta}, epsilon = {eps}"
                )));
            }
        }
        if self.sample.dim == 0 || self.sample.covariance_lattice == 0 {
            return Err(CliError::config("sample.dim and sample.covariance_lattice must be positive"));
        }
        Ok(())
    }

    pub fn scales(&self) -> Result<ScaleParams> {
        self.scales.as_ref().ok_or_else(|| CliError::config("this command needs a `scales` block"))?.params(self.strict)
    }

    /// Stable digest of everything that affects outputs (the output directory does not).
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        crate::output::sha256_hex(&json)
    }
}
