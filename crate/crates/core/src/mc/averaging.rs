use serde::{Deserialize, Serialize};

use super::rare_event::{simulate, stream_index};
use crate::error::{Error, Result};
use crate::fbm::{FbmSpec, RngStream, SamplingMethod};
use crate::fraccalc::{holder_seminorm, Grid, GridPath};
use crate::multiscale::{sample_fast_noise, solve_averaged, solve_slow_fast, AveragedDrift, ScaleParams, SystemSpec};
use crate::par;

/// Distance of the slow component from the averaged path as `delta` shrinks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingStudy {
    pub hurst: f64,
    pub horizon: f64,
    pub n_steps: usize,
    /// Used when `slow_noise` is on.
    pub epsilon: f64,
    /// Off: the slow channel carries no fBm term.
    pub slow_noise: bool,
    pub delta_schedule: Vec<f64>,
    pub n_samples: usize,
    /// Exponent of the Hölder seminorm distance.
    pub alpha: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fast_substeps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaError {
    pub delta: f64,
    /// Mean over samples of `max_i |x_i - x̄_i|`.
    pub mean_sup_error: f64,
    pub sup_error_stderr: f64,
    /// Mean over samples of the discrete α-Hölder seminorm of `x - x̄`.
    pub mean_holder_error: f64,
    pub holder_error_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingReport {
    pub system: String,
    pub per_delta: Vec<DeltaError>,
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn run_averaging_study(
    spec: &SystemSpec,
    drift: &AveragedDrift,
    study: &AveragingStudy,
) -> Result<AveragingReport> {
    if study.delta_schedule.is_empty() || study.n_samples == 0 {
        return Err(Error::Plan("averaging study needs deltas and samples".into()));
    }
    let grid = Grid::new(study.horizon, study.n_steps)?;
    let xbar = solve_averaged(drift, &spec.x0, &grid)?;
    let epsilon = if study.slow_noise { study.epsilon } else { 1.0 };
    let fbm = FbmSpec::new(study.hurst, spec.dims.d1, grid, SamplingMethod::Cholesky)?;
    let mut per_delta = Vec::with_capacity(study.delta_schedule.len());
    for (level, &delta) in study.delta_schedule.iter().enumerate() {
        let mut scales = ScaleParams::new(epsilon, delta)?;
        if let Some(k) = study.fast_substeps {
            scales = scales.with_fast_substeps(k)?;
        }
        let errors = par::try_map_indexed(study.n_samples, |k| {
            let stream = RngStream::new(study.seed, stream_index(level, k));
            let path = if study.slow_noise {
                simulate(spec, &fbm, &scales, stream)?
            } else {
                let mut rng = stream.rng();
                let w = sample_fast_noise(spec, &grid, &scales, &mut rng)?;
                solve_slow_fast(spec, &scales, &GridPath::zeros(grid, spec.dims.d1), w.as_ref())?
            };
            let diff = path.slow.lincomb(1.0, &xbar, -1.0)?;
            let sup = path.slow.sup_distance(&xbar)?;
            Ok((sup, holder_seminorm(&diff, study.alpha)))
        })?;
        let (sups, holders): (Vec<f64>, Vec<f64>) = errors.into_iter().unzip();
        let (mean_sup_error, sup_error_stderr) = mean_stderr(&sups);
        let (mean_holder_error, holder_error_stderr) = mean_stderr(&holders);
        log::info!("delta = {delta:e}: mean sup error {mean_sup_error:.4e}");
        per_delta.push(DeltaError { delta, mean_sup_error, sup_error_stderr, mean_holder_error, holder_error_stderr });
    }
    Ok(AveragingReport { system: spec.name.clone(), per_delta })
}
