use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::plan::{proportion, Event, ExperimentPlan};
use crate::error::{Error, Result};
use crate::fbm::{sample_fbm_with, FbmSpec, RngStream, SamplingMethod};
use crate::fraccalc::Grid;
use crate::multiscale::{build_system, sample_fast_noise, solve_slow_fast, ScaleParams, SystemSpec};
use crate::par;

/// Samples simulated between budget checks.
pub const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonEstimate {
    pub epsilon: f64,
    pub delta: f64,
    pub p_hat: f64,
    pub stderr: f64,
    pub n_hits: usize,
    pub n_samples: usize,
    /// `ε log p̂`; absent when there were no hits.
    pub eps_log_p: Option<f64>,
    /// Fewer samples than planned because the budget ran out.
    pub truncated: bool,
    /// Excluded from serialized reports so they stay reproducible.
    #[serde(skip)]
    pub runtime_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub system: String,
    pub event: Event,
    pub per_epsilon: Vec<EpsilonEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_reference: Option<f64>,
}

/// One slow trajectory of stream `stream`; fBm first, then the fast noise.
pub(crate) fn simulate(
    spec: &SystemSpec,
    fbm: &FbmSpec,
    scales: &ScaleParams,
    stream: RngStream,
) -> Result<crate::multiscale::SlowFastPath> {
    let mut rng = stream.rng();
    let bh = sample_fbm_with(fbm, &mut rng)?;
    let w = sample_fast_noise(spec, fbm.grid(), scales, &mut rng)?;
    solve_slow_fast(spec, scales, &bh, w.as_ref())
}

/// Stream index of sample `k` at schedule position `level`.
pub(crate) fn stream_index(level: usize, k: usize) -> u64 {
    ((level as u64) << 32) | k as u64
}

/// Estimates the event probability at every scheduled epsilon.
pub fn run_rare_event(plan: &ExperimentPlan) -> Result<EstimateReport> {
    let spec = build_system(&plan.system, &plan.system_params)?;
    plan.validate(&spec)?;
    let grid = Grid::new(plan.horizon, plan.n_steps)?;
    let fbm = FbmSpec::new(plan.hurst, spec.dims.d1, grid, SamplingMethod::Cholesky)?;
    let mut per_epsilon = Vec::with_capacity(plan.epsilon_schedule.len());
    for (level, scales) in plan.scales()?.into_iter().enumerate() {
        let target = plan.n_samples[level];
        let start = Instant::now();
        let mut n_hits = 0;
        let mut done = 0;
        let mut truncated = false;
        while done < target {
            let chunk = CHUNK.min(target - done);
            let hits = par::try_map_indexed(chunk, |k| {
                let path =
                    simulate(&spec, &fbm, &scales, RngStream::new(plan.master_seed, stream_index(level, done + k)))?;
                Ok(plan.event.occurs(&path.slow))
            })?;
            n_hits += hits.iter().filter(|h| **h).count();
            done += chunk;
            if let Some(budget) = plan.budget_secs {
                if done < target && start.elapsed().as_secs_f64() > budget {
                    log::warn!("budget exhausted at epsilon = {} after {done} of {target} samples", scales.epsilon());
                    truncated = true;
                    break;
                }
            }
        }
        let (p_hat, stderr) = proportion(n_hits, done);
        let eps_log_p = (n_hits > 0).then(|| scales.epsilon() * p_hat.ln());
        let runtime_secs = start.elapsed().as_secs_f64();
        log::info!("epsilon = {}: {n_hits}/{done} hits, p = {p_hat:.4e} ({runtime_secs:.1} s)", scales.epsilon());
        if level == 0 && n_hits == 0 {
            return Err(Error::Plan(format!(
                "no hits at the largest epsilon ({}) in {done} samples; event too rare to calibrate",
                scales.epsilon()
            )));
        }
        per_epsilon.push(EpsilonEstimate {
            epsilon: scales.epsilon(),
            delta: scales.delta(),
            p_hat,
            stderr,
            n_hits,
            n_samples: done,
            eps_log_p,
            truncated,
            runtime_secs,
        });
    }
    Ok(EstimateReport { system: spec.name, event: plan.event.clone(), per_epsilon, rate_reference: None })
}
