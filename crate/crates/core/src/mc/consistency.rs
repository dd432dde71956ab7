use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::plan::ExperimentPlan;
use super::rare_event::{run_rare_event, EstimateReport};
use crate::error::Result;
use crate::ldp::{rate_lower_envelope, RateOptions, RateProblem};

/// Relative tolerance between the extrapolated `-ε log p̂` limit and the rate.
pub const LIMIT_TOLERANCE: f64 = 0.10;
/// Gaps below this count as zero.
const GAP_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub estimates: EstimateReport,
    pub rate_reference: f64,
    /// `-ε log p̂` per scheduled epsilon (absent without hits).
    pub neg_eps_log_p: Vec<Option<f64>>,
    /// `|(-ε log p̂) - rate|` per scheduled epsilon.
    pub gaps: Vec<Option<f64>>,
    /// Gaps strictly decreasing along the schedule, or all zero.
    pub monotone: bool,
    /// Limit of `-ε log p̂` from the fit `r + aε + bε log ε` over the smallest epsilons.
    pub extrapolated_limit: Option<f64>,
    pub consistent: bool,
}

/// Compares Monte Carlo decay rates with the rate function's lower envelope.
pub fn run_ldp_consistency(
    plan: &ExperimentPlan,
    problem: &RateProblem,
    candidates: &[Vec<f64>],
    opts: &RateOptions,
) -> Result<ConsistencyReport> {
    let mut estimates = run_rare_event(plan)?;
    let rate = rate_lower_envelope(problem, candidates, opts)?.energy;
    estimates.rate_reference = Some(rate);
    Ok(judge(estimates, rate))
}

pub(crate) fn judge(estimates: EstimateReport, rate: f64) -> ConsistencyReport {
    let neg: Vec<Option<f64>> = estimates.per_epsilon.iter().map(|e| e.eps_log_p.map(|v| -v)).collect();
    let gaps: Vec<Option<f64>> = neg.iter().map(|o| o.map(|v| (v - rate).abs())).collect();
    let resolved: Option<Vec<f64>> = gaps.iter().copied().collect();
    let monotone = match &resolved {
        Some(g) if g.iter().all(|v| *v <= GAP_FLOOR) => true,
        Some(g) => g.windows(2).all(|w| w[1] < w[0]),
        None => false,
    };
    let points: Vec<(f64, f64)> =
        estimates.per_epsilon.iter().zip(&neg).filter_map(|(e, v)| v.map(|v| (e.epsilon, v))).collect();
    let extrapolated_limit = extrapolate(&points);
    let close = extrapolated_limit.is_some_and(|r| {
        if rate.abs() <= GAP_FLOOR {
            r.abs() <= LIMIT_TOLERANCE
        } else {
            (r - rate).abs() <= LIMIT_TOLERANCE * rate.abs()
        }
    });
    ConsistencyReport {
        rate_reference: rate,
        neg_eps_log_p: neg,
        gaps,
        monotone,
        extrapolated_limit,
        consistent: monotone && close,
        estimates,
    }
}

/// Value at `ε = 0` of the least-squares fit in `{1, ε, ε log ε}` through the
/// (up to three) smallest epsilons.
fn extrapolate(points: &[(f64, f64)]) -> Option<f64> {
    if points.is_empty() {
        return None;
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.truncate(3);
    let k = pts.len();
    let basis = |e: f64| [1.0, e, e * e.ln()];
    let a = DMatrix::from_fn(k, k, |r, c| basis(pts[r].0)[c]);
    let y = DVector::from_iterator(k, pts.iter().map(|p| p.1));
    a.lu().solve(&y).map(|c| c[0])
}
