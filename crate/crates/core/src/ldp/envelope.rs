use super::{minimize_rate, Constraint, RateOptions, RateProblem, RateResult};
use crate::error::{Error, Result};
use crate::multiscale::solve_averaged;
use crate::par;

#[derive(Debug, Clone)]
pub struct EnvelopeResult {
    /// Smallest energy over the candidates; zero when the averaged endpoint lies in the set.
    pub energy: f64,
    /// Index of the minimizing candidate, `None` when the averaged endpoint lies in the set.
    pub best: Option<usize>,
    pub candidates: Vec<RateResult>,
}

/// Lower envelope of endpoint rates over candidate points of a half-space.
pub fn rate_lower_envelope(
    problem: &RateProblem,
    candidates: &[Vec<f64>],
    opts: &RateOptions,
) -> Result<EnvelopeResult> {
    let Constraint::EnterSet { a, b } = &problem.constraint else {
        return Err(Error::usage("rate_lower_envelope needs a half-space constraint"));
    };
    if candidates.is_empty() {
        return Err(Error::usage("candidate list is empty"));
    }
    let inside = |z: &[f64]| z.iter().zip(a).map(|(z, a)| z * a).sum::<f64>() >= *b - 1e-12;
    if let Some(k) = candidates.iter().position(|z| z.len() != a.len() || !inside(z)) {
        return Err(Error::usage(format!("candidate {k} lies outside the set")));
    }
    let averaged = solve_averaged(&problem.drift, &problem.spec.x0, &problem.grid)?;
    if inside(averaged.last()) {
        return Ok(EnvelopeResult { energy: 0.0, best: None, candidates: Vec::new() });
    }
    let results = par::try_map_indexed(candidates.len(), |k| {
        minimize_rate(&problem.with_constraint(Constraint::HitEndpoint(candidates[k].clone())), opts)
    })?;
    let (best, energy) = results
        .iter()
        .enumerate()
        .map(|(k, r)| (k, r.energy))
        .fold((0, f64::INFINITY), |acc, (k, e)| if e < acc.1 { (k, e) } else { acc });
    Ok(EnvelopeResult { energy, best: Some(best), candidates: results })
}
