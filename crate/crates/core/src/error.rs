use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs are individually valid but do not fit together (grids, dimensions).
    #[error("usage error: {0}")]
    Usage(String),

    /// A solver produced a non-finite state.
    #[error("numerical blow-up at node {node} (t = {time})")]
    BlowUp { node: usize, time: f64 },

    #[error("fast step {fast_step:e} too coarse for delta = {delta:e} (ratio {ratio:.3} > {limit})")]
    Stability { fast_step: f64, delta: f64, ratio: f64, limit: f64 },

    #[error("covariance factorization failed: {0}")]
    Factorization(String),

    #[error("estimate stderr {stderr:e} exceeds threshold {threshold:e}")]
    Precision { stderr: f64, threshold: f64 },

    #[error("sigma1 is singular at node {node}")]
    SingularSigma { node: usize },

    #[error("ill-conditioned control recovery: {0}")]
    IllConditioned(String),

    #[error("experiment plan error: {0}")]
    Plan(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    /// True for failures caused by the numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::BlowUp { .. }
                | Error::Stability { .. }
                | Error::Factorization(_)
                | Error::Precision { .. }
                | Error::SingularSigma { .. }
                | Error::IllConditioned(_)
        )
    }
}
