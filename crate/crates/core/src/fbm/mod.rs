//! Fractional Brownian motion: covariance, Volterra kernel, samplers and
//! the Cameron-Martin map for controls.

mod cameron_martin;
mod diagnostics;
mod hypergeometric;
mod kernel;
mod rng;
mod sampler;

pub use cameron_martin::l2_norm_sq;
pub use cameron_martin::{cameron_martin_map, cm_norm_sq, control_time_derivative, Control};
pub use diagnostics::{
    covariance_diagnostic, covariance_lattice, CovarianceDiagnostic, CovarianceEntry, COVARIANCE_PASS_SHARE,
};
pub use hypergeometric::{kernel_constant, VolterraKernel};
pub use kernel::{
    derivative_operator, derivative_operator_uncached, kernel_gram, kernel_operator, kernel_operator_uncached,
    NodeOperator,
};
pub use rng::RngStream;
pub(crate) use sampler::check_hurst;
pub use sampler::{sample_brownian, sample_fbm, sample_fbm_with, FbmSpec, SamplingMethod};

use crate::error::{Error, Result};

/// `R_H(s, t) = ½(t^{2H} + s^{2H} - |t - s|^{2H})`.
pub fn fbm_covariance(s: f64, t: f64, hurst: f64) -> f64 {
    let p = 2.0 * hurst;
    0.5 * (t.powf(p) + s.powf(p) - (t - s).abs().powf(p))
}

/// `K_H(t, s)`; zero for `s > t`.
pub fn volterra_kernel(t: f64, s: f64, hurst: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain(format!("kernel is singular at s <= 0 (s = {s})")));
    }
    if !(0.5..1.0).contains(&hurst) {
        return Err(Error::domain(format!("Hurst index must lie in [1/2, 1), got {hurst}")));
    }
    Ok(VolterraKernel::new(hurst).eval(t, s))
}
