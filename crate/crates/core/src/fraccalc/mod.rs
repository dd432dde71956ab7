//! Discrete fractional calculus on uniform grids.
//!
//! Paths are sampled at the nodes of a [`Grid`] and treated as piecewise
//! linear between nodes. Singular kernels are integrated in closed form
//! against that interpolant (product integration), which removes the
//! kernel singularity from the discretization error.

mod norms;
mod operators;
mod path;
pub(crate) mod weights;
mod young;

pub use norms::{
    holder_seminorm, lambda_alpha, norm_1malpha_infty, norm_1malpha_infty_strided, norm_alpha_1, norm_alpha_infty,
};
pub use operators::{rl_integral_left, weyl_derivative_left, weyl_derivative_right};
pub use path::{Grid, GridPath, HolderExponent, MaskedPath};
pub use young::{young_integral, young_integral_fractional};

use crate::error::{Error, Result};

pub(crate) fn check_order(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("fractional order {alpha} outside (0, 1)")))
    }
}
