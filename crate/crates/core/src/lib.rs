// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fbm;
pub mod fraccalc;
pub mod ldp;
pub mod mc;
pub mod multiscale;
pub mod par;

pub use error::{Error, Result};
