//! Nonlocal gradient flows of jump processes on finite state spaces:
//! densities, kernels, dissipation functionals, time integration and the
//! energy-dissipation ledger.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod densities;
pub mod error;
pub mod evolution;
pub mod experiments;
pub mod extreal;
pub mod functionals;
pub mod ledger;
pub mod measure;
pub mod quadrature;
pub mod space_kernel;

pub use error::{Error, Result};
