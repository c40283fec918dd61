//! Nonlinear normal modes of conservative mechanical models by
//! energy-constrained shooting continuation, and task-space comparison of
//! models of different dimension.

// `!(x > 0.0)` deliberately rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuation;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod metrics;
pub mod models;
pub mod quadrature;

pub use error::{Error, Result};
