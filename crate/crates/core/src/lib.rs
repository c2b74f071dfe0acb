//! SGD with and without replacement, stochastic modified equations and
//! their weak errors, permutons, epoched Brownian noise and Young
//! differential equations.

// `!(x > 0.0)` is the idiom used to reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod epoched_noise;
pub mod error;
pub mod error_analysis;
pub mod exec;
pub mod experiment;
pub mod invariants;
pub mod linalg;
pub mod permutons;
pub mod risk_models;
pub mod rng;
pub mod sgd;
pub mod sme;
pub mod stats;
pub mod weak_limits;
pub mod young;

#[cfg(test)]
mod proptests;

pub use error::{Error, Result};
pub use exec::Execution;
pub use rng::{derive_stream, StreamKey};
