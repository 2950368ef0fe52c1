//! Laser degradation simulation and failure-mode classification: a
//! physics-based trajectory generator, windowing and partial-failure
//! preprocessing, a from-scratch LSTM, classical baselines and metrics.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::field_reassign_with_default)]

pub mod baselines;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod degradation;
pub mod error;
pub mod experiment;
pub mod io;
pub mod metrics;
pub mod mode;
pub mod neural;
pub mod pipeline;
pub mod seeds;

pub use error::{Error, Result};
pub use mode::DegradationMode;
