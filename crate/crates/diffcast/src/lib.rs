//! Probabilistic multi-horizon forecasting for multivariate time series.
//!
//! The engine layers three stages:
//!
//! 1. a deterministic point estimator (seasonal naive or L1-fitted linear),
//! 2. a conditional denoising model over normalized point residuals, sampled
//!    with a deterministic implicit (eta = 0) reverse process on a strided
//!    step subset, and
//! 3. two post-hoc distribution matchers: per-cell error-aware expansion of
//!    ensemble spread, and a quantile-shell coverage optimizer fitted on a
//!    calibration split.
//!
//! [`pipeline`] wires these into train / calibrate / forecast / evaluate
//! commands; the lower modules are usable on their own.

pub mod diffusion;
pub mod error;
pub mod matching;
pub mod metrics;
pub mod pipeline;
pub mod point;
pub mod rng;
pub mod schedule;
pub mod stats;

pub use error::{Error, Result};
