//! Packet-rate traffic forecasting.
//!
//! The crate covers the full path from a captured packet log to a comparison
//! of one-step-ahead predictors:
//!
//! * [`ingest`] reads `time,protocol` packet exports or pre-binned `value`
//!   series and bins packets into a per-second rate.
//! * [`preprocess`] turns a raw rate into a scaled stationary series
//!   (`ln(1+x)`, overlapping box centering, z-score).
//! * [`arma`] fits ARMA(p,q) models by two-stage least squares and produces
//!   rolling one-step predictions.
//! * [`kalman`] implements the linear Kalman recursion with a scalar
//!   local-level default.
//! * [`synth`] generates seeded synthetic traffic and state-space traces.
//! * [`eval`] scores predictors (MSE and wall time) and renders reports.
//! * [`run`] wires the stages together behind a TOML run configuration.

pub mod arma;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod kalman;
pub mod preprocess;
pub mod rng;
pub mod run;
pub mod series;
pub mod synth;

pub use error::{Error, Result};
pub use series::TimeSeries;
