//! Dynamic state estimation of a synchronous generator under measurement
//! attacks, at desk scale.
//!
//! The toolkit covers the full loop:
//!
//! * [`dynamics`] — fourth-order two-axis generator with governor and exciter,
//!   integrated against a single-machine–infinite-bus network or an externally
//!   supplied terminal-voltage trace;
//! * [`measurement`] — PMU-style measurement streams (rotor angle, rotor
//!   speed, electrical power) with configurable Gaussian noise and the
//!   operating-point-dependent noise covariance used by the filters;
//! * [`attacks`] — stealthy false-data injection against the linearized
//!   measurement model, and a Bernoulli packet-loss (denial-of-service)
//!   channel;
//! * [`estimators`] — cubature Kalman filter and its Huber-robustified
//!   variant, plus a forecast-vs-estimate attack identification rule;
//! * [`evaluation`] — accuracy indices and per-step timing statistics;
//! * [`harness`] — scenario configuration, the end-to-end pipeline, batch
//!   runs, and plottable data export.

// Validation predicates are written as `!(x > 0.0)` on purpose: NaN must
// fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacks;
pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod harness;
pub mod measurement;
pub mod seed;
mod window;

pub use error::{Error, Result};
pub use window::TimeWindow;
