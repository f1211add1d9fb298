//! Transportation mode detection from Wi-Fi sensor logs.
//!
//! The pipeline turns raw pod logs into labelled walking / biking / driving
//! predictions:
//!
//! 1. [`trace`]: parse logs, group records into pod visits, pair visits into trips.
//! 2. [`features`]: fifteen per-trip predictors and min-max normalization.
//! 3. [`resnet`]: residual MLP built on the [`nn`] kernel.
//! 4. [`trainer`]: supervised and pseudo-label semi-supervised training.
//! 5. [`eval`]: k-fold cross-validation, confusion matrices, sweeps.
//!
//! [`sim`] generates synthetic logs for a loop of pods, and [`cli`] wires the
//! stages together behind the `wifi-mode` binary.

pub mod cli;
pub mod error;
pub mod eval;
pub mod features;
pub mod mode;
pub mod nn;
pub mod pipeline;
pub mod resnet;
pub mod seed;
pub mod sim;
pub mod trace;
pub mod trainer;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use mode::TravelMode;
