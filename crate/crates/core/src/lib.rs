//! Hybrid classifiers: an interpretable substitute answers on the part
//! of the input space it covers and defers to a black-box classifier on the
//! rest.
//!
//! Two substitutes are provided:
//!
//! * [`ruleset`]: a positive and a negative rule set, trained by stochastic
//!   local search over mined candidate rules;
//! * [`linear`]: a sparse linear score with two thresholds, trained by a
//!   smoothed accelerated proximal gradient method.
//!
//! [`frontier`] sweeps the transparency weight to trace transparency versus
//! accuracy, and [`oracle`] holds brute-force references used for checking.

pub mod binarize;
pub mod data;
pub mod error;
mod fpgrowth;
pub mod frontier;
pub mod linear;
pub mod model_io;
pub mod oracle;
pub mod route;
pub mod rules;
pub mod ruleset;
pub mod synth;
pub mod verify;

pub use error::{Error, Result};
