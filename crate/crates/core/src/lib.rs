//! Vanilla ALPS inverse-temperature chain on a two-level (mode, rung) state
//! space, its skew Brownian motion scaling limit, and the tools used to check
//! one against the other.

pub mod appendix;
pub mod artifact;
pub mod config;
pub mod error;
pub mod harness;
pub mod ladder;
pub mod model;
pub mod numeric;
pub mod seed;
pub mod sim;
pub mod skewbm;
pub mod stats;
pub mod svg;
pub mod transform;

pub use error::{Error, Result};
