//! Dense motion-field toolkit: flow fields and their composition, forward-backward
//! occlusion masking, a block-matching flow estimator, synthetic scenes with
//! analytic ground truth, and Monte-Carlo error-accumulation experiments.

pub mod cli;
pub mod consistency;
pub mod error;
pub mod estimator;
pub mod grid;
pub mod harness;
pub mod io;
pub mod motion;
pub mod synth;

pub use error::{Error, Result};
