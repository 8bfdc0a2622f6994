//! Layered Gaussian-process estimation of Parkinsonian motor state from
//! wrist-worn inertial data.

pub mod cli;
pub mod config;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod features;
pub mod gp;
pub mod hierarchy;
pub mod ingest;
pub mod labels;
pub mod synth;

pub use error::{Error, Result};
