//! Image-source spatial room impulse responses for SELD data synthesis.

pub mod audio;
pub mod bank;
pub mod calibration;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod ism;
pub mod metrics;
pub mod mixer;
pub mod plot;

pub use error::{Error, Result};
