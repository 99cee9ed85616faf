//! File formats, synthetic data and the end-to-end pipeline around
//! [`cmc_core`].

pub mod config;
pub mod error;
pub mod format;
pub mod pgm;
pub mod pipeline;
pub mod synth;

pub use cmc_core;
pub use config::PipelineConfig;
pub use error::{Error, Result, Stage};
pub use pipeline::{run_pipeline, Model};
pub use synth::{generate_synthetic, SyntheticImage};
