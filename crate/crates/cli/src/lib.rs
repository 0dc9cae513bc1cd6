//! Staged command-line pipeline around `busshare-core`.
//!
//! Each stage reads upstream artifacts from the output directory, writes its
//! own atomically, and records checksums in `manifest.json` so unchanged
//! stages are skipped on rerun.

pub mod artifacts;
pub mod config;
pub mod fixture;
pub mod manifest;
pub mod pipeline;

pub use config::PipelineConfig;
pub use pipeline::{Pipeline, Stage, StageError, StageReport};
