//! Batch harness around `gazelab-core`: datasets on disk, run
//! configuration, simulation and saliency batches, metric reports and
//! scanpath figures.

pub mod config;
pub mod dataset;
pub mod fixture;
pub mod render;
pub mod session;
pub mod validate;

pub use config::{ConfigError, RunConfig};
pub use dataset::{DatasetLayout, Stimulus};
pub use session::{Outcome, Session};
