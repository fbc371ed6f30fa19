//! File formats, synthetic data, the experiment harness and report
//! rendering around [`ttd_core`].

pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod report;
pub mod synthetic;

pub use config::{DataSource, ExperimentConfig, Method, SelfCorrectionConfig};
pub use dataset::{load_features, save_features, LabeledFeatures};
pub use error::{Error, Result};
pub use experiment::{run_experiment, run_on_data, EvaluationReport, RunFailure, RunOutput};
pub use synthetic::{generate_synthetic, SyntheticData, SyntheticSpec};
pub use ttd_core;

use std::path::Path;

/// Writes an engine snapshot to `path`.
pub fn save_snapshot(state: &ttd_core::TtdState, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, ttd_core::snapshot::encode(state)).map_err(|e| Error::io(path, e))
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<ttd_core::TtdState> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(ttd_core::snapshot::decode(&bytes)?)
}
