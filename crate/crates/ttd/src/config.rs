//! Experiment configuration, read from JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ttd_core::{
    BaselineKind, BaselineParams, BasisConfig, ClassifierConfig, EngineConfig, MemoryConfig,
};

use crate::error::{Error, Result};
use crate::synthetic::SyntheticSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Ours,
    Euclidean,
    Cosine,
    Magnitude,
    Entropy,
}

impl Method {
    pub fn baseline(self) -> Option<BaselineKind> {
        match self {
            Method::Ours => None,
            Method::Euclidean => Some(BaselineKind::Euclidean),
            Method::Cosine => Some(BaselineKind::Cosine),
            Method::Magnitude => Some(BaselineKind::Magnitude),
            Method::Entropy => Some(BaselineKind::Entropy),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelfCorrectionConfig {
    pub fraction: f64,
    /// Run a pass after every `every` stream samples; 0 disables.
    pub every: u64,
}

impl Default for SelfCorrectionConfig {
    fn default() -> Self {
        Self {
            fraction: 0.1,
            every: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic { spec: SyntheticSpec, seed: u64 },
    Files { seed_set: PathBuf, stream: PathBuf },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic {
            spec: SyntheticSpec::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub basis: BasisConfig,
    pub memory: MemoryConfig,
    pub classifier: ClassifierConfig,
    pub self_correction: SelfCorrectionConfig,
    pub method: Method,
    /// Baseline threshold; unused by `ours`.
    pub tau: f64,
    /// Softmax temperature of the entropy baseline.
    pub temperature: f64,
    pub data: DataSource,
    /// Master seed of the engine RNG.
    pub seed: u64,
    /// Record the real-time curves every `curve_stride` steps.
    pub curve_stride: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            basis: BasisConfig::default(),
            memory: MemoryConfig::default(),
            classifier: ClassifierConfig::default(),
            self_correction: SelfCorrectionConfig::default(),
            method: Method::Ours,
            tau: 1.0,
            temperature: 0.1,
            data: DataSource::default(),
            seed: 0,
            curve_stride: 50,
        }
    }
}

impl ExperimentConfig {
    pub fn engine(&self) -> EngineConfig {
        EngineConfig {
            basis: self.basis.clone(),
            memory: self.memory.clone(),
            classifier: self.classifier.clone(),
            seed: self.seed,
        }
    }

    pub fn baseline(&self) -> Option<BaselineParams> {
        self.method.baseline().map(|kind| BaselineParams {
            kind,
            tau: self.tau,
            temperature: self.temperature,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.engine()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if let Some(p) = self.baseline() {
            p.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        let f = self.self_correction.fraction;
        if !(0.0..=ttd_core::selfcorrect::MAX_FRACTION).contains(&f) {
            return Err(Error::Config(format!(
                "self_correction.fraction must lie in [0, {}], got {f}",
                ttd_core::selfcorrect::MAX_FRACTION
            )));
        }
        if self.curve_stride == 0 {
            return Err(Error::Config("curve_stride must be positive".into()));
        }
        if let DataSource::Synthetic { spec, .. } = &self.data {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative data paths resolve against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        if let DataSource::Files { seed_set, stream } = &mut cfg.data {
            let base = path.parent().unwrap_or(Path::new("."));
            for p in [seed_set, stream] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
