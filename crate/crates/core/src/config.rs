//! Run configuration: one TOML file, every section optional.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureConfig, LAYOUT_VERSION};
use crate::hierarchy::HierarchyConfig;
use crate::ingest::{DEFAULT_RATE_HZ, MIN_WINDOW_SAMPLES};
use crate::synth::CohortSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Cohort directory holding `<subject>.imu.csv` and `<subject>.labels.csv`.
    pub data_dir: PathBuf,
    pub features: PathBuf,
    pub model_dir: PathBuf,
    /// Evaluation outputs.
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            data_dir: "data".into(),
            features: "out/features.csv".into(),
            model_dir: "out/model".into(),
            output_dir: "out/eval".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub rate_hz: f64,
    pub min_window_samples: usize,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            rate_hz: DEFAULT_RATE_HZ,
            min_window_samples: MIN_WINDOW_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    /// Leave-one-subject-out; when off, `evaluate` scores a trained bundle
    /// on the whole store instead.
    pub loso: bool,
    /// Run only the first `folds` folds.
    pub folds: Option<usize>,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            loso: true,
            folds: None,
            threads: 0,
        }
    }
}

impl EvaluateConfig {
    pub fn thread_count(&self) -> usize {
        match self.threads {
            0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
            n => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub layout_version: String,
    pub paths: Paths,
    pub synth: CohortSpec,
    pub ingest: IngestConfig,
    pub features: FeatureConfig,
    pub model: HierarchyConfig,
    pub evaluate: EvaluateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            layout_version: LAYOUT_VERSION.into(),
            paths: Paths::default(),
            synth: CohortSpec::default(),
            ingest: IngestConfig::default(),
            features: FeatureConfig::default(),
            model: HierarchyConfig::default(),
            evaluate: EvaluateConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Checks values; paths are checked by the commands that use them.
    pub fn validate(&self) -> Result<()> {
        if self.layout_version != LAYOUT_VERSION {
            return Err(Error::LayoutMismatch {
                model: LAYOUT_VERSION.into(),
                data: self.layout_version.clone(),
            });
        }
        if !(self.ingest.rate_hz > 0.0 && self.ingest.rate_hz.is_finite()) {
            return Err(Error::Config(format!("ingest.rate_hz must be positive, got {}", self.ingest.rate_hz)));
        }
        if self.ingest.min_window_samples == 0 {
            return Err(Error::Config("ingest.min_window_samples must be positive".into()));
        }
        if self.evaluate.folds == Some(0) {
            return Err(Error::Config("evaluate.folds must be positive".into()));
        }
        self.features
            .validate(self.ingest.rate_hz)
            .map_err(|e| Error::Config(e.to_string()))?;
        self.model.validate()?;
        for p in self.synth.profiles().iter().take(1) {
            p.validate()?;
        }
        Ok(())
    }
}
