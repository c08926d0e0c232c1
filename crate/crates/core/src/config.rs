//! Experiment configuration file (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricName;
use crate::postfilter::{CellType, InputMode, PostfilterConfig};
use crate::trainer::{PipelineConfig, SimulationConfig, TrainConfig};

/// Cartesian grid of postfilter architectures to train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelGrid {
    pub cells: Vec<CellType>,
    pub layers: Vec<usize>,
    pub hidden: Vec<usize>,
    pub input_modes: Vec<InputMode>,
    pub dropout: f64,
}

impl Default for ModelGrid {
    fn default() -> Self {
        Self {
            cells: vec![CellType::Gru],
            layers: vec![1],
            hidden: vec![128],
            input_modes: vec![InputMode::TargetOnly, InputMode::TargetPlusInterference],
            dropout: 0.2,
        }
    }
}

impl ModelGrid {
    /// Both cells, one or two layers, 128/256/512 units, both input modes.
    pub fn full() -> Self {
        Self { cells: vec![CellType::Gru, CellType::Lstm], layers: vec![1, 2], hidden: vec![128, 256, 512], ..Self::default() }
    }

    /// Configurations in grid order: cell, layers, hidden, input mode.
    pub fn configs(&self, feature_bins: usize) -> Vec<PostfilterConfig> {
        let mut out = Vec::new();
        for &cell in &self.cells {
            for &layers in &self.layers {
                for &hidden in &self.hidden {
                    for &mode in &self.input_modes {
                        out.push(PostfilterConfig::new(cell, layers, hidden, mode).with_feature_bins(feature_bins).with_dropout(self.dropout));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Directory of mono WAV files; the synthetic talker is used when absent.
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed of the scene set.
    pub seed: u64,
    pub pipeline: PipelineConfig,
    pub simulation: SimulationConfig,
    pub models: ModelGrid,
    pub train: TrainConfig,
    pub metrics: Vec<MetricName>,
    pub paths: PathsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            pipeline: PipelineConfig::default(),
            simulation: SimulationConfig::default(),
            models: ModelGrid::default(),
            train: TrainConfig::default(),
            metrics: MetricName::ALL.to_vec(),
            paths: PathsConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn model_configs(&self) -> Vec<PostfilterConfig> {
        self.models.configs(self.pipeline.stft.num_bins())
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        self.simulation.validate()?;
        self.train.validate()?;
        let configs = self.model_configs();
        if configs.is_empty() {
            return Err(Error::Config("the model grid is empty".into()));
        }
        for c in &configs {
            c.validate()?;
        }
        if self.metrics.is_empty() {
            return Err(Error::Config("at least one metric is required".into()));
        }
        let min_mics = self.simulation.catalog()?.iter().map(|a| a.num_mics()).min().unwrap_or(0);
        if self.pipeline.reference_channel >= min_mics {
            return Err(Error::Config(format!(
                "reference channel {} does not exist on every array (smallest has {min_mics} microphones)",
                self.pipeline.reference_channel
            )));
        }
        Ok(())
    }
}
