use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellType {
    Gru,
    Lstm,
}

impl CellType {
    /// Number of stacked gate blocks in the input and recurrent matrices.
    pub fn gates(self) -> usize {
        match self {
            CellType::Gru => 3,
            CellType::Lstm => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CellType::Gru => "gru",
            CellType::Lstm => "lstm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputMode {
    TargetOnly,
    TargetPlusInterference,
}

impl InputMode {
    pub fn streams(self) -> usize {
        match self {
            InputMode::TargetOnly => 1,
            InputMode::TargetPlusInterference => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InputMode::TargetOnly => "target-only",
            InputMode::TargetPlusInterference => "target-plus-interference",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostfilterConfig {
    pub cell: CellType,
    pub layers: usize,
    pub hidden: usize,
    pub input_mode: InputMode,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
    #[serde(default = "default_bins")]
    pub feature_bins: usize,
    #[serde(default)]
    pub input_norm: InputNorm,
}

/// Fixed affine map `(x - offset) * scale` applied to every input feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputNorm {
    pub offset: f64,
    pub scale: f64,
}

impl Default for InputNorm {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl InputNorm {
    pub const IDENTITY: Self = Self { offset: 0.0, scale: 1.0 };

    /// Zero mean and unit variance over every value of `values`.
    pub fn fit<'a>(values: impl IntoIterator<Item = &'a f32>) -> Self {
        let (mut n, mut sum, mut sq) = (0usize, 0.0f64, 0.0f64);
        for &v in values {
            n += 1;
            sum += v as f64;
            sq += v as f64 * v as f64;
        }
        if n == 0 {
            return Self::IDENTITY;
        }
        let mean = sum / n as f64;
        let var = (sq / n as f64 - mean * mean).max(0.0);
        Self { offset: mean, scale: if var > 1e-12 { 1.0 / var.sqrt() } else { 1.0 } }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }
}

fn default_dropout() -> f64 {
    0.2
}

fn default_bins() -> usize {
    257
}

impl PostfilterConfig {
    pub fn new(cell: CellType, layers: usize, hidden: usize, input_mode: InputMode) -> Self {
        Self {
            cell,
            layers,
            hidden,
            input_mode,
            dropout: default_dropout(),
            feature_bins: default_bins(),
            input_norm: InputNorm::IDENTITY,
        }
    }

    pub fn with_feature_bins(mut self, bins: usize) -> Self {
        self.feature_bins = bins;
        self
    }

    pub fn with_dropout(mut self, p: f64) -> Self {
        self.dropout = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::Config("postfilter needs at least one layer".into()));
        }
        if self.hidden == 0 || self.feature_bins == 0 {
            return Err(Error::Config("hidden size and feature bins must be positive".into()));
        }
        let n = self.input_norm;
        if !(n.offset.is_finite() && n.scale.is_finite() && n.scale > 0.0) {
            return Err(Error::Config(format!("invalid input normalization {n:?}")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.feature_bins * self.input_mode.streams()
    }

    pub fn output_width(&self) -> usize {
        self.feature_bins
    }

    /// Input width seen by recurrent layer `layer`.
    pub fn layer_input_width(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_width()
        } else {
            self.hidden
        }
    }

    /// `G (F H + H H + 2 H)` per recurrent layer plus `H K + K` for the output layer.
    pub fn parameter_count(&self) -> usize {
        let h = self.hidden;
        let rnn: usize = (0..self.layers)
            .map(|l| self.cell.gates() * (self.layer_input_width(l) * h + h * h + 2 * h))
            .sum();
        rnn + h * self.output_width() + self.output_width()
    }

    /// Short identifier such as `gru-1-128`.
    pub fn label(&self) -> String {
        format!("{}-{}-{}", self.cell.name(), self.layers, self.hidden)
    }
}

/// Exponent on `|Y_target|` in the weighted mask loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub beta: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { beta: 0.25 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("loss exponent {} must be positive", self.beta)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths_follow_input_mode() {
        let b = PostfilterConfig::new(CellType::Gru, 1, 128, InputMode::TargetOnly);
        let p = PostfilterConfig { input_mode: InputMode::TargetPlusInterference, ..b.clone() };
        assert_eq!(b.input_width(), 257);
        assert_eq!(p.input_width(), 514);
        assert_eq!(p.output_width(), 257);
    }

    #[test]
    fn gru_1_128_count() {
        let c = PostfilterConfig::new(CellType::Gru, 1, 128, InputMode::TargetOnly);
        assert_eq!(c.parameter_count(), 3 * (257 * 128 + 128 * 128 + 256) + 128 * 257 + 257);
    }

    #[test]
    fn validation() {
        let mut c = PostfilterConfig::new(CellType::Lstm, 2, 8, InputMode::TargetOnly);
        assert!(c.validate().is_ok());
        c.dropout = 1.0;
        assert!(c.validate().is_err());
        c.dropout = 0.2;
        c.layers = 0;
        assert!(c.validate().is_err());
        assert!(LossConfig { beta: 0.0 }.validate().is_err());
    }
}
