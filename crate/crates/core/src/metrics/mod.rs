//! Objective quality measures and spectrogram export.

mod export;
mod resample;
mod sdr;
mod stoi;

pub use export::{log_magnitude_db, read_csv, spectrogram_export, write_csv, write_pgm, ExportFormat, DB_FLOOR};
pub use resample::Resampler;
pub use sdr::{sdr, SDR_CAP_DB};
pub use stoi::{stoi, STOI_SAMPLE_RATE};

use serde::{Deserialize, Serialize};

use crate::dsp::AudioBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricName {
    Sdr,
    Stoi,
}

impl MetricName {
    pub const ALL: [MetricName; 2] = [MetricName::Sdr, MetricName::Stoi];

    pub fn name(self) -> &'static str {
        match self {
            MetricName::Sdr => "sdr",
            MetricName::Stoi => "stoi",
        }
    }

    pub fn units(self) -> &'static str {
        match self {
            MetricName::Sdr => "dB",
            MetricName::Stoi => "score",
        }
    }

    pub fn compute(self, estimate: &AudioBuffer, reference: &AudioBuffer) -> Result<MetricResult> {
        let value = match self {
            MetricName::Sdr => sdr(estimate, reference)?,
            MetricName::Stoi => stoi(estimate, reference)?,
        };
        Ok(MetricResult { name: self, value })
    }
}

impl std::str::FromStr for MetricName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sdr" => Ok(MetricName::Sdr),
            "stoi" => Ok(MetricName::Stoi),
            other => Err(Error::Config(format!("unknown metric '{other}' (expected sdr or stoi)"))),
        }
    }
}

impl std::fmt::Display for MetricName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub name: MetricName,
    pub value: f64,
}

impl MetricResult {
    pub fn units(&self) -> &'static str {
        self.name.units()
    }
}

fn check_rates(estimate: &AudioBuffer, reference: &AudioBuffer) -> Result<()> {
    if estimate.sample_rate() != reference.sample_rate() {
        return Err(Error::SampleRateMismatch { expected: reference.sample_rate(), found: estimate.sample_rate() });
    }
    Ok(())
}
