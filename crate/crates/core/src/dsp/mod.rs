//! Time-domain audio containers, STFT analysis/synthesis and WAV I/O.

mod stft;
pub mod wav;

pub use stft::{
    istft, stft, stft_multichannel, MultichannelSpectrogram, Spectrogram, StftConfig, StftProcessor,
    Window,
};

use crate::error::{Error, Result};

/// A single channel of real samples at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        assert!(sample_rate > 0, "sample rate must be positive");
        Self {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            (self.energy() / self.samples.len() as f64).sqrt()
        }
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

/// `D >= 1` channels of equal length and sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelAudio {
    channels: Vec<AudioBuffer>,
}

impl MultichannelAudio {
    pub fn new(channels: Vec<AudioBuffer>) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::InvalidInput("at least one channel is required".into()))?;
        for ch in &channels[1..] {
            if ch.sample_rate() != first.sample_rate() {
                return Err(Error::SampleRateMismatch {
                    expected: first.sample_rate(),
                    found: ch.sample_rate(),
                });
            }
            if ch.len() != first.len() {
                return Err(Error::shape("multichannel audio", first.len(), ch.len()));
            }
        }
        Ok(Self { channels })
    }

    pub fn zeros(num_channels: usize, len: usize, sample_rate: u32) -> Self {
        assert!(num_channels > 0);
        Self {
            channels: vec![AudioBuffer::zeros(len, sample_rate); num_channels],
        }
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels[0].is_empty()
    }

    pub fn sample_rate(&self) -> u32 {
        self.channels[0].sample_rate()
    }

    pub fn channel(&self, index: usize) -> &AudioBuffer {
        &self.channels[index]
    }

    pub fn channels(&self) -> &[AudioBuffer] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<AudioBuffer> {
        self.channels
    }
}
