use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, Array3, ArrayView2, Axis};
use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use serde::{Deserialize, Serialize};

use super::{AudioBuffer, MultichannelAudio};
use crate::error::{Error, Result};

/// Analysis/synthesis window. The same window is used on both sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    /// Square root of the periodic Hann window, `sin(pi n / N)`.
    SqrtHann,
    Rectangular,
}

impl Window {
    pub fn coefficients(self, frame_size: usize) -> Vec<f64> {
        match self {
            Window::SqrtHann => (0..frame_size)
                .map(|n| (PI * n as f64 / frame_size as f64).sin())
                .collect(),
            Window::Rectangular => vec![1.0; frame_size],
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::SqrtHann => f.write_str("sqrt-hann"),
            Window::Rectangular => f.write_str("rectangular"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftConfig {
    pub frame_size: usize,
    pub hop: usize,
    pub window: Window,
}

impl Default for StftConfig {
    /// 32 ms frames with an 8 ms hop at 16 kHz.
    fn default() -> Self {
        Self {
            frame_size: 512,
            hop: 128,
            window: Window::SqrtHann,
        }
    }
}

impl StftConfig {
    pub fn new(frame_size: usize, hop: usize, window: Window) -> Result<Self> {
        let cfg = Self {
            frame_size,
            hop,
            window,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn num_bins(&self) -> usize {
        self.frame_size / 2 + 1
    }

    /// Samples of reflection padding added at each end before framing.
    pub fn edge_padding(&self) -> usize {
        self.frame_size - self.hop
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.frame_size;
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::Config(format!("frame size must be even and >= 2, got {n}")));
        }
        if self.hop == 0 || self.hop > n {
            return Err(Error::Config(format!(
                "hop must satisfy 0 < hop <= frame size, got hop {} for frame size {n}",
                self.hop
            )));
        }
        self.overlap_add_gain().map(|_| ())
    }

    /// Constant value of `sum_l w_a(n - l hop) w_s(n - l hop)`, or an error
    /// when the window/hop pair does not overlap-add to a constant.
    pub fn overlap_add_gain(&self) -> Result<f64> {
        let w = self.window.coefficients(self.frame_size);
        let sums: Vec<f64> = (0..self.hop)
            .map(|n| w.iter().skip(n).step_by(self.hop).map(|v| v * v).sum())
            .collect();
        let mean = sums.iter().sum::<f64>() / sums.len() as f64;
        if mean <= 0.0 || sums.iter().any(|s| (s - mean).abs() > 1e-10 * mean) {
            return Err(Error::Config(format!(
                "{} window with frame size {} and hop {} does not satisfy constant overlap-add",
                self.window, self.frame_size, self.hop
            )));
        }
        Ok(mean)
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn num_frames(&self, len: usize) -> usize {
        let padded = len.max(self.frame_size) + 2 * self.edge_padding();
        (padded - self.frame_size).div_ceil(self.hop) + 1
    }
}

/// Onesided complex spectrogram, `L` frames by `N/2 + 1` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    data: Array2<Complex64>,
    config: StftConfig,
    signal_len: usize,
    sample_rate: u32,
}

impl Spectrogram {
    pub fn new(
        data: Array2<Complex64>,
        config: StftConfig,
        signal_len: usize,
        sample_rate: u32,
    ) -> Result<Self> {
        config.validate()?;
        let expected = (config.num_frames(signal_len), config.num_bins());
        if data.dim() != expected {
            return Err(Error::shape("spectrogram", format!("{expected:?}"), format!("{:?}", data.dim())));
        }
        Ok(Self {
            data,
            config,
            signal_len,
            sample_rate,
        })
    }

    /// A spectrogram with the same framing as `self` but different content.
    pub fn with_data(&self, data: Array2<Complex64>) -> Result<Self> {
        if data.dim() != self.data.dim() {
            return Err(Error::shape(
                "spectrogram",
                format!("{:?}", self.data.dim()),
                format!("{:?}", data.dim()),
            ));
        }
        Ok(Self {
            data,
            config: self.config,
            signal_len: self.signal_len,
            sample_rate: self.sample_rate,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            data: Array2::zeros(self.data.dim()),
            ..self.clone()
        }
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.data
    }

    pub fn into_data(self) -> Array2<Complex64> {
        self.data
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn num_frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn num_bins(&self) -> usize {
        self.data.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn magnitude(&self) -> Array2<f64> {
        self.data.mapv(|c| c.norm())
    }

    /// Signal-domain energy implied by the spectrogram: onesided Parseval sum
    /// divided by the frame size and the overlap-add gain of `w_a^2`.
    pub fn energy(&self) -> f64 {
        let n = self.config.frame_size;
        let k_last = self.num_bins() - 1;
        let gain = self.config.overlap_add_gain().expect("validated config");
        let sum: f64 = self
            .data
            .indexed_iter()
            .map(|((_, k), c)| {
                let weight = if k == 0 || k == k_last { 1.0 } else { 2.0 };
                weight * c.norm_sqr()
            })
            .sum();
        sum / (n as f64 * gain)
    }
}

/// Per-channel spectrograms sharing one framing, stored as `[D, L, K]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelSpectrogram {
    data: Array3<Complex64>,
    config: StftConfig,
    signal_len: usize,
    sample_rate: u32,
}

impl MultichannelSpectrogram {
    pub fn from_channels(channels: &[Spectrogram]) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::InvalidInput("at least one channel is required".into()))?;
        let (l, k) = first.shape();
        let mut data = Array3::zeros((channels.len(), l, k));
        for (d, ch) in channels.iter().enumerate() {
            if ch.shape() != first.shape() || ch.config != first.config {
                return Err(Error::shape(
                    "multichannel spectrogram",
                    format!("{:?}", first.shape()),
                    format!("{:?}", ch.shape()),
                ));
            }
            data.index_axis_mut(Axis(0), d).assign(ch.data());
        }
        Ok(Self {
            data,
            config: first.config,
            signal_len: first.signal_len,
            sample_rate: first.sample_rate,
        })
    }

    pub fn num_channels(&self) -> usize {
        self.data.len_of(Axis(0))
    }

    pub fn num_frames(&self) -> usize {
        self.data.len_of(Axis(1))
    }

    pub fn num_bins(&self) -> usize {
        self.data.len_of(Axis(2))
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn data(&self) -> &Array3<Complex64> {
        &self.data
    }

    pub fn channel_view(&self, d: usize) -> ArrayView2<'_, Complex64> {
        self.data.index_axis(Axis(0), d)
    }

    pub fn channel(&self, d: usize) -> Spectrogram {
        Spectrogram {
            data: self.channel_view(d).to_owned(),
            config: self.config,
            signal_len: self.signal_len,
            sample_rate: self.sample_rate,
        }
    }

    /// Single-channel spectrogram with this framing and the given content.
    pub fn single(&self, data: Array2<Complex64>) -> Result<Spectrogram> {
        if data.dim() != (self.num_frames(), self.num_bins()) {
            return Err(Error::shape(
                "spectrogram",
                format!("{:?}", (self.num_frames(), self.num_bins())),
                format!("{:?}", data.dim()),
            ));
        }
        Ok(Spectrogram {
            data,
            config: self.config,
            signal_len: self.signal_len,
            sample_rate: self.sample_rate,
        })
    }
}

/// Reusable STFT with cached FFT plans.
#[derive(Clone)]
pub struct StftProcessor {
    config: StftConfig,
    window: Vec<f64>,
    gain: f64,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl fmt::Debug for StftProcessor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StftProcessor").field("config", &self.config).finish()
    }
}

impl StftProcessor {
    pub fn new(config: StftConfig) -> Result<Self> {
        let gain = config.overlap_add_gain()?;
        config.validate()?;
        let mut planner = RealFftPlanner::<f64>::new();
        Ok(Self {
            config,
            window: config.window.coefficients(config.frame_size),
            gain,
            forward: planner.plan_fft_forward(config.frame_size),
            inverse: planner.plan_fft_inverse(config.frame_size),
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn analyze(&self, audio: &AudioBuffer) -> Result<Spectrogram> {
        if audio.is_empty() {
            return Err(Error::InvalidInput("cannot analyze an empty signal".into()));
        }
        let n = self.config.frame_size;
        let hop = self.config.hop;
        let pad = self.config.edge_padding();
        let frames = self.config.num_frames(audio.len());

        let mut body = audio.samples().to_vec();
        if let Some(i) = body.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite sample at index {i}")));
        }
        body.resize(body.len().max(n), 0.0);

        let mut padded = Vec::with_capacity((frames - 1) * hop + n);
        padded.extend((1..=pad).rev().map(|i| body[i]));
        padded.extend_from_slice(&body);
        let last = body.len() - 1;
        padded.extend((1..=pad).map(|i| body[last - i]));
        padded.resize((frames - 1) * hop + n, 0.0);

        let mut data = Array2::zeros((frames, self.config.num_bins()));
        let mut input = self.forward.make_input_vec();
        let mut output = self.forward.make_output_vec();
        let mut scratch = self.forward.make_scratch_vec();
        for (l, mut row) in data.outer_iter_mut().enumerate() {
            let frame = &padded[l * hop..l * hop + n];
            for ((dst, x), w) in input.iter_mut().zip(frame).zip(&self.window) {
                *dst = x * w;
            }
            self.forward
                .process_with_scratch(&mut input, &mut output, &mut scratch)
                .expect("buffer sizes come from the plan");
            for (dst, c) in row.iter_mut().zip(&output) {
                *dst = *c;
            }
        }
        Spectrogram::new(data, self.config, audio.len(), audio.sample_rate())
    }

    pub fn synthesize(&self, spec: &Spectrogram) -> Result<AudioBuffer> {
        if spec.config != self.config {
            return Err(Error::InvalidInput("spectrogram framing differs from processor".into()));
        }
        let n = self.config.frame_size;
        let hop = self.config.hop;
        let frames = spec.num_frames();
        let mut out = vec![0.0; (frames - 1) * hop + n];
        let mut input = self.inverse.make_input_vec();
        let mut output = self.inverse.make_output_vec();
        let mut scratch = self.inverse.make_scratch_vec();
        let k_last = input.len() - 1;
        let scale = 1.0 / (n as f64 * self.gain);
        for (l, row) in spec.data.outer_iter().enumerate() {
            for (dst, c) in input.iter_mut().zip(row) {
                *dst = *c;
            }
            // A real signal has purely real DC and Nyquist bins.
            input[0].im = 0.0;
            input[k_last].im = 0.0;
            self.inverse
                .process_with_scratch(&mut input, &mut output, &mut scratch)
                .expect("buffer sizes come from the plan");
            let dst = &mut out[l * hop..l * hop + n];
            for ((acc, y), w) in dst.iter_mut().zip(&output).zip(&self.window) {
                *acc += y * w * scale;
            }
        }
        let start = self.config.edge_padding();
        let samples = out[start..start + spec.signal_len].to_vec();
        AudioBuffer::new(samples, spec.sample_rate)
            .map_err(|e| Error::Numeric(format!("inverse STFT produced invalid samples: {e}")))
    }

    pub fn analyze_multichannel(&self, audio: &MultichannelAudio) -> Result<MultichannelSpectrogram> {
        let channels = audio
            .channels()
            .iter()
            .map(|ch| self.analyze(ch))
            .collect::<Result<Vec<_>>>()?;
        MultichannelSpectrogram::from_channels(&channels)
    }
}

pub fn stft(audio: &AudioBuffer, cfg: &StftConfig) -> Result<Spectrogram> {
    StftProcessor::new(*cfg)?.analyze(audio)
}

pub fn istft(spec: &Spectrogram) -> Result<AudioBuffer> {
    StftProcessor::new(spec.config)?.synthesize(spec)
}

pub fn stft_multichannel(audio: &MultichannelAudio, cfg: &StftConfig) -> Result<MultichannelSpectrogram> {
    StftProcessor::new(*cfg)?.analyze_multichannel(audio)
}
