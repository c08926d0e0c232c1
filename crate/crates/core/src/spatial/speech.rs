//! Source material: a deterministic synthetic talker and a WAV corpus reader.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dsp::{wav, AudioBuffer};
use crate::error::{Error, Result};

/// Produces one utterance per seed. Implementations must be deterministic.
pub trait SpeechSource: Send + Sync {
    fn utterance(&self, seed: u64, num_samples: usize, sample_rate: u32) -> Result<AudioBuffer>;
}

/// Speech-like test material: syllables of harmonic or noise excitation
/// shaped by time-varying formant resonators and separated by pauses.
#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticSpeech;

struct Resonator {
    a1: f64,
    a2: f64,
    gain: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new(freq: f64, bandwidth: f64, fs: f64) -> Self {
        let r = (-PI * bandwidth / fs).exp();
        let theta = 2.0 * PI * freq / fs;
        Self {
            a1: 2.0 * r * theta.cos(),
            a2: -r * r,
            gain: 1.0 - r,
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn tick(&mut self, x: f64) -> f64 {
        let y = self.gain * x + self.a1 * self.y1 + self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

impl SyntheticSpeech {
    fn syllable(rng: &mut ChaCha8Rng, len: usize, base_f0: f64, fs: f64) -> Vec<f64> {
        let voiced = rng.random_bool(0.8);
        let f0_start = base_f0 * rng.random_range(0.85..1.15);
        let f0_end = base_f0 * rng.random_range(0.85..1.15);
        let formants = [
            (rng.random_range(300.0..900.0), rng.random_range(60.0..120.0), 1.0),
            (rng.random_range(900.0..2400.0), rng.random_range(80.0..160.0), 0.6),
            (rng.random_range(2400.0..3400.0), rng.random_range(100.0..200.0), 0.3),
            (rng.random_range(3500.0..5000.0), rng.random_range(150.0..300.0), 0.15),
        ];
        let mut resonators: Vec<(Resonator, f64)> = formants
            .iter()
            .map(|&(f, bw, amp)| (Resonator::new(f, bw, fs), amp))
            .collect();

        let max_freq = 0.45 * fs;
        let mut phases = vec![0.0f64; (max_freq / (0.85 * base_f0)) as usize + 1];
        for p in phases.iter_mut() {
            *p = rng.random_range(0.0..2.0 * PI);
        }
        let mut out = Vec::with_capacity(len);
        for i in 0..len {
            let u = i as f64 / len as f64;
            let noise: f64 = rng.sample(StandardNormal);
            let excitation = if voiced {
                let f0 = f0_start + (f0_end - f0_start) * u;
                let mut sum = 0.0;
                for (h, phase) in phases.iter_mut().enumerate() {
                    let freq = f0 * (h + 1) as f64;
                    if freq > max_freq {
                        break;
                    }
                    *phase += 2.0 * PI * freq / fs;
                    sum += phase.sin() / (h + 1) as f64;
                }
                sum + 0.05 * noise
            } else {
                0.5 * noise
            };
            let filtered: f64 = resonators
                .iter_mut()
                .map(|(r, amp)| *amp * r.tick(excitation))
                .sum();
            let envelope = (PI * u).sin().powf(0.6);
            out.push(filtered * envelope);
        }
        out
    }
}

impl SpeechSource for SyntheticSpeech {
    fn utterance(&self, seed: u64, num_samples: usize, sample_rate: u32) -> Result<AudioBuffer> {
        let fs = sample_rate as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base_f0 = rng.random_range(90.0..240.0);
        let mut out = vec![0.0; num_samples];
        let mut pos = (rng.random_range(0.0..0.3) * fs) as usize;
        while pos < num_samples {
            let len = (rng.random_range(0.10..0.32) * fs) as usize;
            let syllable = Self::syllable(&mut rng, len, base_f0, fs);
            for (dst, v) in out[pos..].iter_mut().zip(&syllable) {
                *dst += v;
            }
            let gap = if rng.random_bool(0.15) {
                rng.random_range(0.2..0.5)
            } else {
                rng.random_range(0.02..0.15)
            };
            pos += len + (gap * fs) as usize;
        }
        let audio = AudioBuffer::new(out, sample_rate)?;
        Ok(normalize_rms(&audio, 0.1))
    }
}

/// A directory of mono WAV files. Utterances are picked and cropped per seed.
#[derive(Debug, Clone)]
pub struct WavCorpus {
    files: Vec<PathBuf>,
}

impl WavCorpus {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.extension().is_some_and(|ext| ext.eq_ignore_ascii_case("wav")) {
                files.push(path);
            }
        }
        files.sort();
        if files.is_empty() {
            return Err(Error::InvalidInput(format!("no .wav files found in {}", dir.display())));
        }
        Ok(Self { files })
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }
}

impl SpeechSource for WavCorpus {
    fn utterance(&self, seed: u64, num_samples: usize, sample_rate: u32) -> Result<AudioBuffer> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let path = &self.files[rng.random_range(0..self.files.len())];
        let audio = wav::read_mono(path)?;
        if audio.sample_rate() != sample_rate {
            return Err(Error::SampleRateMismatch {
                expected: sample_rate,
                found: audio.sample_rate(),
            });
        }
        let samples = audio.samples();
        let out = if samples.len() > num_samples {
            let start = rng.random_range(0..=samples.len() - num_samples);
            samples[start..start + num_samples].to_vec()
        } else {
            let mut v = samples.to_vec();
            v.resize(num_samples, 0.0);
            v
        };
        AudioBuffer::new(out, sample_rate)
    }
}

/// Scales `audio` to the requested RMS; silent input is returned unchanged.
pub fn normalize_rms(audio: &AudioBuffer, rms: f64) -> AudioBuffer {
    let current = audio.rms();
    if current > 0.0 {
        audio.scaled(rms / current)
    } else {
        audio.clone()
    }
}
