//! Rational-ratio polyphase resampling with a Kaiser-windowed sinc kernel.

use std::f64::consts::PI;

use crate::dsp::AudioBuffer;
use crate::error::{Error, Result};

const TAPS_PER_PHASE: usize = 64;
const KAISER_BETA: f64 = 6.0;
/// Cutoff as a fraction of the lower of the two Nyquist frequencies.
const CUTOFF: f64 = 0.9;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..64 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

#[derive(Debug, Clone)]
pub struct Resampler {
    from: u32,
    to: u32,
    up: usize,
    down: usize,
    /// `phases[p][i]` weights input sample `n0 - HALF + 1 + i` for output
    /// samples whose position falls `p / up` past input sample `n0`.
    phases: Vec<Vec<f64>>,
}

impl Resampler {
    pub fn new(from: u32, to: u32) -> Result<Self> {
        if from == 0 || to == 0 {
            return Err(Error::InvalidInput("sample rates must be positive".into()));
        }
        let g = gcd(from as u64, to as u64);
        let (up, down) = ((to as u64 / g) as usize, (from as u64 / g) as usize);
        // Normalized to the input rate: the kernel passes below `fc` cycles per input sample.
        let fc = CUTOFF * 0.5 * (to.min(from) as f64) / from as f64;
        let half = (TAPS_PER_PHASE / 2) as f64;
        let norm = bessel_i0(KAISER_BETA);
        let phases = (0..up)
            .map(|p| {
                let frac = p as f64 / up as f64;
                let mut taps: Vec<f64> = (0..TAPS_PER_PHASE)
                    .map(|i| {
                        let tau = frac + half - 1.0 - i as f64;
                        let u = tau / half;
                        if u.abs() > 1.0 {
                            return 0.0;
                        }
                        let sinc = if tau == 0.0 { 1.0 } else { (2.0 * PI * fc * tau).sin() / (PI * tau) / (2.0 * fc) };
                        sinc * bessel_i0(KAISER_BETA * (1.0 - u * u).sqrt()) / norm
                    })
                    .collect();
                let sum: f64 = taps.iter().sum();
                taps.iter_mut().for_each(|t| *t /= sum);
                taps
            })
            .collect();
        Ok(Self { from, to, up, down, phases })
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        (input_len * self.up).div_ceil(self.down)
    }

    pub fn process(&self, input: &AudioBuffer) -> Result<AudioBuffer> {
        if input.sample_rate() != self.from {
            return Err(Error::SampleRateMismatch { expected: self.from, found: input.sample_rate() });
        }
        if self.up == self.down {
            return Ok(input.clone());
        }
        let x = input.samples();
        let first = TAPS_PER_PHASE / 2 - 1;
        let out = (0..self.output_len(x.len()))
            .map(|m| {
                let pos = m * self.down;
                let (n0, p) = (pos / self.up, pos % self.up);
                let start = n0 as isize - first as isize;
                self.phases[p]
                    .iter()
                    .enumerate()
                    .filter_map(|(i, w)| {
                        let j = start + i as isize;
                        (j >= 0 && (j as usize) < x.len()).then(|| w * x[j as usize])
                    })
                    .sum()
            })
            .collect();
        AudioBuffer::new(out, self.to)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, fs: u32, n: usize) -> AudioBuffer {
        AudioBuffer::new((0..n).map(|i| (2.0 * PI * freq * i as f64 / fs as f64 + 0.4).sin()).collect(), fs).unwrap()
    }

    #[test]
    fn bessel_matches_reference() {
        // I0(6) from tables.
        assert!((bessel_i0(6.0) - 67.234_406_976_477_96).abs() < 1e-10);
        assert_eq!(bessel_i0(0.0), 1.0);
    }

    #[test]
    fn passband_tone_survives_with_exact_alignment() {
        let r = Resampler::new(16_000, 10_000).unwrap();
        for freq in [200.0, 1000.0, 3000.0] {
            let out = r.process(&tone(freq, 16_000, 16_000)).unwrap();
            assert_eq!(out.len(), 10_000);
            assert_eq!(out.sample_rate(), 10_000);
            let expected = tone(freq, 10_000, 10_000);
            let err = out.samples()[100..9900]
                .iter()
                .zip(&expected.samples()[100..9900])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 5e-3, "{freq} Hz: {err}");
        }
    }

    #[test]
    fn tone_above_new_nyquist_is_suppressed() {
        let r = Resampler::new(16_000, 10_000).unwrap();
        let out = r.process(&tone(6500.0, 16_000, 16_000)).unwrap();
        assert!(out.samples()[100..9900].iter().all(|v| v.abs() < 2e-3));
    }

    #[test]
    fn dc_is_preserved_and_rates_checked() {
        let r = Resampler::new(16_000, 10_000).unwrap();
        let out = r.process(&AudioBuffer::new(vec![1.0; 800], 16_000).unwrap()).unwrap();
        assert_eq!(out.len(), 500);
        assert!(out.samples()[40..460].iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(r.process(&AudioBuffer::zeros(10, 8_000)).is_err());
        assert!(Resampler::new(0, 10).is_err());
        let same = Resampler::new(8_000, 8_000).unwrap();
        let t = tone(100.0, 8_000, 99);
        assert_eq!(same.process(&t).unwrap(), t);
    }
}
