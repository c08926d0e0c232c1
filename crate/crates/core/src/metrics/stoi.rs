//! Short-time objective intelligibility.

use std::f64::consts::PI;

use ndarray::{s, Array2};
use realfft::RealFftPlanner;

use super::check_rates;
use super::resample::Resampler;
use crate::dsp::AudioBuffer;
use crate::error::{Error, Result};

pub const STOI_SAMPLE_RATE: u32 = 10_000;
const FRAME: usize = 256;
const HOP: usize = FRAME / 2;
const NFFT: usize = 512;
const BANDS: usize = 15;
const MIN_FREQ: f64 = 150.0;
/// Frames per intermediate intelligibility segment (384 ms).
const SEGMENT: usize = 30;
const CLIP_DB: f64 = -15.0;
const DYN_RANGE_DB: f64 = 40.0;
const EPS: f64 = f64::EPSILON;

/// Hann window without its zero endpoints.
fn window() -> Vec<f64> {
    (0..FRAME).map(|i| 0.5 - 0.5 * (2.0 * PI * (i + 1) as f64 / (FRAME + 1) as f64).cos()).collect()
}

fn frame_starts(len: usize) -> impl Iterator<Item = usize> {
    (0..len.saturating_sub(FRAME)).step_by(HOP)
}

fn norm(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Drops frames of both signals where the reference is more than
/// `DYN_RANGE_DB` below its loudest frame, then overlap-adds the rest.
fn remove_silent_frames(reference: &[f64], estimate: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let frames = |x: &[f64]| -> Vec<Vec<f64>> {
        frame_starts(reference.len()).map(|i| w.iter().zip(&x[i..i + FRAME]).map(|(a, b)| a * b).collect()).collect()
    };
    let (xf, yf) = (frames(reference), frames(estimate));
    let energies: Vec<f64> = xf.iter().map(|f| 20.0 * (norm(f.iter().copied()) + EPS).log10()).collect();
    let max = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let keep: Vec<usize> = (0..xf.len()).filter(|&i| max - DYN_RANGE_DB - energies[i] < 0.0).collect();
    let ola = |f: &[Vec<f64>]| -> Vec<f64> {
        if keep.is_empty() {
            return Vec::new();
        }
        let mut out = vec![0.0; (keep.len() - 1) * HOP + FRAME];
        for (k, &i) in keep.iter().enumerate() {
            out[k * HOP..k * HOP + FRAME].iter_mut().zip(&f[i]).for_each(|(o, v)| *o += v);
        }
        out
    };
    (ola(&xf), ola(&yf))
}

/// One-third-octave band energies, `[BANDS, frames]`.
fn band_envelopes(x: &[f64], w: &[f64], bands: &[(usize, usize)]) -> Array2<f64> {
    let mut planner = RealFftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(NFFT);
    let mut buf = fft.make_input_vec();
    let mut spec = fft.make_output_vec();
    let starts: Vec<usize> = frame_starts(x.len()).collect();
    let mut out = Array2::zeros((BANDS, starts.len()));
    for (t, &i) in starts.iter().enumerate() {
        buf.fill(0.0);
        buf[..FRAME].iter_mut().zip(w.iter().zip(&x[i..i + FRAME])).for_each(|(b, (w, v))| *b = w * v);
        fft.process(&mut buf, &mut spec).expect("fft sizes are fixed");
        for (j, &(lo, hi)) in bands.iter().enumerate() {
            out[[j, t]] = spec[lo..hi].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        }
    }
    out
}

/// Bin ranges `[lo, hi)` of the bands, edges snapped to the nearest bin.
fn third_octave_bands() -> Vec<(usize, usize)> {
    let bin_hz = STOI_SAMPLE_RATE as f64 / NFFT as f64;
    let nearest = |f: f64| {
        (0..=NFFT / 2)
            .min_by(|&a, &b| ((a as f64 * bin_hz - f).powi(2)).total_cmp(&(b as f64 * bin_hz - f).powi(2)))
            .expect("non-empty")
    };
    (0..BANDS)
        .map(|k| {
            let k = k as f64;
            (nearest(MIN_FREQ * 2f64.powf((2.0 * k - 1.0) / 6.0)), nearest(MIN_FREQ * 2f64.powf((2.0 * k + 1.0) / 6.0)))
        })
        .collect()
}

fn resample(x: &AudioBuffer) -> Result<Vec<f64>> {
    if x.sample_rate() == STOI_SAMPLE_RATE {
        return Ok(x.samples().to_vec());
    }
    Ok(Resampler::new(x.sample_rate(), STOI_SAMPLE_RATE)?.process(x)?.into_samples())
}

/// STOI of `estimate` against the clean `reference`, clamped to `[0, 1]`.
/// Both signals must have equal length.
pub fn stoi(estimate: &AudioBuffer, reference: &AudioBuffer) -> Result<f64> {
    check_rates(estimate, reference)?;
    if estimate.len() != reference.len() {
        return Err(Error::shape("STOI inputs", reference.len(), estimate.len()));
    }
    let (x, y) = (resample(reference)?, resample(estimate)?);
    let w = window();
    let (x, y) = remove_silent_frames(&x, &y, &w);
    let bands = third_octave_bands();
    let (xe, ye) = (band_envelopes(&x, &w, &bands), band_envelopes(&y, &w, &bands));
    let frames = xe.ncols();
    if frames < SEGMENT {
        return Err(Error::InvalidInput(format!(
            "STOI needs at least {SEGMENT} active frames (384 ms), found {frames}"
        )));
    }
    let clip = 1.0 + 10f64.powf(-CLIP_DB / 20.0);
    let mut total = 0.0;
    let segments = frames - SEGMENT + 1;
    for m in SEGMENT..=frames {
        for j in 0..BANDS {
            let xs = xe.slice(s![j, m - SEGMENT..m]);
            let ys = ye.slice(s![j, m - SEGMENT..m]);
            let scale = norm(xs.iter().copied()) / (norm(ys.iter().copied()) + EPS);
            let yp: Vec<f64> = ys.iter().zip(&xs).map(|(y, x)| (y * scale).min(x * clip)).collect();
            let (my, mx) = (yp.iter().sum::<f64>() / SEGMENT as f64, xs.sum() / SEGMENT as f64);
            let yc: Vec<f64> = yp.iter().map(|v| v - my).collect();
            let xc: Vec<f64> = xs.iter().map(|v| v - mx).collect();
            let (ny, nx) = (norm(yc.iter().copied()) + EPS, norm(xc.iter().copied()) + EPS);
            total += yc.iter().zip(&xc).map(|(a, b)| (a / ny) * (b / nx)).sum::<f64>();
        }
    }
    Ok((total / (segments * BANDS) as f64).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Shared with the reference values below: harmonic tones under a slow
    /// envelope with a silent gap, plus an integer LCG for noise.
    fn clean(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                if (8000..11000).contains(&i) {
                    return 0.0;
                }
                let t = i as f64 / 10_000.0;
                let env = 0.5 - 0.5 * (2.0 * PI * 3.0 * t).cos();
                env * ((2.0 * PI * 220.0 * t).sin()
                    + 0.5 * (2.0 * PI * 1250.0 * t + 0.3).sin()
                    + 0.25 * (2.0 * PI * 3100.0 * t).sin())
            })
            .collect()
    }

    fn lcg_noise(n: usize) -> Vec<f64> {
        let mut u: u64 = 12345;
        (0..n)
            .map(|_| {
                u = (1_103_515_245 * u + 12_345) % (1 << 31);
                u as f64 / (1u64 << 31) as f64 - 0.5
            })
            .collect()
    }

    fn buf(v: Vec<f64>) -> AudioBuffer {
        AudioBuffer::new(v, 10_000).unwrap()
    }

    #[test]
    fn band_edges_match_reference_layout() {
        let b = third_octave_bands();
        assert_eq!(b[0], (7, 9));
        assert_eq!(b[14], (174, 219));
        assert!(b.windows(2).all(|w| w[0].1 == w[1].0));
    }

    // Expected values from the widely used Python implementation on the same
    // signals at 10 kHz.
    #[test]
    fn matches_reference_implementation() {
        let x = clean(20_000);
        let noise = lcg_noise(20_000);
        let noisy: Vec<f64> = x.iter().zip(&noise).map(|(a, b)| a + 0.3 * b).collect();
        let mut filtered = x.clone();
        for i in (1..x.len()).rev() {
            filtered[i] -= 0.9 * x[i - 1];
        }
        let cases = [(noisy, 0.650_109_805_709_347_6), (noise, 0.350_461_129_263_111), (filtered, 0.998_769_943_058_789_2)];
        for (est, expected) in cases {
            let v = stoi(&buf(est), &buf(x.clone())).unwrap();
            assert!((v - expected).abs() < 1e-9, "{v} vs {expected}");
        }
    }

    #[test]
    fn identity_gain_and_short_input() {
        let x = clean(20_000);
        let r = buf(x.clone());
        assert!(stoi(&r, &r).unwrap() > 0.99);
        let a = stoi(&buf(x.iter().zip(lcg_noise(20_000)).map(|(a, b)| a + 0.2 * b).collect()), &r).unwrap();
        let b = stoi(&buf(x.iter().zip(lcg_noise(20_000)).map(|(a, b)| 3.0 * (a + 0.2 * b)).collect()), &r).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(stoi(&buf(x[..3000].to_vec()), &buf(x[..3000].to_vec())).is_err());
        assert!(stoi(&buf(x[..3000].to_vec()), &r).is_err());
    }
}
