use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::linalg::{invert, norm1, trace};
use super::scm::ScmSet;
use crate::dsp::{MultichannelSpectrogram, Spectrogram};
use crate::error::{Error, Result};

/// Which source the filter passes undistorted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BeamRole {
    Target,
    Interference,
}

/// Diagonal loading added to the denominator SCM before inversion:
/// `relative * Tr(Phi) / D`, or `absolute` when the trace is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadingConfig {
    pub relative: f64,
    pub absolute: f64,
}

impl Default for LoadingConfig {
    fn default() -> Self {
        Self { relative: 1e-6, absolute: 1e-12 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BeamformerDiagnostics {
    /// Bins where the filter fell back to the reference selector.
    pub fallback_bins: Vec<usize>,
    /// 1-norm condition number of the loaded denominator SCM per bin
    /// (infinite where inversion failed).
    pub condition_numbers: Vec<f64>,
}

impl BeamformerDiagnostics {
    pub fn max_condition_number(&self) -> f64 {
        self.condition_numbers.iter().copied().fold(0.0, f64::max)
    }
}

/// Per-bin filter coefficients, `K` bins by `D` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerWeights {
    pub weights: Array2<Complex64>,
    pub reference: usize,
    pub role: BeamRole,
    pub diagnostics: BeamformerDiagnostics,
}

impl BeamformerWeights {
    pub fn num_bins(&self) -> usize {
        self.weights.nrows()
    }

    pub fn num_channels(&self) -> usize {
        self.weights.ncols()
    }
}

const PIVOT_TOL: f64 = 1e-14;
const TRACE_TOL: f64 = 1e-10;

/// `Phi_den^-1 Phi_num / Tr(Phi_den^-1 Phi_num)`, or `None` if the system is
/// singular or the trace vanishes. The second value is the condition number.
pub(crate) fn normalized_filter_matrix(
    num: &Array2<Complex64>,
    den: &Array2<Complex64>,
    loading: &LoadingConfig,
) -> (Option<Array2<Complex64>>, f64) {
    let d = den.nrows();
    let tr = trace(den.view()).re;
    let delta = if tr > 0.0 && tr.is_finite() { loading.relative * tr / d as f64 } else { loading.absolute };
    let mut loaded = den.clone();
    for i in 0..d {
        loaded[[i, i]] += delta;
    }
    let Some(inv) = invert(loaded.view(), PIVOT_TOL) else {
        return (None, f64::INFINITY);
    };
    let cond = norm1(loaded.view()) * norm1(inv.view());
    let a = inv.dot(num);
    let t = trace(a.view());
    let size = a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if !(t.re.is_finite() && t.im.is_finite()) || t.norm() <= TRACE_TOL * size || t.norm() == 0.0 {
        return (None, cond);
    }
    (Some(a.mapv(|v| v / t)), cond)
}

/// MVDR weights for the requested role. The interference filter is the target
/// filter applied to the swapped SCMs.
pub fn mvdr_weights(scms: &ScmSet, reference: usize, role: BeamRole, loading: &LoadingConfig) -> Result<BeamformerWeights> {
    let d = scms.num_channels();
    let k_bins = scms.num_bins();
    if reference >= d {
        return Err(Error::InvalidInput(format!("reference channel {reference} out of range for {d} channels")));
    }
    if scms.interference.len() != k_bins {
        return Err(Error::shape("SCM bins", k_bins.to_string(), scms.interference.len().to_string()));
    }
    let (nums, dens) = match role {
        BeamRole::Target => (&scms.target, &scms.interference),
        BeamRole::Interference => (&scms.interference, &scms.target),
    };
    let mut weights = Array2::<Complex64>::zeros((k_bins, d));
    let mut diagnostics = BeamformerDiagnostics::default();
    for (k, (num, den)) in nums.iter().zip(dens).enumerate() {
        if num.dim() != (d, d) || den.dim() != (d, d) {
            return Err(Error::shape("SCM", format!("{d}x{d}"), format!("{:?} / {:?}", num.dim(), den.dim())));
        }
        let (filter, cond) = normalized_filter_matrix(num, den, loading);
        diagnostics.condition_numbers.push(cond);
        match filter {
            Some(a) => weights.row_mut(k).assign(&a.column(reference)),
            None => {
                diagnostics.fallback_bins.push(k);
                weights[[k, reference]] = Complex64::new(1.0, 0.0);
            }
        }
    }
    Ok(BeamformerWeights { weights, reference, role, diagnostics })
}

/// `Y[l,k] = w[k]^H X[:,l,k]`.
pub fn apply_weights(w: &BeamformerWeights, x: &MultichannelSpectrogram) -> Result<Spectrogram> {
    if (w.num_bins(), w.num_channels()) != (x.num_bins(), x.num_channels()) {
        return Err(Error::shape(
            "beamformer weights",
            format!("{:?}", (x.num_bins(), x.num_channels())),
            format!("{:?}", (w.num_bins(), w.num_channels())),
        ));
    }
    let data = x.data();
    let out = Array2::from_shape_fn((x.num_frames(), x.num_bins()), |(l, k)| {
        (0..x.num_channels()).fold(Complex64::new(0.0, 0.0), |acc, d| acc + w.weights[[k, d]].conj() * data[[d, l, k]])
    });
    let template = x.channel(0);
    template.with_data(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamformer::{scm_from_mask, MaskTensor};
    use crate::dsp::{stft_multichannel, AudioBuffer, MultichannelAudio, StftConfig};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_scms(d: usize, bins: usize, seed: u64) -> ScmSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut make = || {
            (0..bins)
                .map(|_| {
                    let a = Array2::from_shape_fn((d, d + 2), |_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
                    let mut m = a.dot(&a.t().mapv(|v| v.conj()));
                    crate::beamformer::linalg::symmetrize(&mut m);
                    m
                })
                .collect::<Vec<_>>()
        };
        let target = make();
        let interference = make();
        ScmSet { target, interference }
    }

    fn random_mc(d: usize, seed: u64) -> MultichannelSpectrogram {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = (0..d)
            .map(|_| AudioBuffer::new((0..2_000).map(|_| rng.random_range(-1.0..1.0)).collect(), 16_000).unwrap())
            .collect();
        stft_multichannel(&MultichannelAudio::new(ch).unwrap(), &StftConfig::default()).unwrap()
    }

    #[test]
    fn single_channel_gives_unit_weight() {
        let scms = ScmSet { target: vec![array![[c(3.0, 0.0)]]], interference: vec![array![[c(0.7, 0.0)]]] };
        let w = mvdr_weights(&scms, 0, BeamRole::Target, &LoadingConfig::default()).unwrap();
        assert_eq!(w.weights[[0, 0]], c(1.0, 0.0));
        assert!(w.diagnostics.fallback_bins.is_empty());
    }

    #[test]
    fn rank_one_target_with_white_noise() {
        // Phi_SS = d d^H with d = [1, 1] / sqrt(2), Phi_BB = I: w = d (d^H e1).
        let h = c(0.5, 0.0);
        let scms = ScmSet {
            target: vec![array![[h, h], [h, h]]],
            interference: vec![Array2::eye(2)],
        };
        let w = mvdr_weights(&scms, 0, BeamRole::Target, &LoadingConfig { relative: 0.0, absolute: 0.0 }).unwrap();
        for v in w.weights.row(0) {
            assert!((v - c(0.5, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn interference_role_equals_swapped_target_role() {
        let scms = random_scms(4, 6, 1);
        let loading = LoadingConfig::default();
        let a = mvdr_weights(&scms, 1, BeamRole::Interference, &loading).unwrap();
        let b = mvdr_weights(&scms.swapped(), 1, BeamRole::Target, &loading).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.diagnostics, b.diagnostics);
    }

    #[test]
    fn filter_matrix_has_unit_trace() {
        let scms = random_scms(3, 5, 2);
        for (num, den) in scms.target.iter().zip(&scms.interference) {
            let (m, cond) = normalized_filter_matrix(num, den, &LoadingConfig::default());
            let t = trace(m.unwrap().view());
            assert!((t - c(1.0, 0.0)).norm() < 1e-10);
            assert!(cond.is_finite() && cond >= 1.0);
        }
    }

    #[test]
    fn zero_numerator_falls_back_to_selector() {
        let scms = ScmSet { target: vec![Array2::zeros((3, 3))], interference: vec![Array2::eye(3)] };
        let w = mvdr_weights(&scms, 2, BeamRole::Target, &LoadingConfig::default()).unwrap();
        assert_eq!(w.diagnostics.fallback_bins, vec![0]);
        assert_eq!(w.weights.row(0).to_vec(), vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
    }

    #[test]
    fn selector_weights_pass_reference_channel() {
        let x = random_mc(3, 3);
        let mut weights = Array2::zeros((x.num_bins(), 3));
        weights.column_mut(1).fill(c(1.0, 0.0));
        let w = BeamformerWeights { weights, reference: 1, role: BeamRole::Target, diagnostics: Default::default() };
        let y = apply_weights(&w, &x).unwrap();
        assert_eq!(y.data(), &x.channel_view(1).to_owned());
    }

    #[test]
    fn application_is_linear_in_input() {
        let (x1, x2) = (random_mc(2, 4), random_mc(2, 5));
        let scms = random_scms(2, x1.num_bins(), 6);
        let w = mvdr_weights(&scms, 0, BeamRole::Target, &LoadingConfig::default()).unwrap();
        let sum_data = x1.data() + x2.data() * 2.0;
        let chans: Vec<_> = (0..2).map(|d| x1.channel(d).with_data(sum_data.index_axis(ndarray::Axis(0), d).to_owned()).unwrap()).collect();
        let xs = MultichannelSpectrogram::from_channels(&chans).unwrap();
        let (y1, y2, ys) = (apply_weights(&w, &x1).unwrap(), apply_weights(&w, &x2).unwrap(), apply_weights(&w, &xs).unwrap());
        for ((a, b), s) in y1.data().iter().zip(y2.data()).zip(ys.data()) {
            assert!((a + b * 2.0 - s).norm() < 1e-9 * (1.0 + s.norm()));
        }
    }

    #[test]
    fn equal_scms_stay_finite_and_bad_shapes_fail() {
        let x = random_mc(2, 7);
        let mask = MaskTensor::filled((x.num_frames(), x.num_bins()), 0.5).unwrap();
        let scms = scm_from_mask(&x, &mask).unwrap();
        let w = mvdr_weights(&scms, 0, BeamRole::Target, &LoadingConfig::default()).unwrap();
        assert!(w.weights.iter().all(|v| v.re.is_finite() && v.im.is_finite()));
        assert!(apply_weights(&w, &random_mc(3, 8)).is_err());
        assert!(mvdr_weights(&scms, 2, BeamRole::Target, &LoadingConfig::default()).is_err());
    }
}
