use ndarray::Array2;
use num_complex::Complex64;

use super::linalg::symmetrize;
use super::mask::OracleMask;
use crate::dsp::MultichannelSpectrogram;
use crate::error::{Error, Result};

/// Per-bin `D x D` spatial covariance matrices of the target and interference.
#[derive(Debug, Clone, PartialEq)]
pub struct ScmSet {
    pub target: Vec<Array2<Complex64>>,
    pub interference: Vec<Array2<Complex64>>,
}

impl ScmSet {
    pub fn num_bins(&self) -> usize {
        self.target.len()
    }

    pub fn num_channels(&self) -> usize {
        self.target.first().map_or(0, |m| m.nrows())
    }

    /// The same matrices with the target and interference roles exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            target: self.interference.clone(),
            interference: self.target.clone(),
        }
    }
}

/// `Phi_SS[k] = sum_l M[l,k] X X^H` and `Phi_BB[k] = sum_l (1 - M[l,k]) X X^H`,
/// symmetrized after accumulation.
pub fn scm_from_mask(x: &MultichannelSpectrogram, mask: &OracleMask) -> Result<ScmSet> {
    let (frames, bins) = (x.num_frames(), x.num_bins());
    if mask.shape() != (frames, bins) {
        return Err(Error::shape("SCM mask", format!("{:?}", (frames, bins)), format!("{:?}", mask.shape())));
    }
    let d = x.num_channels();
    let data = x.data();
    let m = mask.values();
    let mut target = Vec::with_capacity(bins);
    let mut interference = Vec::with_capacity(bins);
    let mut v = vec![Complex64::new(0.0, 0.0); d];
    for k in 0..bins {
        let mut ss = Array2::<Complex64>::zeros((d, d));
        let mut bb = Array2::<Complex64>::zeros((d, d));
        for l in 0..frames {
            for (c, slot) in v.iter_mut().enumerate() {
                *slot = data[[c, l, k]];
            }
            let w = m[[l, k]];
            for i in 0..d {
                for j in 0..d {
                    let outer = v[i] * v[j].conj();
                    ss[[i, j]] += outer * w;
                    bb[[i, j]] += outer * (1.0 - w);
                }
            }
        }
        symmetrize(&mut ss);
        symmetrize(&mut bb);
        target.push(ss);
        interference.push(bb);
    }
    Ok(ScmSet { target, interference })
}
