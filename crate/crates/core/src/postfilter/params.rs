use std::fmt::Debug;
use std::ops::{AddAssign, DivAssign, MulAssign, Neg, SubAssign};

use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD, LinalgScalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{CellType, PostfilterConfig};

/// Real element type the network runs in: `f32` for training, `f64` for
/// analytic gradient checks, double-double for the finite-difference side.
pub trait Scalar:
    LinalgScalar + AddAssign + SubAssign + MulAssign + DivAssign + Neg<Output = Self> + PartialOrd + Send + Sync + Debug
{
    fn of_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
    fn exp(self) -> Self;
    fn tanh(self) -> Self;
    fn is_finite(self) -> bool;
}

macro_rules! native_scalar {
    ($($t:ty),*) => {$(
        impl Scalar for $t {
            fn of_f64(v: f64) -> Self {
                v as $t
            }
            fn as_f64(self) -> f64 {
                self as f64
            }
            fn exp(self) -> Self {
                <$t>::exp(self)
            }
            fn tanh(self) -> Self {
                <$t>::tanh(self)
            }
            fn is_finite(self) -> bool {
                <$t>::is_finite(self)
            }
        }
    )*};
}

native_scalar!(f32, f64);

pub(crate) fn cst<T: Scalar>(v: f64) -> T {
    T::of_f64(v)
}

/// One recurrent layer. Gate blocks are stacked along the rows:
/// `[r, z, n]` for GRU and `[i, f, g, o]` for LSTM.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnLayer<T> {
    pub w_ih: Array2<T>,
    pub w_hh: Array2<T>,
    pub b_ih: Array1<T>,
    pub b_hh: Array1<T>,
}

/// Every trainable tensor of the postfilter. Also used for gradients and
/// optimizer moments, which share the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub rnn: Vec<RnnLayer<T>>,
    pub fc_w: Array2<T>,
    pub fc_b: Array1<T>,
}

impl<T: Scalar> Params<T> {
    pub fn zeros(config: &PostfilterConfig) -> Self {
        let (g, h) = (config.cell.gates(), config.hidden);
        let rnn = (0..config.layers)
            .map(|l| RnnLayer {
                w_ih: Array2::zeros((g * h, config.layer_input_width(l))),
                w_hh: Array2::zeros((g * h, h)),
                b_ih: Array1::zeros(g * h),
                b_hh: Array1::zeros(g * h),
            })
            .collect();
        Self {
            rnn,
            fc_w: Array2::zeros((config.output_width(), h)),
            fc_b: Array1::zeros(config.output_width()),
        }
    }

    /// Weights uniform in `+-1/sqrt(H)`, biases zero, LSTM forget bias one.
    pub fn init(config: &PostfilterConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (config.hidden as f64).sqrt();
        let mut p = Self::zeros(config);
        let mut fill = |a: &mut Array2<T>| a.mapv_inplace(|_| cst(rng.random_range(-bound..bound)));
        for layer in &mut p.rnn {
            fill(&mut layer.w_ih);
            fill(&mut layer.w_hh);
        }
        fill(&mut p.fc_w);
        if config.cell == CellType::Lstm {
            let h = config.hidden;
            for layer in &mut p.rnn {
                layer.b_ih.slice_mut(ndarray::s![h..2 * h]).fill(T::one());
            }
        }
        p
    }

    /// Tensor names in a fixed order, matching [`Params::tensors`].
    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for l in 0..self.rnn.len() {
            for kind in ["weight_ih", "weight_hh", "bias_ih", "bias_hh"] {
                out.push(format!("rnn.{kind}_l{l}"));
            }
        }
        out.push("fc.weight".into());
        out.push("fc.bias".into());
        out
    }

    pub fn tensors(&self) -> Vec<ArrayViewD<'_, T>> {
        let mut out = Vec::new();
        for layer in &self.rnn {
            out.push(layer.w_ih.view().into_dyn());
            out.push(layer.w_hh.view().into_dyn());
            out.push(layer.b_ih.view().into_dyn());
            out.push(layer.b_hh.view().into_dyn());
        }
        out.push(self.fc_w.view().into_dyn());
        out.push(self.fc_b.view().into_dyn());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, T>> {
        let mut out = Vec::new();
        for layer in &mut self.rnn {
            out.push(layer.w_ih.view_mut().into_dyn());
            out.push(layer.w_hh.view_mut().into_dyn());
            out.push(layer.b_ih.view_mut().into_dyn());
            out.push(layer.b_hh.view_mut().into_dyn());
        }
        out.push(self.fc_w.view_mut().into_dyn());
        out.push(self.fc_b.view_mut().into_dyn());
        out
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// `self += alpha * other`, tensor by tensor.
    pub fn add_scaled(&mut self, alpha: T, other: &Self) {
        for (mut a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.scaled_add(alpha, &b);
        }
    }

    pub fn cast<U: Scalar>(&self) -> Params<U> {
        let c2 = |a: &Array2<T>| a.mapv(|v| cst::<U>(v.as_f64()));
        let c1 = |a: &Array1<T>| a.mapv(|v| cst::<U>(v.as_f64()));
        Params {
            rnn: self
                .rnn
                .iter()
                .map(|l| RnnLayer { w_ih: c2(&l.w_ih), w_hh: c2(&l.w_hh), b_ih: c1(&l.b_ih), b_hh: c1(&l.b_hh) })
                .collect(),
            fc_w: c2(&self.fc_w),
            fc_b: c1(&self.fc_b),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::postfilter::config::InputMode;

    #[test]
    fn count_matches_formula_and_names_align() {
        for cell in [CellType::Gru, CellType::Lstm] {
            for layers in [1, 2] {
                let c = PostfilterConfig::new(cell, layers, 16, InputMode::TargetPlusInterference).with_feature_bins(9);
                let p = Params::<f32>::init(&c, 0);
                assert_eq!(p.count(), c.parameter_count());
                assert_eq!(p.names().len(), p.tensors().len());
            }
        }
    }

    #[test]
    fn init_is_bounded_and_seeded() {
        let c = PostfilterConfig::new(CellType::Lstm, 2, 25, InputMode::TargetOnly).with_feature_bins(7);
        let p = Params::<f64>::init(&c, 3);
        assert_eq!(p, Params::<f64>::init(&c, 3));
        assert_ne!(p, Params::<f64>::init(&c, 4));
        for w in [&p.rnn[0].w_ih, &p.rnn[1].w_hh, &p.fc_w] {
            assert!(w.iter().all(|v| v.abs() <= 0.2));
        }
        // Forget gate block is the second quarter.
        assert!(p.rnn[1].b_ih.iter().enumerate().all(|(i, v)| *v == if (25..50).contains(&i) { 1.0 } else { 0.0 }));
        assert!(p.rnn[0].b_hh.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn cast_round_trips_f32_values() {
        let c = PostfilterConfig::new(CellType::Gru, 1, 4, InputMode::TargetOnly).with_feature_bins(3);
        let p = Params::<f32>::init(&c, 1);
        assert_eq!(p.cast::<f64>().cast::<f32>(), p);
    }
}
