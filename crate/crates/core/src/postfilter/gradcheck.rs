//! Central finite-difference check of the analytic gradients.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::PostfilterConfig;
use super::double::DoubleDouble;
use super::network::{Postfilter, SequenceExample, TrainingBatch};
use super::params::Scalar;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    pub worst_tensor: String,
    /// Analytic and numeric values at the worst element.
    pub worst_pair: (f64, f64),
    pub checked: usize,
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

struct Problem {
    feats: Vec<Array2<f64>>,
    targets: Vec<Array2<f64>>,
    weights: Vec<Array2<f64>>,
}

impl Problem {
    fn batch<T: Scalar>(&self) -> Result<TrainingBatch<T>> {
        let c = |a: &Array2<f64>| a.mapv(T::of_f64);
        let (f, t, w): (Vec<_>, Vec<_>, Vec<_>) = (
            self.feats.iter().map(c).collect(),
            self.targets.iter().map(c).collect(),
            self.weights.iter().map(c).collect(),
        );
        let examples: Vec<_> = (0..f.len())
            .map(|i| SequenceExample { features: f[i].view(), target: t[i].view(), weight: w[i].view() })
            .collect();
        TrainingBatch::new(&examples)
    }
}

/// Compares every analytic partial derivative of a double-precision model with
/// `(L(p + h) - L(p - h)) / 2h` on a random two-sequence batch of unequal
/// lengths. Dropout is active with masks held fixed by reseeding.
///
/// The two loss evaluations run the same network code in double-double
/// arithmetic. In plain `f64` their rounding error, divided by `2h`, is of
/// the order of 1e-12 and swamps the smallest partials.
pub fn gradient_check(config: &PostfilterConfig, seed: u64, frames: usize, step: f64) -> Result<GradientCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Postfilter::<f64>::new(config.clone(), seed)?;
    for mut t in model.params_mut().tensors_mut() {
        t.mapv_inplace(|_| rng.random_range(-0.6..0.6));
    }
    let (f, k) = (config.input_width(), config.output_width());
    let lengths = [frames, frames.saturating_sub(1).max(1)];
    let mut draw = |cols: usize, lo: f64, hi: f64| -> Vec<Array2<f64>> {
        lengths.iter().map(|&l| Array2::from_shape_simple_fn((l, cols), || rng.random_range(lo..hi))).collect()
    };
    let problem = Problem { feats: draw(f, -2.0, 2.0), targets: draw(k, 0.0, 1.0), weights: draw(k, 0.5, 2.0) };
    let drop_seed = seed ^ 0x5eed;

    let (_, grad) = model.loss_and_gradient(&problem.batch()?, Some(&mut ChaCha8Rng::seed_from_u64(drop_seed)))?;
    let mut wide = model.cast::<DoubleDouble>();
    let wide_batch = problem.batch::<DoubleDouble>()?;
    let h = DoubleDouble::of_f64(step);
    let eval = |m: &Postfilter<DoubleDouble>| m.loss(&wide_batch, Some(&mut ChaCha8Rng::seed_from_u64(drop_seed)));

    let names = model.params().names();
    let mut report = GradientCheck { max_relative_error: 0.0, worst_tensor: String::new(), worst_pair: (0.0, 0.0), checked: 0 };
    for (ti, name) in names.iter().enumerate() {
        let analytic: Vec<f64> = grad.tensors()[ti].iter().copied().collect();
        for (idx, &a) in analytic.iter().enumerate() {
            let original = *wide.params().tensors()[ti].iter().nth(idx).expect("index in range");
            set(&mut wide, ti, idx, original + h);
            let plus = eval(&wide)?;
            set(&mut wide, ti, idx, original - h);
            let minus = eval(&wide)?;
            set(&mut wide, ti, idx, original);
            let numeric = ((plus - minus) / (h + h)).as_f64();
            let err = relative_error(a, numeric);
            if err > report.max_relative_error || report.worst_tensor.is_empty() {
                report.max_relative_error = report.max_relative_error.max(err);
                report.worst_tensor = name.clone();
                report.worst_pair = (a, numeric);
            }
            report.checked += 1;
        }
    }
    Ok(report)
}

fn set<T: Scalar>(model: &mut Postfilter<T>, tensor: usize, index: usize, value: T) {
    let mut tensors = model.params_mut().tensors_mut();
    *tensors[tensor].iter_mut().nth(index).expect("index in range") = value;
}
