use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::postfilter::Params;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if !ok {
            return Err(Error::Config(format!("invalid Adam settings {self:?}")));
        }
        Ok(())
    }
}

/// Adam with bias-corrected moment estimates over single-precision parameters.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    m: Params<f32>,
    v: Params<f32>,
    step: i32,
}

impl Adam {
    pub fn new(config: AdamConfig, like: &Params<f32>) -> Self {
        let zero = |p: &Params<f32>| {
            let mut z = p.clone();
            z.tensors_mut().into_iter().for_each(|mut t| t.fill(0.0));
            z
        };
        Self { config, m: zero(like), v: zero(like), step: 0 }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }

    pub fn update(&mut self, params: &mut Params<f32>, grad: &Params<f32>) {
        self.step += 1;
        let c = self.config;
        let (b1, b2) = (c.beta1 as f32, c.beta2 as f32);
        let bc1 = 1.0 - c.beta1.powi(self.step);
        let bc2 = 1.0 - c.beta2.powi(self.step);
        // Step size with both bias corrections folded in; epsilon is applied
        // to the corrected second moment.
        let lr = (c.learning_rate / bc1) as f32;
        let inv_bc2 = (1.0 / bc2) as f32;
        let eps = c.epsilon as f32;
        let tensors = params.tensors_mut().into_iter().zip(self.m.tensors_mut()).zip(self.v.tensors_mut()).zip(grad.tensors());
        for (((mut p, mut m), mut v), g) in tensors {
            ndarray::Zip::from(&mut p).and(&mut m).and(&mut v).and(&g).for_each(|p, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * *m / ((*v * inv_bc2).sqrt() + eps);
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::postfilter::{CellType, InputMode, PostfilterConfig};

    fn params() -> Params<f32> {
        Params::init(&PostfilterConfig::new(CellType::Gru, 1, 3, InputMode::TargetOnly).with_feature_bins(2), 1)
    }

    #[test]
    fn zero_gradient_or_rate_leaves_parameters() {
        let p0 = params();
        let mut zero_grad = p0.clone();
        zero_grad.tensors_mut().into_iter().for_each(|mut t| t.fill(0.0));
        let mut p = p0.clone();
        let mut adam = Adam::new(AdamConfig::default(), &p);
        adam.update(&mut p, &zero_grad);
        assert_eq!(p, p0);
        let mut adam = Adam::new(AdamConfig { learning_rate: 0.0, ..Default::default() }, &p);
        adam.update(&mut p, &p0);
        assert_eq!(p, p0);
    }

    /// Scalar reference: standard bias-corrected Adam in double precision.
    #[test]
    fn matches_scalar_reference() {
        let cfg = AdamConfig { learning_rate: 0.01, ..Default::default() };
        let mut p = params();
        let mut adam = Adam::new(cfg, &p);
        let grads = [0.5f64, -0.2, 0.05, 1.5];
        let (mut x, mut m, mut v) = (p.fc_b[0] as f64, 0.0, 0.0);
        for (t, g) in grads.iter().enumerate() {
            let mut grad = p.clone();
            grad.tensors_mut().into_iter().for_each(|mut a| a.fill(*g as f32));
            adam.update(&mut p, &grad);
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let (mh, vh) = (m / (1.0 - 0.9f64.powi(t as i32 + 1)), v / (1.0 - 0.999f64.powi(t as i32 + 1)));
            x -= 0.01 * mh / (vh.sqrt() + 1e-8);
            assert!((p.fc_b[0] as f64 - x).abs() < 1e-6);
        }
        assert_eq!(adam.steps(), 4);
        assert!(AdamConfig { beta1: 1.0, ..Default::default() }.validate().is_err());
    }
}
