//! Mini-batch training with validation after every epoch.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::dataset::{CompactRecord, SplitCounts};
use crate::error::{Error, Result};
use crate::postfilter::{InputMode, InputNorm, LossConfig, PostfilterConfig, PostfilterModel, SequenceExample, TrainingBatch};

const SHUFFLE_STREAM: u64 = 0x5348_5546;
const DROPOUT_STREAM: u64 = 0x4452_4f50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Seeds parameter initialization, shuffling and dropout.
    pub seed: u64,
    pub adam: AdamConfig,
    pub loss: LossConfig,
    pub splits: SplitCounts,
    /// Standardize inputs with the mean and deviation of the training features.
    pub normalize_features: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 8,
            seed: 0,
            adam: AdamConfig::default(),
            loss: LossConfig::default(),
            splits: SplitCounts::default(),
            normalize_features: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        self.adam.validate()?;
        self.loss.validate()?;
        self.splits.validate()
    }
}

/// Network inputs, oracle mask and loss weight of one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorExample {
    pub features: Array2<f32>,
    pub target: Array2<f32>,
    pub weight: Array2<f32>,
}

impl TensorExample {
    pub fn from_record(r: &CompactRecord, mode: InputMode, beta: f64) -> Self {
        Self { features: r.features(mode), target: r.mask.clone(), weight: r.weight(beta) }
    }

    fn view(&self) -> SequenceExample<'_, f32> {
        SequenceExample { features: self.features.view(), target: self.target.view(), weight: self.weight.view() }
    }

    fn bins(&self) -> usize {
        self.target.len()
    }
}

pub fn tensor_examples(records: &[CompactRecord], mode: InputMode, beta: f64) -> Vec<TensorExample> {
    records.iter().map(|r| TensorExample::from_record(r, mode, beta)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean training loss over the epoch, dropout active.
    pub train: f64,
    pub valid: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the lowest validation loss.
    pub model: PostfilterModel,
    pub best_epoch: Option<usize>,
    pub curve: Vec<EpochLoss>,
    /// Reason training stopped early, if it did.
    pub aborted: Option<String>,
}

fn batch(examples: &[&TensorExample]) -> Result<TrainingBatch<f32>> {
    let views: Vec<_> = examples.iter().map(|e| e.view()).collect();
    TrainingBatch::new(&views)
}

/// Loss over all bins of `examples`, dropout disabled.
pub fn dataset_loss(model: &PostfilterModel, examples: &[TensorExample], batch_size: usize) -> Result<f64> {
    let (mut total, mut bins) = (0.0, 0usize);
    for chunk in examples.chunks(batch_size.max(1)) {
        let refs: Vec<&TensorExample> = chunk.iter().collect();
        let n: usize = chunk.iter().map(TensorExample::bins).sum();
        total += model.loss(&batch(&refs)?, None)? as f64 * n as f64;
        bins += n;
    }
    Ok(if bins == 0 { 0.0 } else { total / bins as f64 })
}

/// Trains a freshly initialized model for `cfg.epochs` epochs and keeps the
/// best-validation parameters. A non-finite loss stops training; the
/// outcome then records the reason and holds the last good parameters.
pub fn train(
    config: &PostfilterConfig,
    train_set: &[TensorExample],
    valid_set: &[TensorExample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLoss),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() || valid_set.is_empty() {
        return Err(Error::InvalidInput("training and validation sets must be non-empty".into()));
    }
    let mut config = config.clone();
    if cfg.normalize_features {
        config.input_norm = InputNorm::fit(train_set.iter().flat_map(|e| e.features.iter()));
    }
    let mut model = PostfilterModel::new(config, cfg.seed)?;
    let mut adam = Adam::new(cfg.adam, model.params());
    let mut shuffle = ChaCha8Rng::seed_from_u64(cfg.seed ^ SHUFFLE_STREAM);
    let mut dropout = ChaCha8Rng::seed_from_u64(cfg.seed ^ DROPOUT_STREAM);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best = model.clone();
    let (mut best_loss, mut best_epoch) = (f64::INFINITY, None);
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut aborted = None;

    'epochs: for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle);
        let (mut total, mut bins) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let refs: Vec<&TensorExample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (loss, grad) = match model.loss_and_gradient(&batch(&refs)?, Some(&mut dropout)) {
                Ok(v) => v,
                Err(Error::Numeric(msg)) => {
                    aborted = Some(format!("epoch {epoch}: {msg}"));
                    break 'epochs;
                }
                Err(e) => return Err(e),
            };
            adam.update(model.params_mut(), &grad);
            if !model.params().is_finite() {
                aborted = Some(format!("epoch {epoch}: parameters became non-finite"));
                break 'epochs;
            }
            let n: usize = refs.iter().map(|e| e.bins()).sum();
            total += loss as f64 * n as f64;
            bins += n;
        }
        let valid = dataset_loss(&model, valid_set, cfg.batch_size)?;
        if !valid.is_finite() {
            aborted = Some(format!("epoch {epoch}: non-finite validation loss"));
            break;
        }
        let entry = EpochLoss { epoch, train: total / bins as f64, valid };
        on_epoch(&entry);
        curve.push(entry);
        if valid < best_loss {
            best_loss = valid;
            best_epoch = Some(epoch);
            best = model.clone();
        }
    }
    Ok(TrainOutcome { model: best, best_epoch, curve, aborted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::postfilter::CellType;
    use rand::Rng;

    fn example(seed: u64, frames: usize, bins: usize, mode: InputMode) -> TensorExample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mag = Array2::from_shape_simple_fn((frames, bins), || rng.random_range(0.01f32..3.0));
        let interf = Array2::from_shape_simple_fn((frames, bins), || rng.random_range(0.01f32..3.0));
        let mask = Array2::from_shape_fn((frames, bins), |(t, k)| if (t + k) % 3 == 0 { 0.9 } else { 0.2 });
        let r = CompactRecord { id: seed.to_string(), target_mag: mag, interf_mag: interf, mask };
        TensorExample::from_record(&r, mode, 0.25)
    }

    fn tiny(mode: InputMode) -> PostfilterConfig {
        PostfilterConfig::new(CellType::Gru, 1, 16, mode).with_feature_bins(6)
    }

    #[test]
    fn zero_learning_rate_keeps_initial_parameters() {
        let mode = InputMode::TargetOnly;
        let data: Vec<_> = (0..3).map(|s| example(s, 10, 6, mode)).collect();
        let cfg = TrainConfig { epochs: 1, batch_size: 2, adam: AdamConfig { learning_rate: 0.0, ..Default::default() }, ..Default::default() };
        let out = train(&tiny(mode), &data, &data, &cfg, |_| {}).unwrap();
        assert_eq!(out.model.params(), PostfilterModel::new(tiny(mode), 0).unwrap().params());
        assert!(!out.model.config().input_norm.is_identity());
        assert_eq!(out.curve.len(), 1);
    }

    #[test]
    fn single_example_overfits() {
        let mode = InputMode::TargetPlusInterference;
        let data = vec![example(3, 20, 6, mode)];
        let config = tiny(mode).with_dropout(0.0);
        let initial = dataset_loss(&PostfilterModel::new(config.clone(), 0).unwrap(), &data, 1).unwrap();
        let cfg = TrainConfig { epochs: 200, batch_size: 1, adam: AdamConfig { learning_rate: 1e-2, ..Default::default() }, ..Default::default() };
        let out = train(&config, &data, &data, &cfg, |_| {}).unwrap();
        let last = out.curve.last().unwrap().train;
        assert!(last < 0.1 * initial, "{last} vs {initial}");
    }

    #[test]
    fn curves_are_reproducible_and_best_epoch_is_kept() {
        let mode = InputMode::TargetOnly;
        let train_set: Vec<_> = (0..5).map(|s| example(s, 12, 6, mode)).collect();
        let valid: Vec<_> = (10..12).map(|s| example(s, 9, 6, mode)).collect();
        let cfg = TrainConfig { epochs: 4, batch_size: 2, ..Default::default() };
        let a = train(&tiny(mode), &train_set, &valid, &cfg, |_| {}).unwrap();
        let b = train(&tiny(mode), &train_set, &valid, &cfg, |_| {}).unwrap();
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.model, b.model);
        let best = a.curve.iter().min_by(|x, y| x.valid.total_cmp(&y.valid)).unwrap();
        assert_eq!(a.best_epoch, Some(best.epoch));
        assert_eq!(dataset_loss(&a.model, &valid, 2).unwrap(), best.valid);
    }

    #[test]
    fn non_finite_loss_aborts_with_finite_model() {
        let mode = InputMode::TargetOnly;
        let mut data: Vec<_> = (0..2).map(|s| example(s, 8, 6, mode)).collect();
        data[1].weight.fill(f32::MAX);
        let cfg = TrainConfig { epochs: 3, batch_size: 1, ..Default::default() };
        let out = train(&tiny(mode), &data, &data[..1], &cfg, |_| {}).unwrap();
        assert!(out.aborted.is_some());
        assert!(out.model.params().is_finite());
    }
}
