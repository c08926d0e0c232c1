//! End-to-end run: simulate, train every grid configuration, evaluate.

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::postfilter::{PostfilterConfig, PostfilterModel};
use crate::spatial::SpeechSource;

use super::dataset::{generate_dataset, InMemoryDataset};
use super::evaluate::{evaluate, EvalModel, MetricsReport};
use super::train::{tensor_examples, train, EpochLoss, TrainOutcome};

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub config: PostfilterConfig,
    pub outcome: TrainOutcome,
}

impl TrainedModel {
    pub fn model(&self) -> &PostfilterModel {
        &self.outcome.model
    }

    /// Directory-safe name, e.g. `gru-1-128-target-only`.
    pub fn name(&self) -> String {
        model_name(&self.config)
    }
}

pub fn model_name(config: &PostfilterConfig) -> String {
    format!("{}-{}", config.label(), config.input_mode.name())
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub models: Vec<TrainedModel>,
    pub report: MetricsReport,
}

/// Trains every configuration of the grid on the train/valid splits.
pub fn train_grid(
    cfg: &ExperimentConfig,
    data: &InMemoryDataset,
    mut on_epoch: impl FnMut(&PostfilterConfig, &EpochLoss),
) -> Result<Vec<TrainedModel>> {
    let beta = cfg.train.loss.beta;
    let mut out = Vec::new();
    for config in cfg.model_configs() {
        let tr = tensor_examples(&data.train, config.input_mode, beta);
        let va = tensor_examples(&data.valid, config.input_mode, beta);
        let outcome = train(&config, &tr, &va, &cfg.train, |e| on_epoch(&config, e))?;
        out.push(TrainedModel { config: outcome.model.config().clone(), outcome });
    }
    Ok(out)
}

pub fn evaluate_models(cfg: &ExperimentConfig, models: &[TrainedModel], data: &InMemoryDataset) -> Result<MetricsReport> {
    let labels: Vec<String> = models.iter().map(|m| m.config.label()).collect();
    let eval: Vec<EvalModel<'_>> =
        models.iter().zip(&labels).map(|(m, l)| EvalModel { architecture: l, model: m.model() }).collect();
    evaluate(&eval, data.test.iter().cloned().map(Ok), &cfg.metrics, &cfg.train.loss)
}

pub fn run_experiment(
    cfg: &ExperimentConfig,
    speech: &dyn SpeechSource,
    on_epoch: impl FnMut(&PostfilterConfig, &EpochLoss),
) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let data = generate_dataset(cfg.seed, &cfg.train.splits, &cfg.simulation, &cfg.pipeline, speech)?;
    let models = train_grid(cfg, &data, on_epoch)?;
    let report = evaluate_models(cfg, &models, &data)?;
    Ok(ExperimentOutcome { models, report })
}
