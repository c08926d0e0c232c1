//! Test-set protocol: metrics of the plain MVDR output (N) and of the
//! postfiltered outputs of baseline (B) and proposed (P) models.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::record::ExampleRecord;
use crate::beamformer::{apply_mask, MaskTensor};
use crate::dsp::{istft, AudioBuffer};
use crate::error::{Error, Result};
use crate::metrics::MetricName;
use crate::postfilter::{estimate_mask, mask_loss, InputMode, LossConfig, PostfilterModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    /// MVDR output without postfilter.
    N,
    /// Postfilter fed the target estimate only.
    B,
    /// Postfilter fed the target and interference estimates.
    P,
}

impl Condition {
    pub fn for_mode(mode: InputMode) -> Self {
        match mode {
            InputMode::TargetOnly => Condition::B,
            InputMode::TargetPlusInterference => Condition::P,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Condition::N => "N",
            Condition::B => "B",
            Condition::P => "P",
        }
    }
}

/// A trained model together with the architecture label it is reported under.
#[derive(Debug, Clone, Copy)]
pub struct EvalModel<'a> {
    pub architecture: &'a str,
    pub model: &'a PostfilterModel,
}

impl EvalModel<'_> {
    pub fn condition(&self) -> Condition {
        Condition::for_mode(self.model.config().input_mode)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Enhanced {
    pub mask: MaskTensor,
    pub output: AudioBuffer,
    /// Inverse STFT of the target beamformer output.
    pub mvdr: AudioBuffer,
}

/// Postfilters the target beamformer output of `record`. Without a model the
/// mask is one everywhere and the output equals the MVDR output.
pub fn enhance_record(record: &ExampleRecord, model: Option<&PostfilterModel>) -> Result<Enhanced> {
    let mvdr = istft(&record.y_target)?;
    let Some(model) = model else {
        let mask = MaskTensor::filled(record.y_target.shape(), 1.0)?;
        return Ok(Enhanced { mask, output: mvdr.clone(), mvdr });
    };
    let expected = model.config().feature_bins;
    if record.y_target.num_bins() != expected {
        return Err(Error::shape("model frequency bins", expected, record.y_target.num_bins()));
    }
    let mask = estimate_mask(model, &record.features(model.config().input_mode)?)?;
    let output = istft(&apply_mask(&mask, &record.y_target)?)?;
    Ok(Enhanced { mask, output, mvdr })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceResult {
    pub id: String,
    pub architecture: String,
    pub condition: Condition,
    pub scores: BTreeMap<MetricName, f64>,
    /// Postfilter loss against the oracle mask (absent for N).
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub architecture: String,
    pub condition: Condition,
    pub utterances: usize,
    pub scores: BTreeMap<MetricName, f64>,
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub metrics: Vec<MetricName>,
    pub rows: Vec<ConditionSummary>,
    pub utterances: Vec<UtteranceResult>,
}

impl MetricsReport {
    pub fn row(&self, architecture: &str, condition: Condition) -> Option<&ConditionSummary> {
        self.rows.iter().find(|r| r.condition == condition && (r.architecture == architecture || condition == Condition::N))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e))
    }
}

fn scores(metrics: &[MetricName], estimate: &AudioBuffer, reference: &AudioBuffer) -> Result<BTreeMap<MetricName, f64>> {
    metrics.iter().map(|m| Ok((*m, m.compute(estimate, reference)?.value))).collect()
}

/// Per-utterance results for one record: N first, then every model in order.
pub fn evaluate_record(
    record: &ExampleRecord,
    models: &[EvalModel<'_>],
    metrics: &[MetricName],
    loss: &LossConfig,
) -> Result<Vec<UtteranceResult>> {
    let plain = enhance_record(record, None)?;
    let mut out = vec![UtteranceResult {
        id: record.id.clone(),
        architecture: String::new(),
        condition: Condition::N,
        scores: scores(metrics, &plain.mvdr, &record.reference)?,
        loss: None,
    }];
    let rest: Vec<UtteranceResult> = models
        .par_iter()
        .map(|m| {
            let e = enhance_record(record, Some(m.model))?;
            Ok(UtteranceResult {
                id: record.id.clone(),
                architecture: m.architecture.to_string(),
                condition: m.condition(),
                scores: scores(metrics, &e.output, &record.reference)?,
                loss: Some(mask_loss(&record.mask, &e.mask, &record.y_target, loss)?),
            })
        })
        .collect::<Result<_>>()?;
    out.extend(rest);
    Ok(out)
}

/// Evaluates every model on every record, consuming records one at a time.
pub fn evaluate(
    models: &[EvalModel<'_>],
    records: impl IntoIterator<Item = Result<ExampleRecord>>,
    metrics: &[MetricName],
    loss: &LossConfig,
) -> Result<MetricsReport> {
    let mut utterances = Vec::new();
    for record in records {
        utterances.extend(evaluate_record(&record?, models, metrics, loss)?);
    }
    Ok(summarize(metrics, utterances))
}

/// Averages per-utterance results. Rows: the shared N row first, then B and
/// P for each architecture in sorted order.
pub fn summarize(metrics: &[MetricName], utterances: Vec<UtteranceResult>) -> MetricsReport {
    let mut groups: BTreeMap<(String, Condition), Vec<&UtteranceResult>> = BTreeMap::new();
    for u in &utterances {
        groups.entry((u.architecture.clone(), u.condition)).or_default().push(u);
    }
    let rows = groups
        .into_iter()
        .map(|((architecture, condition), items)| {
            let n = items.len() as f64;
            let scores = metrics.iter().map(|m| (*m, items.iter().map(|u| u.scores[m]).sum::<f64>() / n)).collect();
            let losses: Vec<f64> = items.iter().filter_map(|u| u.loss).collect();
            let loss = (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64);
            ConditionSummary { architecture, condition, utterances: items.len(), scores, loss }
        })
        .collect();
    MetricsReport { metrics: metrics.to_vec(), rows, utterances }
}
