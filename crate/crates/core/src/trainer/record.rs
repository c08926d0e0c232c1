//! Per-scene processing: STFT, oracle SCMs, both MVDR filters and the
//! postfilter training target.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::beamformer::{
    apply_weights, mvdr_weights, oracle_mask_from_premix, oracle_postfilter_mask, scm_from_mask, BeamRole,
    LoadingConfig, MaskTensor,
};
use crate::dsp::{AudioBuffer, Spectrogram, StftConfig, StftProcessor};
use crate::error::{Error, Result};
use crate::postfilter::{build_features, loss_weight, FeatureTensor, InputMode};
use crate::spatial::{Scene, SceneRender};

/// Signal-processing settings shared by dataset preparation, evaluation and
/// enhancement.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub stft: StftConfig,
    /// Microphone index selected by the one-hot reference vector.
    pub reference_channel: usize,
    pub loading: LoadingConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.stft.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RecordDiagnostics {
    pub target_fallback_bins: usize,
    pub interf_fallback_bins: usize,
    pub max_condition_number: f64,
}

/// Everything the postfilter stage needs from one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleRecord {
    pub id: String,
    pub scene: Option<Scene>,
    pub y_target: Spectrogram,
    pub y_interf: Spectrogram,
    /// Target-beamformer output for the interference-free input.
    pub y_ref: Spectrogram,
    /// Oracle postfilter mask.
    pub mask: MaskTensor,
    /// Reference-channel target image, the clean signal for metrics.
    pub reference: AudioBuffer,
    pub diagnostics: RecordDiagnostics,
}

impl ExampleRecord {
    pub fn features(&self, mode: InputMode) -> Result<FeatureTensor> {
        build_features(&self.y_target, Some(&self.y_interf), mode)
    }

    /// `|Y_target|^beta`.
    pub fn weight(&self, beta: f64) -> Array2<f64> {
        loss_weight(self.y_target.magnitude().view(), beta)
    }
}

/// Runs the oracle-SCM dual beamformer on a rendered scene.
pub fn process_render(id: impl Into<String>, scene: Option<Scene>, render: &SceneRender, cfg: &PipelineConfig) -> Result<ExampleRecord> {
    let d = render.mixture.num_channels();
    if render.target_image.num_channels() != d || render.interf_image.num_channels() != d {
        return Err(Error::shape(
            "scene images",
            format!("{d} channels"),
            format!("{} / {}", render.target_image.num_channels(), render.interf_image.num_channels()),
        ));
    }
    if cfg.reference_channel >= d {
        return Err(Error::InvalidInput(format!("reference channel {} out of range for {d} microphones", cfg.reference_channel)));
    }
    let proc = StftProcessor::new(cfg.stft)?;
    let x = proc.analyze_multichannel(&render.mixture)?;
    let s = proc.analyze_multichannel(&render.target_image)?;
    let b = proc.analyze_multichannel(&render.interf_image)?;
    let premix_mask = oracle_mask_from_premix(&s, &b, cfg.reference_channel)?;
    let scms = scm_from_mask(&x, &premix_mask)?;
    let w_target = mvdr_weights(&scms, cfg.reference_channel, BeamRole::Target, &cfg.loading)?;
    let w_interf = mvdr_weights(&scms, cfg.reference_channel, BeamRole::Interference, &cfg.loading)?;
    let y_target = apply_weights(&w_target, &x)?;
    let y_interf = apply_weights(&w_interf, &x)?;
    let y_ref = apply_weights(&w_target, &s)?;
    let mask = oracle_postfilter_mask(&y_target, &y_ref)?;
    let diagnostics = RecordDiagnostics {
        target_fallback_bins: w_target.diagnostics.fallback_bins.len(),
        interf_fallback_bins: w_interf.diagnostics.fallback_bins.len(),
        max_condition_number: w_target.diagnostics.max_condition_number().max(w_interf.diagnostics.max_condition_number()),
    };
    Ok(ExampleRecord {
        id: id.into(),
        scene,
        y_target,
        y_interf,
        y_ref,
        mask,
        reference: render.target_image.channel(cfg.reference_channel).clone(),
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::MultichannelAudio;
    use crate::spatial::{render_scene, sample_scene, ArrayGeometry, SceneConstraints, SpeechSource, SyntheticSpeech};

    fn render(seed: u64, silent_interference: bool) -> (Scene, SceneRender) {
        let scene = sample_scene(seed, &ArrayGeometry::catalog(), &SceneConstraints::default()).unwrap();
        let (a, b) = scene.utterance_seeds();
        let s = SyntheticSpeech.utterance(a, 16_000, 16_000).unwrap();
        let i = if silent_interference { AudioBuffer::zeros(16_000, 16_000) } else { SyntheticSpeech.utterance(b, 16_000, 16_000).unwrap() };
        let r = render_scene(&scene, &s, &i).unwrap();
        (scene, r)
    }

    #[test]
    fn silent_interference_gives_unit_mask_and_equal_outputs() {
        let (scene, r) = render(4, true);
        let rec = process_render("a", Some(scene), &r, &PipelineConfig::default()).unwrap();
        assert_eq!(rec.y_target, rec.y_ref);
        // Equal magnitudes: the pre-clip ratio differs from one only by the floor.
        for (y, m) in rec.y_target.data().iter().zip(rec.mask.values()) {
            assert!((m - y.norm() / (y.norm() + 1e-9)).abs() < 1e-12);
        }
    }

    #[test]
    fn record_shapes_and_reference_signal() {
        let (scene, r) = render(5, false);
        let cfg = PipelineConfig { reference_channel: 1, ..Default::default() };
        let rec = process_render("b", Some(scene), &r, &cfg).unwrap();
        let shape = rec.y_target.shape();
        assert_eq!(rec.y_interf.shape(), shape);
        assert_eq!(rec.mask.shape(), shape);
        assert_eq!(rec.reference, *r.target_image.channel(1));
        assert_eq!(rec.features(InputMode::TargetPlusInterference).unwrap().ncols(), 2 * shape.1);
        assert_eq!(rec.weight(0.25).dim(), shape);
        assert!(rec.diagnostics.max_condition_number.is_finite());
    }

    #[test]
    fn channel_mismatch_and_bad_reference_fail() {
        let (_, r) = render(6, false);
        let bad = SceneRender { interf_image: MultichannelAudio::zeros(1, r.mixture.len(), 16_000), ..r.clone() };
        assert!(process_render("c", None, &bad, &PipelineConfig::default()).is_err());
        let cfg = PipelineConfig { reference_channel: 9, ..Default::default() };
        assert!(process_render("c", None, &r, &cfg).is_err());
    }
}
