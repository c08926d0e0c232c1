//! The recurrent mask estimator: GRU or LSTM layers, dropout, a sigmoid
//! output layer, the magnitude-weighted mask loss and hand-derived gradients.

mod checkpoint;
mod config;
mod double;
mod features;
mod gradcheck;
mod network;
mod params;

pub use checkpoint::{load_model, save_model, Checkpoint, TensorRecord, CHECKPOINT_VERSION};
pub use config::{CellType, InputMode, InputNorm, LossConfig, PostfilterConfig};
pub use features::{build_features, features_from_magnitudes, loss_weight, FeatureTensor};
pub use gradcheck::{gradient_check, relative_error, GradientCheck};
pub use network::{Postfilter, SequenceBatch, SequenceExample, TrainingBatch};
pub use params::{Params, RnnLayer, Scalar};

use ndarray::Zip;

use crate::beamformer::MaskTensor;
use crate::dsp::Spectrogram;
use crate::error::{Error, Result};

/// Single-precision model used for training and inference.
pub type PostfilterModel = Postfilter<f32>;

/// Inference-mode mask estimate for one utterance.
pub fn estimate_mask(model: &PostfilterModel, features: &FeatureTensor) -> Result<MaskTensor> {
    let x = features.mapv(|v| v as f32);
    let m = model.predict(x.view())?;
    Ok(MaskTensor::clipped(m.mapv(f64::from)))
}

/// `mean(((M - M_hat) |Y|^beta)^2)` over all bins.
pub fn mask_loss(target: &MaskTensor, estimate: &MaskTensor, y: &Spectrogram, cfg: &LossConfig) -> Result<f64> {
    if target.shape() != estimate.shape() || target.shape() != y.shape() {
        return Err(Error::shape("mask loss", format!("{:?}", y.shape()), format!("{:?} / {:?}", target.shape(), estimate.shape())));
    }
    let mut total = 0.0;
    Zip::from(target.values()).and(estimate.values()).and(y.data()).for_each(|m, e, c| {
        let r = (m - e) * c.norm().powf(cfg.beta);
        total += r * r;
    });
    Ok(total / target.values().len().max(1) as f64)
}
