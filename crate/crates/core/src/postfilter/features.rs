use ndarray::{concatenate, Array2, ArrayView2, Axis};

use super::config::InputMode;
use num_traits::Float;

use crate::beamformer::MAGNITUDE_FLOOR;
use crate::dsp::Spectrogram;
use crate::error::{Error, Result};

/// Log-magnitude network input, `L` frames by `F` features.
pub type FeatureTensor = Array2<f64>;

/// `log(|Y| + eps)` per bin; the interference stream, when used, occupies the
/// second half of each row.
pub fn build_features(y_target: &Spectrogram, y_interf: Option<&Spectrogram>, mode: InputMode) -> Result<FeatureTensor> {
    let mt = y_target.magnitude();
    let mi = y_interf.map(|y| y.magnitude());
    features_from_magnitudes(mt.view(), mi.as_ref().map(|m| m.view()), mode)
}

/// Same as [`build_features`] starting from precomputed magnitudes.
pub fn features_from_magnitudes<T: Float + 'static>(
    target: ArrayView2<'_, T>,
    interf: Option<ArrayView2<'_, T>>,
    mode: InputMode,
) -> Result<Array2<T>> {
    let floor = T::from(MAGNITUDE_FLOOR).expect("representable");
    let log = |m: ArrayView2<'_, T>| m.mapv(|v| (v + floor).ln());
    match (mode, interf) {
        (InputMode::TargetOnly, _) => Ok(log(target)),
        (InputMode::TargetPlusInterference, Some(i)) => {
            if i.dim() != target.dim() {
                return Err(Error::shape("interference features", format!("{:?}", target.dim()), format!("{:?}", i.dim())));
            }
            Ok(concatenate(Axis(1), &[log(target).view(), log(i).view()]).expect("equal row counts"))
        }
        (InputMode::TargetPlusInterference, None) => {
            Err(Error::InvalidInput("interference estimate required for target-plus-interference input".into()))
        }
    }
}

/// Loss weight `|Y|^beta`.
pub fn loss_weight<T: Float>(magnitude: ArrayView2<'_, T>, beta: f64) -> Array2<T> {
    let b = T::from(beta).expect("representable");
    magnitude.mapv(|v| v.powf(b))
}
