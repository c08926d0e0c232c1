use ndarray::{Array2, Zip};

use crate::dsp::{MultichannelSpectrogram, Spectrogram};
use crate::error::{Error, Result};

/// Floor added to magnitude ratios and log arguments.
pub const MAGNITUDE_FLOOR: f64 = 1e-9;

/// Real time-frequency gains in `[0, 1]`, `L` frames by `K` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskTensor {
    values: Array2<f64>,
}

/// Coarse mask used to weight the spatial covariance estimates.
pub type OracleMask = MaskTensor;

impl MaskTensor {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInput(format!("mask value {v} outside [0, 1]")));
        }
        Ok(Self { values })
    }

    /// Clips every entry into `[0, 1]`; NaN becomes 0.
    pub fn clipped(values: Array2<f64>) -> Self {
        Self {
            values: values.mapv(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) }),
        }
    }

    pub fn filled(shape: (usize, usize), value: f64) -> Result<Self> {
        Self::new(Array2::from_elem(shape, value))
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }
}

fn check_shape(context: &'static str, a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::shape(context, format!("{a:?}"), format!("{b:?}")));
    }
    Ok(())
}

/// `|S|^2 / (|S|^2 + |B|^2 + eps)` on the reference channel of the pre-mixed images.
pub fn oracle_mask_from_premix(
    target_image: &MultichannelSpectrogram,
    interf_image: &MultichannelSpectrogram,
    reference: usize,
) -> Result<OracleMask> {
    check_shape(
        "premix spectrograms",
        (target_image.num_frames(), target_image.num_bins()),
        (interf_image.num_frames(), interf_image.num_bins()),
    )?;
    let d = target_image.num_channels().min(interf_image.num_channels());
    if reference >= d {
        return Err(Error::InvalidInput(format!("reference channel {reference} out of range for {d} channels")));
    }
    let s = target_image.channel_view(reference);
    let b = interf_image.channel_view(reference);
    let values = Zip::from(&s).and(&b).map_collect(|s, b| {
        let ps = s.norm_sqr();
        ps / (ps + b.norm_sqr() + MAGNITUDE_FLOOR)
    });
    Ok(MaskTensor::clipped(values))
}

/// `|Y_ref| / (|Y_target| + eps)` clipped to `[0, 1]`.
pub fn oracle_postfilter_mask(y_target: &Spectrogram, y_ref: &Spectrogram) -> Result<MaskTensor> {
    check_shape("postfilter mask", y_target.shape(), y_ref.shape())?;
    let values = Zip::from(y_target.data())
        .and(y_ref.data())
        .map_collect(|t, r| r.norm() / (t.norm() + MAGNITUDE_FLOOR));
    Ok(MaskTensor::clipped(values))
}

/// Scales each bin by the real mask, leaving the phase unchanged.
pub fn apply_mask(mask: &MaskTensor, y: &Spectrogram) -> Result<Spectrogram> {
    check_shape("mask application", y.shape(), mask.shape())?;
    let data = Zip::from(y.data()).and(mask.values()).map_collect(|c, m| c * *m);
    y.with_data(data)
}
