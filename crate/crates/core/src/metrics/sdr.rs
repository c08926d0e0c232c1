use super::check_rates;
use crate::dsp::AudioBuffer;
use crate::error::{Error, Result};

/// Results are clamped to `+-SDR_CAP_DB`.
pub const SDR_CAP_DB: f64 = 60.0;

/// Scale-invariant SDR in dB: the estimate is projected onto the reference
/// and the residual counts as distortion. Both signals are trimmed to the
/// shorter length.
pub fn sdr(estimate: &AudioBuffer, reference: &AudioBuffer) -> Result<f64> {
    check_rates(estimate, reference)?;
    let n = estimate.len().min(reference.len());
    let (est, r) = (&estimate.samples()[..n], &reference.samples()[..n]);
    let ref_energy: f64 = r.iter().map(|v| v * v).sum();
    if ref_energy == 0.0 {
        return Err(Error::InvalidInput("SDR reference is silent".into()));
    }
    let alpha = est.iter().zip(r).map(|(e, r)| e * r).sum::<f64>() / ref_energy;
    let (mut target, mut residual) = (0.0, 0.0);
    for (e, r) in est.iter().zip(r) {
        let s = alpha * r;
        target += s * s;
        residual += (e - s) * (e - s);
    }
    let value = if target == 0.0 {
        -SDR_CAP_DB
    } else if residual == 0.0 {
        SDR_CAP_DB
    } else {
        10.0 * (target / residual).log10()
    };
    Ok(value.clamp(-SDR_CAP_DB, SDR_CAP_DB))
}
