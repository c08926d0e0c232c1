//! Mask-weighted spatial covariance estimation, the target and interference
//! MVDR filters, and the oracle masks used for SCMs and postfilter targets.

mod linalg;
mod mask;
mod mvdr;
mod scm;

pub use mask::{apply_mask, oracle_mask_from_premix, oracle_postfilter_mask, MaskTensor, OracleMask, MAGNITUDE_FLOOR};
pub use mvdr::{apply_weights, mvdr_weights, BeamRole, BeamformerDiagnostics, BeamformerWeights, LoadingConfig};
pub use scm::{scm_from_mask, ScmSet};

#[cfg(test)]
pub(crate) use linalg::{hermitian, trace};
