//! Speech enhancement for two-talker scenes: oracle-SCM MVDR beamforming that
//! estimates both the target and the interference, followed by a small
//! recurrent network that predicts a time-frequency postfilter mask from
//! either the target estimate alone or from both estimates.

pub mod beamformer;
pub mod config;
pub mod dsp;
pub mod error;
pub mod metrics;
pub mod postfilter;
pub mod spatial;
pub mod trainer;

pub use error::{Error, ErrorKind, Result};
