//! JSON checkpoint: format version, configuration and named tensors.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{ArrayViewMutD, IxDyn};
use serde::{Deserialize, Serialize};

use super::config::PostfilterConfig;
use super::network::Postfilter;
use super::params::Params;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: PostfilterConfig,
    /// Epoch at which these parameters were taken, when produced by training.
    #[serde(default)]
    pub epoch: Option<usize>,
    pub tensors: BTreeMap<String, TensorRecord>,
}

impl Checkpoint {
    pub fn from_model(model: &Postfilter<f32>, epoch: Option<usize>) -> Self {
        let p = model.params();
        let tensors = p
            .names()
            .into_iter()
            .zip(p.tensors())
            .map(|(name, t)| (name, TensorRecord { shape: t.shape().to_vec(), data: t.iter().copied().collect() }))
            .collect();
        Self { format_version: CHECKPOINT_VERSION, config: model.config().clone(), epoch, tensors }
    }

    pub fn into_model(self) -> Result<Postfilter<f32>> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(Error::InvalidInput(format!(
                "checkpoint format version {} (expected {CHECKPOINT_VERSION})",
                self.format_version
            )));
        }
        self.config.validate()?;
        let mut params = Params::<f32>::zeros(&self.config);
        let names = params.names();
        if self.tensors.len() != names.len() {
            return Err(Error::shape("checkpoint tensors", names.len().to_string(), self.tensors.len().to_string()));
        }
        for (name, mut dst) in names.iter().zip(params.tensors_mut()) {
            let rec = self.tensors.get(name).ok_or_else(|| Error::InvalidInput(format!("checkpoint lacks tensor {name}")))?;
            fill(name, &rec.shape, &rec.data, &mut dst)?;
        }
        Postfilter::from_params(self.config, params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).map_err(|e| Error::format(path, e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

fn fill(name: &str, shape: &[usize], data: &[f32], dst: &mut ArrayViewMutD<'_, f32>) -> Result<()> {
    if shape != dst.shape() || data.len() != dst.len() {
        return Err(Error::shape("checkpoint tensor", format!("{name} {:?}", dst.shape()), format!("{shape:?} with {} values", data.len())));
    }
    let src = ndarray::ArrayView::from_shape(IxDyn(shape), data).map_err(|e| Error::InvalidInput(e.to_string()))?;
    dst.assign(&src);
    Ok(())
}

pub fn save_model(model: &Postfilter<f32>, path: impl AsRef<Path>) -> Result<()> {
    Checkpoint::from_model(model, None).save(path)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Postfilter<f32>> {
    Checkpoint::load(path)?.into_model()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::postfilter::{CellType, InputMode};

    fn model() -> Postfilter<f32> {
        let c = PostfilterConfig::new(CellType::Lstm, 2, 6, InputMode::TargetPlusInterference).with_feature_bins(5);
        Postfilter::new(c, 11).unwrap()
    }

    #[test]
    fn save_load_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = model();
        save_model(&m, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), m);
    }

    #[test]
    fn shape_and_version_checked() {
        let mut ck = Checkpoint::from_model(&model(), Some(3));
        ck.tensors.get_mut("fc.bias").unwrap().shape = vec![4];
        assert!(ck.clone().into_model().is_err());
        let mut ck = Checkpoint::from_model(&model(), None);
        ck.format_version = 99;
        assert!(ck.into_model().is_err());
        let mut ck = Checkpoint::from_model(&model(), None);
        ck.tensors.remove("rnn.weight_hh_l1");
        assert!(ck.into_model().is_err());
        let mut ck = Checkpoint::from_model(&model(), None);
        ck.config.hidden = 7;
        assert!(ck.into_model().is_err());
    }

    #[test]
    fn garbage_file_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "{not json").unwrap();
        assert!(matches!(load_model(&path), Err(Error::Format { .. })));
    }
}
