//! Scene simulation, on-disk scene directories, split assignment and the
//! compact training cache.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::record::{process_render, ExampleRecord, PipelineConfig};
use crate::dsp::wav::{read_wav, write_wav, WavEncoding};
use crate::dsp::MultichannelAudio;
use crate::error::{Error, Result};
use crate::postfilter::InputMode;
use crate::spatial::{normalize_rms, render_scene, sample_scene, ArrayGeometry, Scene, SceneConstraints, SceneRender, SpeechSource};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;
const CACHE_MAGIC: &[u8; 8] = b"MVPFREC1";
/// Source level before room filtering.
const SOURCE_RMS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitCounts {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

impl Default for SplitCounts {
    fn default() -> Self {
        Self { train: 200, valid: 50, test: 50 }
    }
}

impl SplitCounts {
    pub fn total(&self) -> usize {
        self.train + self.valid + self.test
    }

    pub fn validate(&self) -> Result<()> {
        if self.train == 0 || self.valid == 0 || self.test == 0 {
            return Err(Error::Config("every split needs at least one scene".into()));
        }
        Ok(())
    }

    /// Split of the scene at `index` when scenes are assigned in order.
    pub fn split_of(&self, index: usize) -> Option<Split> {
        if index < self.train {
            Some(Split::Train)
        } else if index < self.train + self.valid {
            Some(Split::Valid)
        } else if index < self.total() {
            Some(Split::Test)
        } else {
            None
        }
    }
}

/// Scene seed for position `index` of a dataset drawn from `master`. Distinct
/// indices always give distinct seeds.
pub fn scene_seed(master: u64, index: usize) -> u64 {
    let mut z = master.wrapping_add((index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub scene: SceneConstraints,
    /// Names from the built-in catalog or from `custom_arrays`.
    pub arrays: Vec<String>,
    pub custom_arrays: Vec<ArrayGeometry>,
    pub utterance_secs: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            scene: SceneConstraints::default(),
            arrays: ArrayGeometry::catalog().into_iter().map(|a| a.name).collect(),
            custom_arrays: Vec::new(),
            utterance_secs: 5.0,
        }
    }
}

impl SimulationConfig {
    pub fn catalog(&self) -> Result<Vec<ArrayGeometry>> {
        let known: Vec<ArrayGeometry> = self.custom_arrays.iter().cloned().chain(ArrayGeometry::catalog()).collect();
        self.arrays
            .iter()
            .map(|name| {
                known
                    .iter()
                    .find(|a| &a.name == name)
                    .cloned()
                    .ok_or_else(|| Error::Config(format!("unknown array geometry '{name}'")))
            })
            .collect()
    }

    pub fn utterance_len(&self) -> usize {
        (self.utterance_secs * self.scene.sample_rate as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        for a in &self.custom_arrays {
            a.validate()?;
        }
        if self.catalog()?.is_empty() {
            return Err(Error::Config("the array catalog is empty".into()));
        }
        if !(self.utterance_secs.is_finite() && self.utterance_secs > 0.0) {
            return Err(Error::Config("utterance_secs must be positive".into()));
        }
        Ok(())
    }
}

/// Samples and renders one scene; both utterances are drawn from `speech`.
pub fn simulate_scene(seed: u64, sim: &SimulationConfig, speech: &dyn SpeechSource) -> Result<(Scene, SceneRender)> {
    let scene = sample_scene(seed, &sim.catalog()?, &sim.scene)?;
    let (a, b) = scene.utterance_seeds();
    let (len, fs) = (sim.utterance_len(), scene.sample_rate);
    let target = normalize_rms(&speech.utterance(a, len, fs)?, SOURCE_RMS);
    let interf = normalize_rms(&speech.utterance(b, len, fs)?, SOURCE_RMS);
    let render = render_scene(&scene, &target, &interf)?;
    Ok((scene, render))
}

pub fn scene_dir_name(index: usize) -> String {
    format!("scene_{index:05}")
}

pub fn write_scene(dir: impl AsRef<Path>, scene: &Scene, render: &SceneRender) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_wav(dir.join("mixture.wav"), &render.mixture, WavEncoding::Float32)?;
    write_wav(dir.join("target_image.wav"), &render.target_image, WavEncoding::Float32)?;
    write_wav(dir.join("interf_image.wav"), &render.interf_image, WavEncoding::Float32)?;
    let meta = dir.join("scene.json");
    let text = serde_json::to_string_pretty(scene).map_err(|e| Error::format(&meta, e))?;
    std::fs::write(&meta, text + "\n").map_err(|e| Error::io(&meta, e))
}

pub fn read_scene(dir: impl AsRef<Path>) -> Result<(Scene, SceneRender)> {
    let dir = dir.as_ref();
    let meta = dir.join("scene.json");
    let text = std::fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
    let scene: Scene = serde_json::from_str(&text).map_err(|e| Error::format(&meta, e))?;
    let load = |name: &str| -> Result<MultichannelAudio> {
        let audio = read_wav(dir.join(name))?;
        if audio.num_channels() != scene.num_mics() {
            return Err(Error::shape("scene audio channels", scene.num_mics(), audio.num_channels()));
        }
        Ok(audio)
    };
    let render = SceneRender { mixture: load("mixture.wav")?, target_image: load("target_image.wav")?, interf_image: load("interf_image.wav")? };
    Ok((scene, render))
}

/// Scene directories below `root`, sorted by name.
pub fn list_scene_dirs(root: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let root = root.as_ref();
    let mut dirs = Vec::new();
    for entry in std::fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.join("scene.json").is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

pub fn process_scene_dir(dir: &Path, pipeline: &PipelineConfig) -> Result<ExampleRecord> {
    let (scene, render) = read_scene(dir)?;
    let id = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    process_render(id, Some(scene), &render, pipeline)
}

/// Training view of a record: beamformer output magnitudes and the oracle
/// mask in single precision.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactRecord {
    pub id: String,
    pub target_mag: Array2<f32>,
    pub interf_mag: Array2<f32>,
    pub mask: Array2<f32>,
}

impl CompactRecord {
    pub fn from_record(r: &ExampleRecord) -> Self {
        let f = |a: Array2<f64>| a.mapv(|v| v as f32);
        Self {
            id: r.id.clone(),
            target_mag: f(r.y_target.magnitude()),
            interf_mag: f(r.y_interf.magnitude()),
            mask: f(r.mask.values().clone()),
        }
    }

    pub fn frames(&self) -> usize {
        self.mask.nrows()
    }

    pub fn features(&self, mode: InputMode) -> Array2<f32> {
        let interf = (mode == InputMode::TargetPlusInterference).then(|| self.interf_mag.view());
        crate::postfilter::features_from_magnitudes(self.target_mag.view(), interf, mode)
            .expect("magnitudes of one record share a shape")
    }

    pub fn weight(&self, beta: f64) -> Array2<f32> {
        crate::postfilter::loss_weight(self.target_mag.view(), beta)
    }
}

fn put_u32(w: &mut impl Write, v: usize) -> std::io::Result<()> {
    let v = u32::try_from(v).map_err(|_| std::io::Error::other("value exceeds u32"))?;
    w.write_all(&v.to_le_bytes())
}

fn put_matrix(w: &mut impl Write, a: ArrayView2<'_, f32>) -> std::io::Result<()> {
    for v in a.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Little-endian cache: magic, record count, then per record the id,
/// frames, bins and three `f32` matrices (target, interference, mask).
pub fn save_records(path: impl AsRef<Path>, records: &[CompactRecord]) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(CACHE_MAGIC).map_err(io)?;
    put_u32(&mut w, records.len()).map_err(io)?;
    for r in records {
        put_u32(&mut w, r.id.len()).map_err(io)?;
        w.write_all(r.id.as_bytes()).map_err(io)?;
        put_u32(&mut w, r.mask.nrows()).map_err(io)?;
        put_u32(&mut w, r.mask.ncols()).map_err(io)?;
        for a in [&r.target_mag, &r.interf_mag, &r.mask] {
            put_matrix(&mut w, a.view()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<CompactRecord>> {
    let path = path.as_ref();
    let bad = |msg: &str| Error::format(path, msg);
    let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
    if &magic != CACHE_MAGIC {
        return Err(bad("not a record cache"));
    }
    let u32_at = |r: &mut BufReader<File>| -> Result<usize> {
        let mut b = [0u8; 4];
        r.read_exact(&mut b).map_err(|_| bad("truncated file"))?;
        Ok(u32::from_le_bytes(b) as usize)
    };
    let count = u32_at(&mut r)?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = u32_at(&mut r)?;
        let mut id = vec![0u8; len];
        r.read_exact(&mut id).map_err(|_| bad("truncated record id"))?;
        let id = String::from_utf8(id).map_err(|_| bad("record id is not UTF-8"))?;
        let (frames, bins) = (u32_at(&mut r)?, u32_at(&mut r)?);
        let mut matrix = || -> Result<Array2<f32>> {
            let mut bytes = vec![0u8; frames * bins * 4];
            r.read_exact(&mut bytes).map_err(|_| bad("truncated record data"))?;
            let v = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            Array2::from_shape_vec((frames, bins), v).map_err(|e| Error::format(path, e))
        };
        let (target_mag, interf_mag, mask) = (matrix()?, matrix()?, matrix()?);
        if !mask.iter().all(|m| (0.0..=1.0).contains(m)) || target_mag.iter().chain(&interf_mag).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(bad("record values out of range"));
        }
        out.push(CompactRecord { id, target_mag, interf_mag, mask });
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest).map_err(|e| Error::io(path, e))?;
    if !rest.is_empty() {
        return Err(bad("trailing data after the last record"));
    }
    Ok(out)
}

/// Split assignment and processing settings of a prepared dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub pipeline: PipelineConfig,
    /// Directory holding the scene folders listed below.
    pub scenes_dir: PathBuf,
    pub train: Vec<String>,
    pub valid: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetManifest {
    pub fn split(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn cache_path(dir: &Path, split: Split) -> PathBuf {
        dir.join(format!("{}.bin", split.name()))
    }

    pub fn scene_path(&self, id: &str) -> PathBuf {
        self.scenes_dir.join(id)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::format(&path, e))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| Error::format(&path, e))?;
        if m.format_version != MANIFEST_VERSION {
            return Err(Error::format(&path, format!("unsupported manifest version {}", m.format_version)));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = m.train.iter().chain(&m.valid).chain(&m.test).find(|id| !seen.insert(id.as_str())) {
            return Err(Error::format(&path, format!("scene {dup} appears in more than one split")));
        }
        Ok(m)
    }
}

/// Assigns the sorted scenes below `scenes_dir` to splits in order, caches
/// the training and validation records in `out_dir` and writes the manifest.
/// Test scenes are reprocessed from their WAV files at evaluation time.
pub fn prepare_dataset(scenes_dir: &Path, out_dir: &Path, counts: &SplitCounts, pipeline: &PipelineConfig) -> Result<DatasetManifest> {
    counts.validate()?;
    pipeline.validate()?;
    let dirs = list_scene_dirs(scenes_dir)?;
    if dirs.len() < counts.total() {
        return Err(Error::InvalidInput(format!(
            "{} holds {} scenes but the splits need {}",
            scenes_dir.display(),
            dirs.len(),
            counts.total()
        )));
    }
    let names: Vec<String> = dirs.iter().map(|d| d.file_name().expect("listed entry").to_string_lossy().into_owned()).collect();
    let manifest = DatasetManifest {
        format_version: MANIFEST_VERSION,
        pipeline: *pipeline,
        scenes_dir: std::path::absolute(scenes_dir).map_err(|e| Error::io(scenes_dir, e))?,
        train: names[..counts.train].to_vec(),
        valid: names[counts.train..counts.train + counts.valid].to_vec(),
        test: names[counts.train + counts.valid..counts.total()].to_vec(),
    };
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for split in [Split::Train, Split::Valid] {
        let records: Vec<CompactRecord> = manifest
            .split(split)
            .par_iter()
            .map(|id| process_scene_dir(&manifest.scene_path(id), pipeline).map(|r| CompactRecord::from_record(&r)))
            .collect::<Result<_>>()?;
        save_records(DatasetManifest::cache_path(out_dir, split), &records)?;
    }
    manifest.save(out_dir)?;
    Ok(manifest)
}

/// A dataset generated and processed without touching the disk.
#[derive(Debug, Clone)]
pub struct InMemoryDataset {
    pub train: Vec<CompactRecord>,
    pub valid: Vec<CompactRecord>,
    pub test: Vec<ExampleRecord>,
}

pub fn generate_dataset(
    seed: u64,
    counts: &SplitCounts,
    sim: &SimulationConfig,
    pipeline: &PipelineConfig,
    speech: &dyn SpeechSource,
) -> Result<InMemoryDataset> {
    counts.validate()?;
    sim.validate()?;
    let process = |i: usize| -> Result<ExampleRecord> {
        let (scene, render) = simulate_scene(scene_seed(seed, i), sim, speech)?;
        process_render(scene_dir_name(i), Some(scene), &render, pipeline)
    };
    let compact = |range: std::ops::Range<usize>| -> Result<Vec<CompactRecord>> {
        range.into_par_iter().map(|i| process(i).map(|r| CompactRecord::from_record(&r))).collect()
    };
    let (tr, va) = (counts.train, counts.train + counts.valid);
    Ok(InMemoryDataset {
        train: compact(0..tr)?,
        valid: compact(tr..va)?,
        test: (va..counts.total()).into_par_iter().map(process).collect::<Result<_>>()?,
    })
}
