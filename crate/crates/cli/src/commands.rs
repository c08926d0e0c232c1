use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mvdrpf::dsp::wav::{read_wav, write_mono, WavEncoding};
use mvdrpf::dsp::{stft, AudioBuffer, MultichannelAudio};
use mvdrpf::metrics::{spectrogram_export, ExportFormat, MetricName};
use mvdrpf::postfilter::{Checkpoint, PostfilterModel};
use mvdrpf::spatial::{SceneRender, SpeechSource, SyntheticSpeech, WavCorpus};
use mvdrpf::trainer::{
    enhance_record, evaluate as evaluate_models, list_scene_dirs, load_records, model_name, prepare_dataset,
    process_render, process_scene_dir, read_scene, render_table, scene_dir_name, scene_seed, simulate_scene,
    tensor_examples, train as train_model, utterance_csv, write_curve, write_scene, Condition, DatasetManifest,
    EvalModel, MetricsReport, Split,
};
use mvdrpf::{Error, Result};
use rayon::prelude::*;

use crate::{EnhanceArgs, MetricArgs};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const CURVE_FILE: &str = "loss.csv";

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn simulate(ctx: &crate::Context, count: usize, out: &Path, corpus: Option<PathBuf>, synthetic: bool) -> Result<()> {
    let cfg = &ctx.config;
    cfg.simulation.validate()?;
    let speech: Box<dyn SpeechSource> = match corpus.or_else(|| if synthetic { None } else { cfg.paths.corpus.clone() }) {
        Some(dir) => Box::new(WavCorpus::open(&dir)?),
        None if synthetic => Box::new(SyntheticSpeech),
        None => {
            return Err(Error::Config(
                "no speech material: pass --corpus DIR (a directory of mono WAV files) or --synthetic".into(),
            ))
        }
    };
    create_dir(out)?;
    (0..count).into_par_iter().try_for_each(|i| -> Result<()> {
        let (scene, render) = simulate_scene(scene_seed(cfg.seed, i), &cfg.simulation, speech.as_ref())?;
        write_scene(out.join(scene_dir_name(i)), &scene, &render)?;
        ctx.log(format!("scene {i}: {} mics, interference {:.1} dB", scene.num_mics(), scene.interf_gain_db));
        Ok(())
    })?;
    println!("wrote {count} scenes to {} (seed {})", out.display(), cfg.seed);
    Ok(())
}

pub fn prepare(ctx: &crate::Context, scenes: &Path, out: &Path) -> Result<()> {
    let cfg = &ctx.config;
    let m = prepare_dataset(scenes, out, &cfg.train.splits, &cfg.pipeline)?;
    println!("prepared {} / {} / {} train/valid/test scenes in {}", m.train.len(), m.valid.len(), m.test.len(), out.display());
    Ok(())
}

pub fn train(ctx: &crate::Context, data: &Path, out: &Path) -> Result<()> {
    let cfg = &ctx.config;
    cfg.validate()?;
    let manifest = DatasetManifest::load(data)?;
    let train_set = load_records(DatasetManifest::cache_path(data, Split::Train))?;
    let valid_set = load_records(DatasetManifest::cache_path(data, Split::Valid))?;
    create_dir(out)?;
    write_text(&out.join("config.toml"), &cfg.to_toml())?;
    let beta = cfg.train.loss.beta;
    for config in cfg.models.configs(manifest.pipeline.stft.num_bins()) {
        let name = model_name(&config);
        let tr = tensor_examples(&train_set, config.input_mode, beta);
        let va = tensor_examples(&valid_set, config.input_mode, beta);
        let outcome = train_model(&config, &tr, &va, &cfg.train, |e| {
            ctx.log(format!("{name} epoch {} train {:.6e} valid {:.6e}", e.epoch, e.train, e.valid))
        })?;
        let dir = out.join(&name);
        create_dir(&dir)?;
        Checkpoint::from_model(&outcome.model, outcome.best_epoch).save(dir.join(CHECKPOINT_FILE))?;
        write_curve(dir.join(CURVE_FILE), &outcome.curve)?;
        if let Some(reason) = outcome.aborted {
            return Err(Error::Numeric(format!("training {name} stopped at {reason}; last good parameters saved")));
        }
        let last = outcome.curve.last().map(|e| e.valid).unwrap_or(f64::NAN);
        println!("{name}: {} parameters, best epoch {:?}, final validation loss {last:.6e}", config.parameter_count(), outcome.best_epoch);
    }
    Ok(())
}

/// Model folders below `dir` that hold a checkpoint, in sorted order.
fn load_models(dir: &Path) -> Result<Vec<PostfilterModel>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path().join(CHECKPOINT_FILE);
        if p.is_file() {
            paths.push(p);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidInput(format!("no {CHECKPOINT_FILE} below {}", dir.display())));
    }
    paths.iter().map(|p| Checkpoint::load(p)?.into_model()).collect()
}

pub fn evaluate(ctx: &crate::Context, models_dir: &Path, data: &Path, report_path: &Path) -> Result<()> {
    let cfg = &ctx.config;
    let models = load_models(models_dir)?;
    let labels: Vec<String> = models.iter().map(|m| m.config().label()).collect();
    let eval: Vec<EvalModel<'_>> = models.iter().zip(&labels).map(|(m, l)| EvalModel { architecture: l, model: m }).collect();
    let manifest = DatasetManifest::load(data)?;
    let records = manifest.test.iter().map(|id| {
        ctx.log(format!("evaluating {id}"));
        process_scene_dir(&manifest.scene_path(id), &manifest.pipeline)
    });
    let report = evaluate_models(&eval, records, &cfg.metrics, &cfg.train.loss)?;
    if let Some(parent) = report_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    report.save(report_path)?;
    let table = render_table(std::slice::from_ref(&report));
    write_text(&report_path.with_extension("txt"), &table)?;
    write_text(&report_path.with_extension("csv"), &utterance_csv(&report))?;
    print!("{table}");
    Ok(())
}

pub fn enhance(ctx: &crate::Context, args: EnhanceArgs) -> Result<()> {
    let cfg = &ctx.config;
    let (scene, render) = match (&args.scene, &args.mixture) {
        (Some(dir), _) => {
            let (scene, render) = read_scene(dir)?;
            (Some(scene), render)
        }
        (None, Some(mix)) => {
            let (Some(t), Some(i)) = (&args.target_image, &args.interf_image) else {
                return Err(Error::Unimplemented("enhancement without premix images (SCMs from an estimated mask)"));
            };
            (None, SceneRender { mixture: read_wav(mix)?, target_image: read_wav(t)?, interf_image: read_wav(i)? })
        }
        (None, None) => return Err(Error::Config("pass --scene DIR or --mixture FILE with its premix images".into())),
    };
    let model = match (&args.checkpoint, args.unit_mask) {
        (_, true) => None,
        (Some(path), false) => Some(Checkpoint::load(path)?.into_model()?),
        (None, false) => return Err(Error::Config("--checkpoint is required unless --unit-mask is given".into())),
    };
    let id = args.scene.as_ref().and_then(|d| d.file_name()).map_or("input".into(), |n| n.to_string_lossy().into_owned());
    let record = process_render(id, scene, &render, &cfg.pipeline)?;
    let out = enhance_record(&record, model.as_ref())?;
    write_mono(&args.out, &out.output, WavEncoding::Float32)?;
    if let Some(p) = &args.mvdr_out {
        write_mono(p, &out.mvdr, WavEncoding::Float32)?;
    }
    let cond = match &model {
        Some(m) => Condition::for_mode(m.config().input_mode),
        None => Condition::N,
    };
    for metric in &cfg.metrics {
        let n = metric.compute(&out.mvdr, &record.reference)?.value;
        let y = metric.compute(&out.output, &record.reference)?.value;
        println!("{metric} N {n}");
        if cond != Condition::N {
            println!("{metric} {} {y}", cond.label());
        }
    }
    Ok(())
}

fn channel_of(path: &Path, channel: usize) -> Result<AudioBuffer> {
    let audio: MultichannelAudio = read_wav(path)?;
    if channel >= audio.num_channels() {
        return Err(Error::InvalidInput(format!("{} has {} channels; channel {channel} requested", path.display(), audio.num_channels())));
    }
    Ok(audio.channel(channel).clone())
}

fn scores(names: &[MetricName], est: &AudioBuffer, reference: &AudioBuffer) -> Result<Vec<f64>> {
    names.iter().map(|m| Ok(m.compute(est, reference)?.value)).collect()
}

pub fn metric(_ctx: &crate::Context, args: MetricArgs) -> Result<()> {
    let names = &args.name;
    if let (Some(est), Some(reference)) = (&args.est, &args.reference) {
        let values = scores(names, &channel_of(est, args.channel)?, &channel_of(reference, args.channel)?)?;
        for (m, v) in names.iter().zip(values) {
            println!("{m} {v} {}", m.units());
        }
        return Ok(());
    }
    let root = args.batch.as_ref().ok_or_else(|| Error::Config("pass --est and --ref, or --batch DIR".into()))?;
    let dirs = list_scene_dirs(root)?;
    let rows = dirs
        .par_iter()
        .map(|d| {
            let est = channel_of(&d.join(&args.est_file), args.channel)?;
            let reference = channel_of(&d.join(&args.ref_file), args.channel)?;
            scores(names, &est, &reference)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("id");
    for m in names {
        write!(csv, ",{m}").expect("string write");
    }
    csv.push('\n');
    for (d, row) in dirs.iter().zip(rows) {
        csv.push_str(&d.file_name().expect("listed entry").to_string_lossy());
        for v in row {
            write!(csv, ",{v}").expect("string write");
        }
        csv.push('\n');
    }
    match &args.out {
        Some(p) => write_text(p, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

pub fn report(results: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let reports = results.iter().map(MetricsReport::load).collect::<Result<Vec<_>>>()?;
    let table = render_table(&reports);
    match out {
        Some(p) => write_text(p, &table),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}

pub fn export_spectrogram(ctx: &crate::Context, wav: &Path, channel: usize, out: &Path, format: ExportFormat) -> Result<()> {
    let spec = stft(&channel_of(wav, channel)?, &ctx.config.pipeline.stft)?;
    for p in spectrogram_export(&spec, out, format)? {
        println!("{}", p.display());
    }
    Ok(())
}
