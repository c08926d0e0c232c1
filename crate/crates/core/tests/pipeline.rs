use std::collections::HashSet;

use mvdrpf::beamformer::{apply_mask, MaskTensor};
use mvdrpf::config::ExperimentConfig;
use mvdrpf::dsp::{istft, MultichannelAudio};
use mvdrpf::metrics::{sdr, MetricName};
use mvdrpf::postfilter::{CellType, InputMode, LossConfig, PostfilterConfig, PostfilterModel};
use mvdrpf::spatial::{SceneRender, SyntheticSpeech};
use mvdrpf::trainer::{
    enhance_record, evaluate, generate_dataset, list_scene_dirs, load_records, prepare_dataset, process_render,
    process_scene_dir, read_scene, run_experiment, save_records, scene_dir_name, scene_seed, simulate_scene,
    write_scene, Condition, CompactRecord, DatasetManifest, EvalModel, SimulationConfig, Split, SplitCounts,
};
use proptest::prelude::*;
use tempfile::TempDir;

fn short_sim() -> SimulationConfig {
    SimulationConfig { utterance_secs: 2.0, ..SimulationConfig::default() }
}

#[test]
fn beamformer_improves_on_the_mixture() {
    let cfg = ExperimentConfig::default();
    let sim = short_sim();
    let (mut mix, mut out) = (0.0, 0.0);
    let n = 24;
    for i in 0..n {
        let (_, render) = simulate_scene(scene_seed(11, i), &sim, &SyntheticSpeech).unwrap();
        let r = process_render(i.to_string(), None, &render, &cfg.pipeline).unwrap();
        mix += sdr(render.mixture.channel(0), &r.reference).unwrap();
        out += sdr(&istft(&r.y_target).unwrap(), &r.reference).unwrap();
    }
    assert!(out / n as f64 > mix / n as f64, "MVDR {} vs mixture {}", out / n as f64, mix / n as f64);
}

#[test]
fn interference_image_scores_low_against_target() {
    let sim = short_sim();
    for i in 0..5 {
        let (scene, render) = simulate_scene(scene_seed(3, i), &sim, &SyntheticSpeech).unwrap();
        let v = sdr(render.interf_image.channel(0), render.target_image.channel(0)).unwrap();
        assert!(v < 0.0, "scene {i} (gain {:.1} dB): {v}", scene.interf_gain_db);
    }
}

#[test]
fn oracle_mask_bounds_magnitude_by_reference() {
    let cfg = ExperimentConfig::default();
    let sim = short_sim();
    for i in 0..10 {
        let (_, render) = simulate_scene(scene_seed(21, i), &sim, &SyntheticSpeech).unwrap();
        let r = process_render("x", None, &render, &cfg.pipeline).unwrap();
        let masked = apply_mask(&r.mask, &r.y_target).unwrap().magnitude();
        let (yr, yt) = (r.y_ref.magnitude(), r.y_target.magnitude());
        // In exact arithmetic the gap is eps * M <= 1e-9; allow rounding of the magnitudes themselves.
        for ((m, a), b) in masked.iter().zip(&yr).zip(&yt) {
            assert!((m - a.min(*b)).abs() <= 1e-9 + 4.0 * f64::EPSILON * a.max(*b), "{m} {a} {b}");
        }
    }
}

#[test]
fn scene_directories_round_trip() {
    let dir = TempDir::new().unwrap();
    let (scene, render) = simulate_scene(5, &short_sim(), &SyntheticSpeech).unwrap();
    let path = dir.path().join(scene_dir_name(0));
    write_scene(&path, &scene, &render).unwrap();
    let (scene2, render2) = read_scene(&path).unwrap();
    assert_eq!(scene2, scene);
    // Float WAVs keep single precision.
    for (a, b) in [(&render.mixture, &render2.mixture), (&render.target_image, &render2.target_image)] {
        for (x, y) in a.channels().iter().zip(b.channels()) {
            for (u, v) in x.samples().iter().zip(y.samples()) {
                assert_eq!(*u as f32, *v as f32);
            }
        }
    }
    assert_eq!(list_scene_dirs(dir.path()).unwrap(), vec![path]);
}

#[test]
fn prepared_dataset_has_disjoint_splits_and_exact_counts() {
    let dir = TempDir::new().unwrap();
    let scenes = dir.path().join("scenes");
    let sim = short_sim();
    for i in 0..6 {
        let (scene, render) = simulate_scene(scene_seed(9, i), &sim, &SyntheticSpeech).unwrap();
        write_scene(scenes.join(scene_dir_name(i)), &scene, &render).unwrap();
    }
    let counts = SplitCounts { train: 3, valid: 1, test: 2 };
    let cfg = ExperimentConfig::default();
    let out = dir.path().join("data");
    let m = prepare_dataset(&scenes, &out, &counts, &cfg.pipeline).unwrap();
    assert_eq!((m.train.len(), m.valid.len(), m.test.len()), (3, 1, 2));
    let all: HashSet<_> = m.train.iter().chain(&m.valid).chain(&m.test).collect();
    assert_eq!(all.len(), 6);
    assert_eq!(DatasetManifest::load(&out).unwrap(), m);
    let train = load_records(DatasetManifest::cache_path(&out, Split::Train)).unwrap();
    assert_eq!(train.len(), 3);
    let direct = process_scene_dir(&m.scene_path(&m.train[1]), &cfg.pipeline).unwrap();
    assert_eq!(train[1], CompactRecord::from_record(&direct));

    let too_many = SplitCounts { train: 5, valid: 1, test: 2 };
    assert!(prepare_dataset(&scenes, &dir.path().join("x"), &too_many, &cfg.pipeline).is_err());
}

#[test]
fn record_cache_round_trips_and_rejects_garbage() {
    let dir = TempDir::new().unwrap();
    let cfg = ExperimentConfig::default();
    let counts = SplitCounts { train: 2, valid: 1, test: 1 };
    let d = generate_dataset(4, &counts, &short_sim(), &cfg.pipeline, &SyntheticSpeech).unwrap();
    let path = dir.path().join("r.bin");
    save_records(&path, &d.train).unwrap();
    assert_eq!(load_records(&path).unwrap(), d.train);
    let mut bytes = std::fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 3);
    std::fs::write(&path, &bytes).unwrap();
    assert!(load_records(&path).is_err());
    std::fs::write(&path, b"nonsense").unwrap();
    assert!(load_records(&path).is_err());
}

#[test]
fn generation_is_deterministic_with_requested_counts() {
    let cfg = ExperimentConfig::default();
    let counts = SplitCounts { train: 2, valid: 1, test: 2 };
    let a = generate_dataset(8, &counts, &short_sim(), &cfg.pipeline, &SyntheticSpeech).unwrap();
    let b = generate_dataset(8, &counts, &short_sim(), &cfg.pipeline, &SyntheticSpeech).unwrap();
    assert_eq!((a.train.len(), a.valid.len(), a.test.len()), (2, 1, 2));
    assert_eq!(a.train, b.train);
    assert_eq!(a.valid, b.valid);
    for (x, y) in a.test.iter().zip(&b.test) {
        assert_eq!(x.y_target.data(), y.y_target.data());
        assert_eq!(x.mask, y.mask);
    }
}

#[test]
fn silent_interference_gives_unit_mask() {
    let cfg = ExperimentConfig::default();
    let (_, render) = simulate_scene(2, &short_sim(), &SyntheticSpeech).unwrap();
    let silent = MultichannelAudio::zeros(render.mixture.num_channels(), render.mixture.len(), 16_000);
    let r = SceneRender { mixture: render.target_image.clone(), target_image: render.target_image, interf_image: silent };
    let rec = process_render("s", None, &r, &cfg.pipeline).unwrap();
    assert_eq!(rec.y_target.data(), rec.y_ref.data());
    let ratio = rec.y_target.magnitude().mapv(|m| m / (m + 1e-9));
    assert_eq!(rec.mask.values(), &ratio);
}

#[test]
fn evaluation_is_repeatable_and_unit_model_matches_mvdr() {
    let cfg = ExperimentConfig::default();
    let counts = SplitCounts { train: 1, valid: 1, test: 2 };
    let d = generate_dataset(1, &counts, &short_sim(), &cfg.pipeline, &SyntheticSpeech).unwrap();
    let model = PostfilterModel::new(PostfilterConfig::new(CellType::Gru, 1, 8, InputMode::TargetPlusInterference), 0).unwrap();
    let models = [EvalModel { architecture: "gru-1-8", model: &model }];
    let metrics = MetricName::ALL.to_vec();
    let run = || evaluate(&models, d.test.iter().cloned().map(Ok), &metrics, &LossConfig::default()).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.rows.len(), 2);
    assert!(a.row("gru-1-8", Condition::P).is_some() && a.row("anything", Condition::N).is_some());

    let plain = enhance_record(&d.test[0], None).unwrap();
    assert_eq!(plain.output, plain.mvdr);
    assert_eq!(plain.mask, MaskTensor::filled(d.test[0].y_target.shape(), 1.0).unwrap());
}

#[test]
fn tiny_experiment_runs_end_to_end() {
    let mut cfg = ExperimentConfig { simulation: short_sim(), ..ExperimentConfig::default() };
    cfg.models.hidden = vec![8];
    cfg.train.epochs = 2;
    cfg.train.splits = SplitCounts { train: 2, valid: 1, test: 1 };
    let mut epochs = 0;
    let out = run_experiment(&cfg, &SyntheticSpeech, |_, _| epochs += 1).unwrap();
    assert_eq!(epochs, 4);
    assert_eq!(out.models.len(), 2);
    assert_eq!(out.report.utterances.len(), 3);
    assert!(out.models.iter().all(|m| !m.config.input_norm.is_identity()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn scene_seeds_are_distinct(master in any::<u64>(), i in 0usize..100_000, j in 0usize..100_000) {
        prop_assume!(i != j);
        prop_assert_ne!(scene_seed(master, i), scene_seed(master, j));
    }

    #[test]
    fn split_assignment_is_a_partition(train in 1usize..50, valid in 1usize..50, test in 1usize..50) {
        let c = SplitCounts { train, valid, test };
        let mut counts = [0usize; 3];
        for i in 0..c.total() {
            counts[Split::ALL.iter().position(|s| Some(*s) == c.split_of(i)).unwrap()] += 1;
        }
        prop_assert_eq!(counts, [train, valid, test]);
        prop_assert_eq!(c.split_of(c.total()), None);
    }
}
