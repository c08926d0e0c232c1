//! Dataset pipeline, optimization loop and the N/B/P evaluation protocol.

mod adam;
mod dataset;
mod evaluate;
mod experiment;
mod record;
mod report;
mod train;

pub use adam::{Adam, AdamConfig};
pub use dataset::{
    generate_dataset, list_scene_dirs, load_records, prepare_dataset, process_scene_dir, read_scene, save_records,
    scene_dir_name, scene_seed, simulate_scene, write_scene, CompactRecord, DatasetManifest, InMemoryDataset,
    SimulationConfig, Split, SplitCounts, MANIFEST_FILE, MANIFEST_VERSION,
};
pub use evaluate::{
    enhance_record, evaluate, evaluate_record, summarize, Condition, ConditionSummary, Enhanced, EvalModel,
    MetricsReport, UtteranceResult,
};
pub use experiment::{
    evaluate_models, model_name, run_experiment, train_grid, ExperimentOutcome, TrainedModel,
};
pub use record::{process_render, ExampleRecord, PipelineConfig, RecordDiagnostics};
pub use report::{curve_csv, read_curve, render_table, utterance_csv, write_curve};
pub use train::{dataset_loss, tensor_examples, train, EpochLoss, TensorExample, TrainConfig, TrainOutcome};
