//! Runs the default desk-scale experiment for one seed and prints the table.
//!
//! `cargo run --release -p mvdrpf --example trial -- [seed] [epochs]`

use std::time::Instant;

use mvdrpf::config::ExperimentConfig;
use mvdrpf::spatial::SyntheticSpeech;
use mvdrpf::trainer::{model_name, render_table, run_experiment};

fn main() -> mvdrpf::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let mut cfg = ExperimentConfig::default();
    if let Some(s) = args.get(1) {
        cfg.seed = s.parse().expect("seed");
        cfg.train.seed = cfg.seed;
    }
    if let Some(e) = args.get(2) {
        cfg.train.epochs = e.parse().expect("epochs");
    }
    let start = Instant::now();
    let out = run_experiment(&cfg, &SyntheticSpeech, |c, e| {
        eprintln!(
            "{:>7.1}s {} epoch {:>3} train {:.6e} valid {:.6e}",
            start.elapsed().as_secs_f64(),
            model_name(c),
            e.epoch,
            e.train,
            e.valid
        );
    })?;
    for m in &out.models {
        let last = m.outcome.curve.last().map_or(f64::NAN, |e| e.valid);
        println!("{}: best epoch {:?}, final validation loss {last:.6e}", m.name(), m.outcome.best_epoch);
    }
    print!("{}", render_table(&[out.report]));
    Ok(())
}
