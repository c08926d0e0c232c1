//! Mean SDR/STOI of the mixture, the beamformer output (N), the beamformer
//! output under the oracle mask, and the interference-free beamformer path.
//! The oracle row bounds what a mask postfilter can reach.
//!
//! `cargo run --release -p mvdrpf --example oracle_bound -- [scenes] [seed]`

use mvdrpf::beamformer::apply_mask;
use mvdrpf::config::ExperimentConfig;
use mvdrpf::dsp::istft;
use mvdrpf::metrics::{sdr, stoi};
use mvdrpf::spatial::SyntheticSpeech;
use mvdrpf::trainer::{process_render, scene_seed, simulate_scene};

fn main() -> mvdrpf::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let count: usize = args.get(1).map_or(20, |s| s.parse().expect("scene count"));
    let seed: u64 = args.get(2).map_or(0, |s| s.parse().expect("seed"));
    let cfg = ExperimentConfig::default();
    let labels = ["mixture", "N", "oracle mask", "interference-free"];
    let mut sums = [[0.0f64; 2]; 4];
    for i in 0..count {
        let (_, render) = simulate_scene(scene_seed(seed, i), &cfg.simulation, &SyntheticSpeech)?;
        let r = process_render(i.to_string(), None, &render, &cfg.pipeline)?;
        let signals = [
            render.mixture.channel(cfg.pipeline.reference_channel).clone(),
            istft(&r.y_target)?,
            istft(&apply_mask(&r.mask, &r.y_target)?)?,
            istft(&r.y_ref)?,
        ];
        for (acc, s) in sums.iter_mut().zip(&signals) {
            acc[0] += sdr(s, &r.reference)? / count as f64;
            acc[1] += stoi(s, &r.reference)? / count as f64;
        }
    }
    println!("{:<18} {:>9} {:>9}", "signal", "SDR [dB]", "STOI [%]");
    for (label, [s, t]) in labels.iter().zip(sums) {
        println!("{label:<18} {s:>9.2} {:>9.2}", 100.0 * t);
    }
    Ok(())
}
