//! `mvdrpf` command-line driver.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mvdrpf::config::ExperimentConfig;
use mvdrpf::metrics::MetricName;
use mvdrpf::{Error, ErrorKind};

#[derive(Debug, Parser)]
#[command(name = "mvdrpf", version, about = "Dual MVDR beamforming with a recurrent mask postfilter")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Experiment configuration (TOML); built-in defaults when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Overrides the scene and training seeds of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; all cores by default.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Progress messages on stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render scenes to a dataset directory.
    Simulate {
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        /// Directory of mono WAV speech files.
        #[arg(long, conflicts_with = "synthetic")]
        corpus: Option<PathBuf>,
        /// Use the built-in synthetic talker instead of a corpus.
        #[arg(long)]
        synthetic: bool,
    },
    /// Beamform every scene, assign splits and cache training data.
    Prepare {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train every model of the configured grid.
    Train {
        /// Prepared dataset directory.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score the N/B/P conditions on the test split.
    Evaluate {
        /// Directory of trained model folders.
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// JSON report; a text table and a per-utterance CSV are written next to it.
        #[arg(long)]
        report: PathBuf,
    },
    /// Run the full chain on one scene.
    Enhance(EnhanceArgs),
    /// Score an estimate against a reference, or every scene of a directory.
    Metric(MetricArgs),
    /// Render result tables from evaluation reports.
    Report {
        /// JSON reports written by `evaluate`.
        results: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the log-magnitude spectrogram of one WAV channel.
    ExportSpectrogram {
        #[arg(long)]
        wav: PathBuf,
        #[arg(long, default_value_t = 0)]
        channel: usize,
        /// Output path without extension.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Both)]
        format: Format,
    },
}

#[derive(Debug, Args)]
struct EnhanceArgs {
    /// Trained model; may be omitted together with `--unit-mask`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Scene directory as written by `simulate`.
    #[arg(long, conflicts_with_all = ["mixture", "target_image", "interf_image"])]
    scene: Option<PathBuf>,
    /// Multichannel mixture WAV.
    #[arg(long)]
    mixture: Option<PathBuf>,
    /// Target image at every microphone, for the oracle SCMs.
    #[arg(long, requires = "mixture")]
    target_image: Option<PathBuf>,
    /// Interference image at every microphone, for the oracle SCMs.
    #[arg(long, requires = "mixture")]
    interf_image: Option<PathBuf>,
    /// Postfiltered output.
    #[arg(long)]
    out: PathBuf,
    /// Also write the plain beamformer output here.
    #[arg(long)]
    mvdr_out: Option<PathBuf>,
    /// Replace the estimated mask by ones.
    #[arg(long)]
    unit_mask: bool,
}

#[derive(Debug, Args)]
struct MetricArgs {
    /// `sdr`, `stoi` or both.
    #[arg(long, value_parser = parse_metric, required = true, num_args = 1..)]
    name: Vec<MetricName>,
    /// Estimate WAV.
    #[arg(long, requires = "reference", conflicts_with = "batch")]
    est: Option<PathBuf>,
    /// Reference WAV.
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// Directory of scene folders; scores `--est-file` against `--ref-file` in each.
    #[arg(long, required_unless_present = "est")]
    batch: Option<PathBuf>,
    #[arg(long, default_value = "mixture.wav")]
    est_file: String,
    #[arg(long, default_value = "target_image.wav")]
    ref_file: String,
    /// Channel of multichannel inputs.
    #[arg(long, default_value_t = 0)]
    channel: usize,
    /// CSV destination of batch mode; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Pgm,
    Both,
}

fn parse_metric(s: &str) -> Result<MetricName, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

pub(crate) struct Context {
    pub config: ExperimentConfig,
    pub verbose: bool,
}

impl Context {
    pub fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn context(global: &Global) -> mvdrpf::Result<Context> {
    let mut config = match &global.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = global.seed {
        config.seed = seed;
        config.train.seed = seed;
    }
    if let Some(jobs) = global.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(Context { config, verbose: global.verbose })
}

fn run(cli: Cli) -> mvdrpf::Result<()> {
    let ctx = context(&cli.global)?;
    match cli.command {
        Command::Simulate { count, out, corpus, synthetic } => commands::simulate(&ctx, count, &out, corpus, synthetic),
        Command::Prepare { scenes, out } => commands::prepare(&ctx, &scenes, &out),
        Command::Train { data, out } => commands::train(&ctx, &data, &out),
        Command::Evaluate { models, data, report } => commands::evaluate(&ctx, &models, &data, &report),
        Command::Enhance(args) => commands::enhance(&ctx, args),
        Command::Metric(args) => commands::metric(&ctx, args),
        Command::Report { results, out } => commands::report(&results, out.as_deref()),
        Command::ExportSpectrogram { wav, channel, out, format } => {
            let format = match format {
                Format::Csv => mvdrpf::metrics::ExportFormat::Csv,
                Format::Pgm => mvdrpf::metrics::ExportFormat::Pgm,
                Format::Both => mvdrpf::metrics::ExportFormat::Both,
            };
            commands::export_spectrogram(&ctx, &wav, channel, &out, format)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numeric => 3,
            })
        }
    }
}
