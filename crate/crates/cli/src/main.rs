//! `loopcap`: data preparation, training runs, reports and the feedback
//! service from one binary.

mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "loopcap", version, about = "Continual caption adaptation harness")]
struct Cli {
    /// Repeat for more log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load COCO-caption annotation files into one corpus file.
    Ingest(IngestArgs),
    /// Drop or repair images whose captions carry the quality marker.
    Filter(FilterArgs),
    /// Per-split image counts and word types, per cluster when given.
    Stats(StatsArgs),
    /// Build keyword clusters and assign images to tasks.
    Cluster(ClusterArgs),
    /// Show the subword tokenization of a string.
    Tokenize(TokenizeArgs),
    /// Preview augmentation output.
    #[command(subcommand)]
    Augment(AugmentCommand),
    /// Score a results file against corpus references, per cluster.
    Evaluate(EvaluateArgs),
    /// Train the base learner on a whole corpus.
    Pretrain(PretrainArgs),
    /// Adapt to the clusters in order and record the retention grid.
    Adapt(AdaptArgs),
    /// Memory and data-fraction ablations.
    #[command(subcommand)]
    Ablate(AblateCommand),
    /// Print the tables and event summary stored in a run directory.
    Report(ReportArgs),
    /// Run the HTTP feedback service.
    Serve(ServeArgs),
    /// Self-contained demos on procedural data.
    #[command(subcommand)]
    Demo(DemoCommand),
}

#[derive(Args)]
struct IngestArgs {
    /// Annotation file; repeat together with --split.
    #[arg(long, required = true)]
    annotations: Vec<PathBuf>,
    /// Split tag for the matching --annotations (train, val, test).
    #[arg(long, required = true)]
    split: Vec<String>,
    /// Treat the val file as test and hold out part of train as val.
    #[arg(long)]
    remap: bool,
    #[arg(long, default_value_t = 0.2)]
    holdout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = loopcap_core::corpus::DEFAULT_QUALITY_MARKER)]
    marker: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    clusters: Option<PathBuf>,
    /// Emit JSON instead of an aligned table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 15)]
    min_freq: usize,
    /// Whitespace-separated word vectors, one word per line.
    #[arg(long)]
    embeddings: PathBuf,
    /// `word<TAB>TAG` lexicon; the bundled one when omitted.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TokenizeArgs {
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    text: String,
}

#[derive(Subcommand)]
enum AugmentCommand {
    /// Expand one image/caption pair and write the copies.
    Preview(PreviewArgs),
}

#[derive(Args)]
struct PreviewArgs {
    #[arg(long, default_value = "both")]
    mode: String,
    #[arg(long, default_value_t = 10)]
    factor: u32,
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    caption: String,
    #[arg(long)]
    thesaurus: Option<PathBuf>,
    #[arg(long)]
    paraphrase_url: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for the PNG copies; captions only when omitted.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Micro {
    Pooled,
    Weighted,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Results file: `[{"image_id": .., "caption": ..}]`.
    #[arg(long)]
    hyp: PathBuf,
    /// Corpus file holding the reference captions.
    #[arg(long)]
    refs: PathBuf,
    #[arg(long)]
    clusters: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long, value_enum, default_value_t = Micro::Pooled)]
    micro: Micro,
    /// Write the report as JSON here (and CSV next to it).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `key=value` override, dotted keys allowed; repeatable.
    #[arg(long = "set")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Image root (files directly inside or under <split>/).
    #[arg(long, conflicts_with = "synthetic_images", required_unless_present = "synthetic_images")]
    images: Option<PathBuf>,
    /// Render images from captions instead of reading files.
    #[arg(long)]
    synthetic_images: bool,
}

#[derive(Args)]
struct PretrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    run_dir: PathBuf,
}

#[derive(Args)]
struct SequenceArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Cluster file from `cluster`.
    #[arg(long)]
    tasks: PathBuf,
    /// Starting learner: a run directory or a learner snapshot file.
    #[arg(long)]
    init: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Args)]
struct AdaptArgs {
    #[command(flatten)]
    seq: SequenceArgs,
    #[arg(long)]
    run_dir: PathBuf,
    /// Augmentation mode: no, img, txt or both.
    #[arg(long)]
    da: Option<String>,
    #[arg(long, value_enum)]
    memory: Option<OnOff>,
}

#[derive(Subcommand)]
enum AblateCommand {
    /// Same sequence with and without episodic memory.
    Memory(AblateArgs),
    /// Training-fraction sweep over several seeds.
    Fraction(AblateArgs),
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    seq: SequenceArgs,
    #[arg(long)]
    run_dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    run_dir: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    run_dir: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    /// Queue length that triggers an update; 0 disables.
    #[arg(long, default_value_t = loopcap_service::DEFAULT_AUTO_FLUSH)]
    auto_flush: usize,
    #[command(flatten)]
    config: ConfigArgs,
    /// Corpus whose images feedback may reference by id.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, requires = "corpus")]
    images: Option<PathBuf>,
    #[arg(long, requires = "corpus")]
    synthetic_images: bool,
    /// Cluster file for the simulated task stream.
    #[arg(long, requires = "corpus")]
    clusters: Option<PathBuf>,
}

#[derive(Subcommand)]
enum DemoCommand {
    /// Two-task forgetting run with and without memory.
    Forgetting {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a procedural corpus and its cluster file.
    Synthetic {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 3)]
        clusters: usize,
        #[arg(long, default_value_t = 40)]
        train: usize,
        #[arg(long, default_value_t = 10)]
        val: usize,
        #[arg(long, default_value_t = 10)]
        test: usize,
        #[arg(long, default_value_t = 5)]
        captions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    let default = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default)))
        .with_writer(std::io::stderr)
        .init();
    match commands::run(cli.command) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
