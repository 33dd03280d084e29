//! Argument surface. Options that participate in the flag > config file >
//! default chain are declared `Option` here and resolved in `commands`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "centrifuge",
    version,
    about = "Byte-stream classification with a conditioning sub-net",
    propagate_version = true
)]
pub struct Cli {
    /// Flat key=value config file; explicit flags override its entries.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Build, synthesize or inspect sample containers.
    Corpus {
        #[command(subcommand)]
        action: CorpusCmd,
    },
    /// Train one regime with stratified k-fold cross-validation.
    Train(TrainArgs),
    /// Evaluate a checkpoint against a labeled corpus.
    Eval(EvalArgs),
    /// Classify the windows of a raw byte fragment.
    Classify(ClassifyArgs),
    /// Export mean-pooled first-layer embeddings as CSV.
    Export(ExportArgs),
}

#[derive(Subcommand)]
pub enum CorpusCmd {
    /// Ingest object/raw files listed in a manifest.
    Build(BuildArgs),
    /// Generate a labeled toy-instruction-set corpus.
    Synth(SynthArgs),
    /// Print per-label counts and byte histograms.
    Stats(StatsArgs),
}

#[derive(Args)]
pub struct BuildArgs {
    /// Tab-separated manifest: path, format (elf|coff|raw), main label, sub labels.
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    /// Label schema file.
    #[arg(long, value_name = "FILE")]
    pub schema: PathBuf,
    /// Output corpus container.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Window length in bytes [default: 235].
    #[arg(long)]
    pub length: Option<usize>,
    /// Window stride in bytes [default: the window length].
    #[arg(long)]
    pub stride: Option<usize>,
    /// Per-main-label sample cap [default: 20000].
    #[arg(long)]
    pub cap: Option<usize>,
    /// Seed for capping and shuffling [default: CENTRIFUGE_SEED or 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Output corpus container.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Also write the generated label schema here.
    #[arg(long, value_name = "FILE")]
    pub schema_out: Option<PathBuf>,
    /// Toy instruction sets [default: 4].
    #[arg(long)]
    pub generators: Option<usize>,
    /// Operand styles per set [default: 3].
    #[arg(long)]
    pub styles: Option<usize>,
    /// Windows per (generator, style) label [default: 2000].
    #[arg(long)]
    pub samples_per_label: Option<usize>,
    /// Window length in bytes [default: 64].
    #[arg(long)]
    pub length: Option<usize>,
    /// Sub label layout: generator | style-and-generator [default: generator].
    #[arg(long)]
    pub sub_labels: Option<String>,
    /// Generation seed [default: CENTRIFUGE_SEED or 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct StatsArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    /// Schema for label names and digest verification.
    #[arg(long, value_name = "FILE")]
    pub schema: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub schema: PathBuf,
    /// Where per-fold checkpoints and report.txt land.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// baseline | utl | dtl | uft | dft | 2lf.
    #[arg(long)]
    pub regime: Option<String>,
    /// Sub-loss weight for 2lf [default: 1.0].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Total epochs, split evenly over phases [default: 50].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Explicit per-phase epochs, e.g. "25,25"; overrides --epochs.
    #[arg(long)]
    pub phase_epochs: Option<String>,
    /// Mini-batch size [default: 64].
    #[arg(long)]
    pub batch: Option<usize>,
    /// Cross-validation folds [default: 4].
    #[arg(long)]
    pub folds: Option<usize>,
    /// Seed [default: CENTRIFUGE_SEED or 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Initial learning rate (cosine-decayed per phase) [default: 0.025].
    #[arg(long)]
    pub lr: Option<f64>,
    /// L2 weight decay [default: 1e-4].
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Momentum [default: 0.9].
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Nesterov lookahead instead of classical momentum.
    #[arg(long)]
    pub nesterov: bool,
    /// Label smoothing factor [default: 0.1].
    #[arg(long)]
    pub smoothing: Option<f64>,
    /// Bytes per model position [default: 1].
    #[arg(long)]
    pub block_size: Option<usize>,
    /// Model width [default: 64].
    #[arg(long)]
    pub d_model: Option<usize>,
    /// Attention heads [default: 4].
    #[arg(long)]
    pub heads: Option<usize>,
    /// Attention blocks per net [default: 2].
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Feed-forward width [default: 128].
    #[arg(long)]
    pub ffn: Option<usize>,
    /// Learned positional embedding.
    #[arg(long)]
    pub positional: bool,
    /// Folds trained in parallel [default: 1].
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub schema: PathBuf,
    /// Also write the report here.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ClassifyArgs {
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    /// Raw byte fragment to classify window by window.
    #[arg(long, value_name = "FILE")]
    pub fragment: PathBuf,
    /// Window stride [default: the model window length].
    #[arg(long)]
    pub stride: Option<usize>,
    /// Schema for label names.
    #[arg(long, value_name = "FILE")]
    pub schema: Option<PathBuf>,
}

#[derive(Args)]
pub struct ExportArgs {
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}
