use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

mod commands;
mod error;
mod predfile;

use error::CliError;

/// Language identification: train, predict, evaluate, combine models.
#[derive(Debug, Parser)]
#[command(name = "lidkit", version, about)]
struct Cli {
    /// Increase log verbosity on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model on a fastText-format corpus.
    Train(TrainArgs),
    /// Predict labels for each line of a text file.
    Predict(PredictArgs),
    /// Score predictions against gold labels.
    Eval(EvalArgs),
    /// Combine two prediction files by top-1 agreement or top-3 overlap.
    Ensemble(EnsembleArgs),
    /// Route predictions through group-specialist models.
    Cascade(CascadeArgs),
    /// Generate not-a-language examples from random code points.
    GenNoise(GenNoiseArgs),
    /// Remove test examples that also occur in training data.
    Dedup(DedupArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PredFormat {
    Tsv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportArg {
    Json,
    Tsv,
    #[value(alias = "md")]
    Markdown,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Top1,
    Top3,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DedupModeArg {
    Exact,
    Shingle,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PoolingArg {
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormArg {
    None,
    Nfc,
}

/// Inference-time settings that the model file does not store.
#[derive(Debug, Clone, Args)]
pub struct InferenceArgs {
    /// Worker threads.
    #[arg(long, env = "LIDKIT_THREADS", default_value_t = 1)]
    pub threads: usize,
    /// Pooling the model was trained with.
    #[arg(long, value_enum, default_value = "mean")]
    pub pooling: PoolingArg,
    /// Unicode normalization the model was trained with.
    #[arg(long, value_enum, default_value = "none")]
    pub normalization: NormArg,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training corpus in fastText format.
    #[arg(long)]
    pub data: PathBuf,
    /// Output model path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 2)]
    pub minn: u32,
    #[arg(long, default_value_t = 5)]
    pub maxn: u32,
    #[arg(long, default_value_t = 1 << 21)]
    pub bucket: u32,
    #[arg(long, default_value_t = 5)]
    pub min_count: u64,
    #[arg(long, default_value_t = 1)]
    pub word_ngrams: u32,
    /// Worker threads; only 1 is reproducible.
    #[arg(long, env = "LIDKIT_THREADS", default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Merge map TSV, or `v3` for the shipped macrolanguage merges.
    #[arg(long)]
    pub merge_map: Option<String>,
    #[arg(long, value_enum, default_value = "mean")]
    pub pooling: PoolingArg,
    #[arg(long, value_enum, default_value = "none")]
    pub normalization: NormArg,
    /// Fail on the first malformed line instead of skipping it.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// One text per line; `-` reads stdin.
    #[arg(long, default_value = "-")]
    pub input: PathBuf,
    /// Ranked labels per line.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Top-1 labels below this probability become `other`.
    #[arg(long, default_value_t = lidkit::decision::DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, value_enum, default_value = "tsv")]
    pub format: PredFormat,
    #[command(flatten)]
    pub inference: InferenceArgs,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["model", "pred_file"])))]
pub struct EvalArgs {
    /// Model to run on the gold texts.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Precomputed predictions, one `label<TAB>prob...` row per gold line.
    #[arg(long)]
    pub pred_file: Option<PathBuf>,
    /// Gold file: fastText lines or `label,label<TAB>text` rows.
    #[arg(long)]
    pub gold: PathBuf,
    /// Gold lines may carry several acceptable labels.
    #[arg(long)]
    pub multilabel: bool,
    /// Threshold; defaults to 0.5 with --model and 0 with --pred-file.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Merge map TSV, or `v3`.
    #[arg(long)]
    pub merge_map: Option<String>,
    /// Alignment map TSV for --pred-file labels, or `v3`.
    #[arg(long)]
    pub align: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    pub report: ReportArg,
    #[arg(long, default_value_t = 0.5)]
    pub trash_threshold: f64,
    /// Score gold labels outside the model's label space as `other`
    /// instead of failing.
    #[arg(long)]
    pub unknown_gold_as_other: bool,
    #[command(flatten)]
    pub inference: InferenceArgs,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[arg(long)]
    pub pred_a: PathBuf,
    #[arg(long)]
    pub pred_b: PathBuf,
    #[arg(long, value_enum, default_value = "top1")]
    pub mode: ModeArg,
    /// Alignment map for model A labels, or `v3`.
    #[arg(long)]
    pub align_a: Option<String>,
    /// Alignment map for model B labels, or `v3`.
    #[arg(long)]
    pub align_b: Option<String>,
    #[arg(long, default_value_t = lidkit::decision::DEFAULT_TAU)]
    pub tau_a: f64,
    #[arg(long, default_value_t = 0.0)]
    pub tau_b: f64,
    #[arg(long)]
    pub merge_map: Option<String>,
    /// Evaluate the ensemble against this gold file; the report goes to stdout.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long, requires = "gold")]
    pub multilabel: bool,
    #[arg(long, value_enum, default_value = "json")]
    pub report: ReportArg,
    #[arg(long, default_value_t = 0.5)]
    pub trash_threshold: f64,
    /// Write ensemble labels here (stdout when omitted and no --gold).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CascadeArgs {
    #[arg(long)]
    pub base: PathBuf,
    /// `group<TAB>member<TAB>model_path` rows.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "-")]
    pub input: PathBuf,
    #[arg(long, default_value_t = lidkit::decision::DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, env = "LIDKIT_THREADS", default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct GenNoiseArgs {
    /// Script ranges TSV, or comma-separated script names from the shipped
    /// table, or `all`.
    #[arg(long, default_value = "all")]
    pub scripts: String,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub len_min: usize,
    #[arg(long, default_value_t = 40)]
    pub len_max: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DedupArgs {
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long, value_enum, default_value = "exact")]
    pub mode: DedupModeArg,
    /// Surviving test examples.
    #[arg(long)]
    pub out_kept: PathBuf,
    /// Removed test examples.
    #[arg(long)]
    pub out_removed: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Eval(a) => commands::eval(a),
        Command::Ensemble(a) => commands::ensemble(a),
        Command::Cascade(a) => commands::cascade(a),
        Command::GenNoise(a) => commands::gen_noise(a),
        Command::Dedup(a) => commands::dedup(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lidkit: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
