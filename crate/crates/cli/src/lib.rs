//! The `gmdalign` command-line tool.
//!
//! Subcommands: `train`, `align`, `eval`, `gmd` and `synth`. Log verbosity
//! comes from the `GMDALIGN_LOG` environment variable (`error`, `warn`,
//! `info`, `debug`, `trace`; default `warn`).

mod commands;
mod error;
mod runlog;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gmdalign_core::learners::Prior;
use gmdalign_core::pipeline::MatchStrategy;
use gmdalign_core::synth::Transform;
use gmdalign_core::weighting::WeightingScheme;

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "gmdalign", version, about = "Cross-lingual document alignment with Greedy Movers Distance")]
pub struct Cli {
    /// Worker threads for document scoring (0 = one per core). Results do
    /// not depend on this value.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a Mahalanobis metric from parallel sentence pairs.
    Train(TrainArgs),
    /// Score and match documents across two languages.
    Align(AlignArgs),
    /// Recall of a matched list against a gold alignment.
    Eval(EvalArgs),
    /// GMD between two documents with its flow trace.
    Gmd(GmdArgs),
    /// Write a synthetic bilingual corpus with a known gold alignment.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoArg {
    Itml,
    Sdml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PriorArg {
    Identity,
    Covariance,
}

impl From<PriorArg> for Prior {
    fn from(p: PriorArg) -> Self {
        match p {
            PriorArg::Identity => Prior::Identity,
            PriorArg::Covariance => Prior::Covariance,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub algo: AlgoArg,
    #[arg(long)]
    pub src_emb: PathBuf,
    #[arg(long)]
    pub tgt_emb: PathBuf,
    /// Parallel pairs TSV (source row, target row).
    #[arg(long)]
    pub pairs: PathBuf,
    /// Output metric file.
    #[arg(long)]
    pub out: PathBuf,
    /// Train on the first N pairs only.
    #[arg(long, value_parser = parse_pair_limit)]
    pub pair_limit: Option<usize>,
    /// Shuffle the pairs with this seed before taking the prefix.
    #[arg(long)]
    pub shuffle_seed: Option<u64>,
    /// Seed for negative sampling and projection order. Derived from the
    /// pairs file checksum when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dissimilar pairs per similar pair.
    #[arg(long, default_value_t = 1.0)]
    pub neg_ratio: f64,
    #[arg(long, value_enum, default_value = "identity")]
    pub prior: PriorArg,
    /// Sweep limit (ITML default 1000, SDML default 200).
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Convergence tolerance (ITML default 1e-3, SDML default 1e-4).
    #[arg(long)]
    pub tol: Option<f64>,
    /// ITML slack trade-off.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 5.0)]
    pub u_percentile: f64,
    #[arg(long, default_value_t = 95.0)]
    pub l_percentile: f64,
    /// SDML off-diagonal L1 weight.
    #[arg(long, default_value_t = 0.01)]
    pub sparsity: f64,
    /// SDML constraint-term weight.
    #[arg(long, default_value_t = 1e-3)]
    pub balance: f64,
}

/// `euclidean`, `cosine` or `learned:<path>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetricArg {
    Euclidean,
    Cosine,
    Learned(PathBuf),
}

fn parse_metric_arg(s: &str) -> Result<MetricArg, String> {
    match s {
        "euclidean" => Ok(MetricArg::Euclidean),
        "cosine" => Ok(MetricArg::Cosine),
        _ => match s.strip_prefix("learned:") {
            Some(p) if !p.is_empty() => Ok(MetricArg::Learned(PathBuf::from(p))),
            _ => Err(format!("unknown metric {s:?} (valid: euclidean, cosine, learned:<path>)")),
        },
    }
}

fn parse_pair_limit(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("pair limit must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_weighting(s: &str) -> Result<WeightingScheme, String> {
    s.parse()
}

fn parse_matching(s: &str) -> Result<MatchStrategy, String> {
    s.parse()
}

fn parse_transform(s: &str) -> Result<Transform, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct DocInputs {
    #[arg(long)]
    pub src_emb: PathBuf,
    #[arg(long)]
    pub src_manifest: PathBuf,
    #[arg(long)]
    pub tgt_emb: PathBuf,
    #[arg(long)]
    pub tgt_manifest: PathBuf,
    /// uniform, sl, idf or slidf.
    #[arg(long, value_parser = parse_weighting, default_value = "sl")]
    pub weighting: WeightingScheme,
    /// euclidean, cosine or learned:<path>.
    #[arg(long, value_parser = parse_metric_arg, default_value = "euclidean")]
    pub metric: MetricArg,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[command(flatten)]
    pub inputs: DocInputs,
    /// one-to-one or argmin-per-source.
    #[arg(long, value_parser = parse_matching, default_value = "one-to-one")]
    pub matching: MatchStrategy,
    /// Only compare documents published on the same date.
    #[arg(long)]
    pub date_filter: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also evaluate recall against this gold alignment.
    #[arg(long)]
    pub gold: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub matched: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
}

#[derive(Debug, Args)]
pub struct GmdArgs {
    #[command(flatten)]
    pub inputs: DocInputs,
    #[arg(long)]
    pub src_doc: String,
    #[arg(long)]
    pub tgt_doc: String,
    /// Also report the exact EMD (small documents only).
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Documents per side.
    #[arg(long, default_value_t = 200)]
    pub docs: usize,
    #[arg(long, default_value_t = 6.0)]
    pub sentences_per_doc: f64,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// rotation or affine.
    #[arg(long, value_parser = parse_transform, default_value = "rotation")]
    pub transform: Transform,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Parallel sentence pairs to generate.
    #[arg(long, default_value_t = 5000)]
    pub pairs: usize,
    /// Spread publication dates over this many days.
    #[arg(long, default_value_t = 1)]
    pub days: u32,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("GMDALIGN_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::Compute(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Align(a) => commands::align(a),
        Command::Eval(a) => commands::eval(a),
        Command::Gmd(a) => commands::gmd(a),
        Command::Synth(a) => commands::synth(a),
    })
}
