//! `ngcf`: vocabulary, counting, clustering, model building, evaluation and
//! back-off comparison from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ngcf", version, about = "Class-based n-gram models from exchange clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a vocabulary file from one or more corpus shards.
    Vocab(VocabArgs),
    /// Count n-grams of a corpus against a vocabulary.
    Count(CountArgs),
    /// Exchange-cluster contexts and words of a count file.
    Cluster(ClusterArgs),
    /// Build a model file from counts (and clusterings).
    Build(BuildArgs),
    /// Perplexity of a model on a test corpus.
    Eval(EvalArgs),
    /// Back-off versus clustered perplexity on nested training prefixes.
    Compare(CompareArgs),
    /// Write seeded synthetic text.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct VocabArgs {
    /// Corpus shards, whitespace-tokenized UTF-8.
    #[arg(required = true)]
    corpus: Vec<PathBuf>,
    #[arg(short, long)]
    out: PathBuf,
    /// Drop words seen fewer times than this.
    #[arg(long, default_value_t = 1)]
    min_count: u64,
    /// Keep at most this many words, unknown token included.
    #[arg(long)]
    max_size: Option<usize>,
}

#[derive(Debug, Args)]
struct CountArgs {
    /// Corpus shards; n-grams never span two shards.
    #[arg(required = true)]
    corpus: Vec<PathBuf>,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    order: usize,
}

#[derive(Debug, Args, Clone)]
struct ExchangeArgs {
    #[arg(long, default_value_t = 100)]
    c1: usize,
    #[arg(long, default_value_t = 100)]
    c2: usize,
    /// Elements rarer than this stay in the residual cluster.
    #[arg(long, default_value_t = 5)]
    min_count: u64,
    #[arg(long, default_value_t = 20)]
    iterations: usize,
    /// Discount inside the leaving-one-out criterion.
    #[arg(long, default_value_t = 0.75)]
    b: f64,
    /// At most this many contexts are clustered; the rest share the residual.
    #[arg(long, default_value_t = 500_000)]
    max_rows: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Try only preselected target clusters.
    #[arg(long)]
    heuristic: bool,
    #[arg(long, default_value_t = 5)]
    h: usize,
    #[arg(long, default_value_t = 10)]
    t: usize,
    #[arg(long, default_value_t = 1000)]
    u: usize,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    #[arg(long)]
    counts: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long, default_value_t = 2)]
    order: usize,
    /// Output prefix: writes PREFIX.rows, PREFIX.cols and PREFIX.trace.
    #[arg(short, long)]
    out: PathBuf,
    /// Add wall-clock seconds to the trace (breaks byte-identical reruns).
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    exchange: ExchangeArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelKind {
    Clustered,
    Backoff,
    Uniform,
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[arg(long, value_enum)]
    kind: ModelKind,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    counts: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    order: usize,
    /// Context clustering (clustered models).
    #[arg(long)]
    rows: Option<PathBuf>,
    /// Word clustering (clustered models).
    #[arg(long)]
    cols: Option<PathBuf>,
    /// Bigrams seen at most this often are discarded (back-off models).
    #[arg(long, default_value_t = 2)]
    cutoff: u64,
    /// `adaptive`, `none`, or a fixed value in (0, 1).
    #[arg(long, default_value = "adaptive")]
    discount: String,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Leave positions predicting the unknown word out of the score.
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_value_t = true, default_missing_value = "true")]
    skip_unknown: bool,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(required = true)]
    corpus: Vec<PathBuf>,
    /// Training prefix sizes in tokens.
    #[arg(long, value_delimiter = ',', default_values_t = [2_000usize, 12_000])]
    sizes: Vec<usize>,
    /// Back-off cutoffs, one table column each.
    #[arg(long, value_delimiter = ',', default_values_t = [2u64, 10, 50])]
    cutoff: Vec<u64>,
    #[arg(long, default_value_t = 2)]
    order: usize,
    #[arg(long, default_value = "adaptive")]
    discount: String,
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_value_t = true, default_missing_value = "true")]
    skip_unknown: bool,
    /// Vocabulary threshold for the training region.
    #[arg(long, default_value_t = 1)]
    vocab_min_count: u64,
    #[arg(long)]
    max_size: Option<usize>,
    /// Fraction of the corpus tail held out for evaluation.
    #[arg(long, default_value_t = 0.1)]
    held_out: f64,
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    exchange: ExchangeArgs,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100_000)]
    tokens: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(short, long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Vocab(a) => commands::vocab(a),
        Command::Count(a) => commands::count(a),
        Command::Cluster(a) => commands::cluster(a),
        Command::Build(a) => commands::build(a),
        Command::Eval(a) => commands::eval(a),
        Command::Compare(a) => commands::compare(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
