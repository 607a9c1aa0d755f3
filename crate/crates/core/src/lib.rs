//! Exchange clustering of word and context classes for class-based n-gram language
//! models, with a leaving-one-out clustering criterion, a candidate-preselection
//! heuristic, and a compact back-off baseline.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases below fix
//! the scalar for the common cases.

pub mod compare;
pub mod corpus;
pub mod criterion;
pub mod exchange;
pub mod graph;
pub mod heuristic;
pub mod models;
pub mod scalar;
pub mod synth;

pub use corpus::{
    build_vocabulary, count_ngrams, merge_counts, tokenize, Context, CorpusError, CountTable,
    TokenStream, Vocabulary, WordId, UNK_ID, UNK_TOKEN,
};
pub use criterion::{ClusterId, ClusterStats, Clustering, CriterionError, Side};
pub use exchange::{cluster, ExchangeConfig, ExchangeError, ExchangeOutcome, ExchangeTrace};
pub use heuristic::{CandidateIndex, HeuristicParams};
pub use models::{
    perplexity, BackoffLm, ClusteredLm, Discount, EvalReport, LanguageModel, ModelError,
};
pub use scalar::Real;

pub type Stats = ClusterStats<f64>;
pub type Stats32 = ClusterStats<f32>;
pub type ClusteredModel = ClusteredLm<f64>;
pub type ClusteredModel32 = ClusteredLm<f32>;
pub type BackoffModel = BackoffLm<f64>;
pub type BackoffModel32 = BackoffLm<f32>;
pub type Trace = ExchangeTrace<f64>;
pub type Outcome = ExchangeOutcome<f64>;
pub type Report = EvalReport<f64>;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "NGCF_THREADS";

/// Worker threads requested through [`THREADS_ENV`]; 1 when unset or invalid.
pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}
