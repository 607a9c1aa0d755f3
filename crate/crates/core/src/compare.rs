//! Back-off versus clustered perplexity on nested training prefixes.

use std::io::Write;

use thiserror::Error;

use crate::corpus::{count_ngrams, word_counts, CorpusError, TokenStream, Vocabulary};
use crate::exchange::{cluster, ExchangeConfig, ExchangeError};
use crate::heuristic::HeuristicParams;
use crate::models::{perplexity, BackoffLm, ClusteredLm, Discount, ModelError};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("training size {requested} exceeds the {available} training tokens available (achievable sizes: {achievable:?})")]
    InsufficientCorpus {
        requested: usize,
        available: usize,
        achievable: Vec<usize>,
    },
    #[error("no training sizes or no models requested")]
    Empty,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Exchange(#[from] ExchangeError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    /// Training prefix lengths in tokens.
    pub sizes: Vec<usize>,
    pub cutoffs: Vec<u64>,
    /// Order of the clustered model; back-off models are always bigrams.
    pub order: usize,
    pub exchange: ExchangeConfig,
    pub heuristic: Option<HeuristicParams>,
    pub discount: Discount,
    pub skip_unknown: bool,
    pub vocab_min_count: u64,
    pub vocab_max_size: usize,
    /// Fraction of the corpus, taken from the end, used for evaluation.
    pub held_out_fraction: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            sizes: vec![2_000, 12_000],
            cutoffs: vec![2, 10, 50],
            order: 2,
            exchange: ExchangeConfig::default(),
            heuristic: None,
            discount: Discount::Adaptive,
            skip_unknown: true,
            vocab_min_count: 1,
            vocab_max_size: usize::MAX,
            held_out_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow<F> {
    pub tokens: usize,
    /// One perplexity per configured cutoff.
    pub backoff: Vec<F>,
    pub clustered: F,
    /// Final criterion value of the clustering behind `clustered`.
    pub criterion: F,
}

impl<F: Real> CompareRow<F> {
    /// `(backoff - clustered) / backoff * 100` for back-off model `i`.
    pub fn improvement(&self, i: usize) -> F {
        (self.backoff[i] - self.clustered) / self.backoff[i] * F::of(100.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareTable<F> {
    pub cutoffs: Vec<u64>,
    pub rows: Vec<CompareRow<F>>,
}

impl<F: Real> CompareTable<F> {
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "tokens")?;
        for c in &self.cutoffs {
            write!(out, "\tbackoff_c{c}")?;
        }
        write!(out, "\tclustered")?;
        for c in &self.cutoffs {
            write!(out, "\timprovement_c{c}")?;
        }
        writeln!(out)?;
        for row in &self.rows {
            write!(out, "{}", row.tokens)?;
            for pp in &row.backoff {
                write!(out, "\t{:.2}", pp.to_f64_lossy())?;
            }
            write!(out, "\t{:.2}", row.clustered.to_f64_lossy())?;
            for i in 0..self.cutoffs.len() {
                write!(out, "\t{:.1}", row.improvement(i).to_f64_lossy())?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Splits `words` into a training region and a held-out tail and builds the shared
/// vocabulary from the training region.
pub fn split<S: AsRef<str>>(
    words: &[S],
    config: &CompareConfig,
) -> (Vocabulary, TokenStream, TokenStream) {
    let n_test = ((words.len() as f64) * config.held_out_fraction).round() as usize;
    let n_train = words.len() - n_test.min(words.len());
    let vocab = Vocabulary::from_counts(
        &word_counts(&words[..n_train]),
        config.vocab_min_count,
        config.vocab_max_size,
    );
    let train = vocab.encode(&words[..n_train]);
    let test = vocab.encode(&words[n_train..]);
    (vocab, train, test)
}

pub fn compare<F: Real, S: AsRef<str>>(
    words: &[S],
    config: &CompareConfig,
) -> Result<CompareTable<F>, CompareError> {
    if config.sizes.is_empty() {
        return Err(CompareError::Empty);
    }
    let (vocab, train, test) = split(words, config);
    let available = train.n_tokens();
    if let Some(&requested) = config.sizes.iter().find(|&&s| s > available) {
        return Err(CompareError::InsufficientCorpus {
            requested,
            available,
            achievable: config.sizes.iter().copied().filter(|&s| s <= available).collect(),
        });
    }
    let mut rows = Vec::with_capacity(config.sizes.len());
    for &size in &config.sizes {
        let prefix = train.slice(0..size);
        let bigrams = count_ngrams(&prefix, 2)?;
        let mut backoff = Vec::with_capacity(config.cutoffs.len());
        for &cutoff in &config.cutoffs {
            let lm = BackoffLm::<F>::build(&bigrams, cutoff, vocab.len())?;
            backoff.push(perplexity(&lm, &test, config.skip_unknown)?.perplexity);
        }
        let counts = if config.order == 2 {
            bigrams
        } else {
            count_ngrams(&prefix, config.order)?
        };
        let outcome = cluster::<F>(&counts, vocab.len(), &config.exchange, config.heuristic)?;
        let lm = ClusteredLm::<F>::build(&counts, &outcome.clustering, vocab.len(), config.discount)?;
        let clustered = perplexity(&lm, &test, config.skip_unknown)?.perplexity;
        log::info!("prefix {size}: clustered pp {clustered}");
        rows.push(CompareRow {
            tokens: size,
            backoff,
            clustered,
            criterion: outcome.trace.last().criterion,
        });
    }
    Ok(CompareTable {
        cutoffs: config.cutoffs.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_words, SynthConfig};

    #[test]
    fn table_shape_and_improvement_formula() {
        let words = generate_words(&SynthConfig {
            tokens: 6_000,
            ..SynthConfig::default()
        });
        let config = CompareConfig {
            sizes: vec![1_000, 4_000],
            cutoffs: vec![1, 2],
            exchange: ExchangeConfig {
                c1: 8,
                c2: 8,
                min_count: 2,
                ..ExchangeConfig::default()
            },
            ..CompareConfig::default()
        };
        let table = compare::<f64, _>(&words, &config).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert!(table.rows.iter().all(|r| r.backoff.len() == 2));
        let r = &table.rows[0];
        assert!((r.improvement(1) - (r.backoff[1] - r.clustered) / r.backoff[1] * 100.0).abs() < 1e-12);
        let mut out = Vec::new();
        table.write_tsv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "tokens\tbackoff_c1\tbackoff_c2\tclustered\timprovement_c1\timprovement_c2"
        );
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn oversized_prefix_lists_achievable_sizes() {
        let words: Vec<String> = (0..100).map(|i| format!("w{}", i % 7)).collect();
        let config = CompareConfig {
            sizes: vec![50, 95],
            ..CompareConfig::default()
        };
        match compare::<f64, _>(&words, &config) {
            Err(CompareError::InsufficientCorpus {
                requested: 95,
                available: 90,
                achievable,
            }) => assert_eq!(achievable, vec![50]),
            other => panic!("{other:?}"),
        }
    }
}
