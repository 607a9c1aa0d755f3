//! Evaluable language models and held-out perplexity.

mod backoff;
mod clustered;
mod file;
mod uniform;

use std::fmt;

use thiserror::Error;

use crate::corpus::{TokenStream, WordId, UNK_ID};
use crate::scalar::Real;

pub use backoff::BackoffLm;
pub use clustered::{ClusteredLm, Discount};
pub use file::{load_model, save_model, AnyModel, ModelHeader};
pub use uniform::UniformLm;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("context cluster {0} has no training events")]
    UnreachableRow(u32),
    #[error("context {0:?} has no cluster")]
    UnmappedContext(Vec<WordId>),
    #[error("word {0} has no cluster")]
    UnmappedWord(WordId),
    #[error("word id {word} outside vocabulary of size {size}")]
    OutOfVocabulary { word: WordId, size: usize },
    #[error("context has {got} words, model of order {order} needs {}", order - 1)]
    ContextLength { got: usize, order: usize },
    #[error("zero probability for token {word} at position {position}")]
    ZeroProbability { position: usize, word: WordId },
    #[error("test stream of {len} tokens is shorter than order {order}")]
    TestTooShort { len: usize, order: usize },
    #[error("cutoff must be at least 1")]
    BadCutoff,
    #[error("count table has order {got}, expected {expected}")]
    WrongOrder { got: usize, expected: usize },
    #[error("model file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Criterion(#[from] crate::criterion::CriterionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Conditional word distribution `p(w | w_{i-M} ... w_{i-1})` over ids `0..vocab_size`.
pub trait LanguageModel<F: Real> {
    /// `M + 1`.
    fn order(&self) -> usize;

    fn vocab_size(&self) -> usize;

    fn prob(&self, context: &[WordId], word: WordId) -> Result<F, ModelError>;
}

pub(crate) fn check_query(
    order: usize,
    vocab_size: usize,
    context: &[WordId],
    word: WordId,
) -> Result<(), ModelError> {
    if context.len() + 1 != order {
        return Err(ModelError::ContextLength {
            got: context.len(),
            order,
        });
    }
    if word as usize >= vocab_size {
        return Err(ModelError::OutOfVocabulary {
            word,
            size: vocab_size,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport<F> {
    pub perplexity: F,
    pub n_scored: usize,
    pub n_skipped: usize,
    /// Natural-log probability summed over scored positions.
    pub log_prob_total: F,
}

impl<F: Real> fmt::Display for EvalReport<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "pp={} scored={} skipped={} logprob={}",
            self.perplexity.to_f64_lossy(),
            self.n_scored,
            self.n_skipped,
            self.log_prob_total.to_f64_lossy()
        )
    }
}

/// Scores every position from `order - 1` on. With `skip_unknown`, positions whose
/// predicted word is the unknown token are skipped; unknown words inside contexts
/// still condition normally.
pub fn perplexity<F: Real, M: LanguageModel<F> + ?Sized>(
    model: &M,
    test: &TokenStream,
    skip_unknown: bool,
) -> Result<EvalReport<F>, ModelError> {
    let order = model.order();
    let ids = test.ids();
    if ids.len() < order {
        return Err(ModelError::TestTooShort {
            len: ids.len(),
            order,
        });
    }
    let mut log_prob = F::zero();
    let mut n_scored = 0;
    let mut n_skipped = 0;
    for i in order - 1..ids.len() {
        let word = ids[i];
        if skip_unknown && word == UNK_ID {
            n_skipped += 1;
            continue;
        }
        let p = model.prob(&ids[i + 1 - order..i], word)?;
        if p.is_nan() || p <= F::zero() {
            return Err(ModelError::ZeroProbability { position: i, word });
        }
        log_prob = log_prob + p.ln();
        n_scored += 1;
    }
    let perplexity = if n_scored == 0 {
        F::one()
    } else {
        (-log_prob / F::count(n_scored as u64)).exp()
    };
    Ok(EvalReport {
        perplexity,
        n_scored,
        n_skipped,
        log_prob_total: log_prob,
    })
}
