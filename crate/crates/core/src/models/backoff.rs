use std::collections::BTreeMap;

use crate::corpus::{CountTable, WordId};
use crate::models::{check_query, LanguageModel, ModelError};
use crate::scalar::Real;

/// Per-history statistics of a compact back-off bigram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct History {
    pub total: u64,
    pub discarded: u64,
    pub effective_cutoff: u64,
    /// Bigrams above the cutoff, sorted by word id.
    pub kept: Vec<(WordId, u64)>,
}

/// Bigram model that keeps only counts above a cut-off threshold.
///
/// Kept bigrams use relative frequencies, `N(v,w) / N(v)`. The mass of the discarded
/// bigrams, `alpha(v)`, is spread over every word not kept for `v` in proportion to the
/// unigram distribution. Rows that would lose nothing raise their cutoff to the
/// smallest count in the row. The unigram adds one to every vocabulary word so that
/// no in-vocabulary word gets probability zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BackoffLm<F> {
    vocab_size: usize,
    cutoff: u64,
    unigram: Vec<u64>,
    unigram_total: u64,
    histories: BTreeMap<WordId, History>,
    /// `(N + V) - sum over kept w of (N(w) + 1)` per history.
    rest_mass: BTreeMap<WordId, u64>,
    _scalar: std::marker::PhantomData<F>,
}

impl<F: Real> BackoffLm<F> {
    pub fn build(counts: &CountTable, cutoff: u64, vocab_size: usize) -> Result<Self, ModelError> {
        if counts.order() != 2 {
            return Err(ModelError::WrongOrder {
                got: counts.order(),
                expected: 2,
            });
        }
        if cutoff < 1 {
            return Err(ModelError::BadCutoff);
        }
        let mut rows: BTreeMap<WordId, Vec<(WordId, u64)>> = BTreeMap::new();
        for (ctx, w, n) in counts.events() {
            rows.entry(ctx[0]).or_default().push((w, n));
        }
        let histories = rows
            .into_iter()
            .map(|(v, row)| (v, discard_below(row, cutoff)))
            .collect();
        let unigram = (0..vocab_size as WordId)
            .map(|w| counts.col_marginal(w))
            .collect();
        Self::from_parts(vocab_size, cutoff, unigram, histories)
    }

    pub fn from_parts(
        vocab_size: usize,
        cutoff: u64,
        unigram: Vec<u64>,
        histories: BTreeMap<WordId, History>,
    ) -> Result<Self, ModelError> {
        if unigram.len() != vocab_size {
            return Err(ModelError::Format {
                line: 0,
                message: format!("unigram has {} entries, vocabulary {vocab_size}", unigram.len()),
            });
        }
        let unigram_total: u64 = unigram.iter().sum();
        let floor_total = unigram_total + vocab_size as u64;
        let mut rest_mass = BTreeMap::new();
        for (&v, h) in &histories {
            let mut kept_mass = 0;
            for &(w, _) in &h.kept {
                let c = unigram.get(w as usize).ok_or(ModelError::OutOfVocabulary {
                    word: w,
                    size: vocab_size,
                })?;
                kept_mass += c + 1;
            }
            rest_mass.insert(v, floor_total - kept_mass);
        }
        Ok(BackoffLm {
            vocab_size,
            cutoff,
            unigram,
            unigram_total,
            histories,
            rest_mass,
            _scalar: std::marker::PhantomData,
        })
    }

    pub fn cutoff(&self) -> u64 {
        self.cutoff
    }

    pub fn histories(&self) -> &BTreeMap<WordId, History> {
        &self.histories
    }

    pub fn unigram_counts(&self) -> &[u64] {
        &self.unigram
    }

    pub fn unigram_prob(&self, w: WordId) -> F {
        F::count(self.unigram[w as usize] + 1)
            / F::count(self.unigram_total + self.vocab_size as u64)
    }

    /// Back-off weight `alpha(v)`; 1 for histories never seen in training.
    pub fn backoff_mass(&self, v: WordId) -> F {
        match self.histories.get(&v) {
            Some(h) => F::count(h.discarded) / F::count(h.total),
            None => F::one(),
        }
    }

    /// Number of stored bigram parameters.
    pub fn kept_bigrams(&self) -> usize {
        self.histories.values().map(|h| h.kept.len()).sum()
    }
}

fn discard_below(row: Vec<(WordId, u64)>, cutoff: u64) -> History {
    let total = row.iter().map(|e| e.1).sum();
    let mut effective = cutoff;
    if row.iter().all(|e| e.1 > cutoff) {
        effective = row.iter().map(|e| e.1).min().unwrap_or(cutoff);
    }
    let discarded = row.iter().filter(|e| e.1 <= effective).map(|e| e.1).sum();
    let kept = row.into_iter().filter(|e| e.1 > effective).collect();
    History {
        total,
        discarded,
        effective_cutoff: effective,
        kept,
    }
}

impl<F: Real> LanguageModel<F> for BackoffLm<F> {
    fn order(&self) -> usize {
        2
    }

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn prob(&self, context: &[WordId], word: WordId) -> Result<F, ModelError> {
        check_query(2, self.vocab_size, context, word)?;
        let v = context[0];
        let Some(h) = self.histories.get(&v) else {
            return Ok(self.unigram_prob(word));
        };
        if let Ok(i) = h.kept.binary_search_by_key(&word, |e| e.0) {
            return Ok(F::count(h.kept[i].1) / F::count(h.total));
        }
        let rest = self.rest_mass[&v];
        Ok(F::count(h.discarded) * F::count(self.unigram[word as usize] + 1)
            / (F::count(h.total) * F::count(rest)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[(u32, u32, u64)]) -> CountTable {
        let mut t = CountTable::new(2).unwrap();
        for &(v, w, n) in rows {
            t.add(&[v], w, n);
        }
        t
    }

    #[test]
    fn rule_application() {
        // v=1, x=2, y=3
        let t = table(&[(1, 2, 5), (1, 3, 1)]);
        let lm = BackoffLm::<f64>::build(&t, 2, 4).unwrap();
        assert!((lm.prob(&[1], 2).unwrap() - 5.0 / 6.0).abs() < 1e-12);
        assert!((lm.backoff_mass(1) - 1.0 / 6.0).abs() < 1e-12);
        let rest: f64 = [0, 1, 3].iter().map(|&w| lm.prob(&[1], w).unwrap()).sum();
        assert!((rest - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn fallback_raises_cutoff() {
        let t = table(&[(1, 2, 5), (1, 3, 5)]);
        let lm = BackoffLm::<f64>::build(&t, 2, 4).unwrap();
        let h = &lm.histories()[&1];
        assert_eq!(h.effective_cutoff, 5);
        assert!(h.kept.is_empty());
        assert_eq!(lm.backoff_mass(1), 1.0);
        assert!((lm.prob(&[1], 2).unwrap() - lm.unigram_prob(2)).abs() < 1e-15);
    }

    #[test]
    fn fallback_discards_only_the_smallest_count() {
        let t = table(&[(1, 2, 7), (1, 3, 4), (1, 0, 4)]);
        let lm = BackoffLm::<f64>::build(&t, 2, 4).unwrap();
        let h = &lm.histories()[&1];
        assert_eq!((h.effective_cutoff, h.discarded), (4, 8));
        assert_eq!(h.kept, vec![(2, 7)]);
    }

    #[test]
    fn unseen_history_is_unigram() {
        let t = table(&[(1, 2, 5), (1, 3, 1)]);
        let lm = BackoffLm::<f64>::build(&t, 2, 4).unwrap();
        // unigram counts: w2: 5, w3: 1, total 6, vocab 4 -> (c + 1) / 10
        assert!((lm.prob(&[2], 2).unwrap() - 0.6).abs() < 1e-12);
        assert!((lm.prob(&[2], 0).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let t = table(&[(1, 2, 5)]);
        assert!(matches!(BackoffLm::<f64>::build(&t, 0, 4), Err(ModelError::BadCutoff)));
        let tri = CountTable::new(3).unwrap();
        assert!(matches!(
            BackoffLm::<f64>::build(&tri, 2, 4),
            Err(ModelError::WrongOrder { got: 3, expected: 2 })
        ));
    }
}
