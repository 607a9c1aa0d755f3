use crate::corpus::{CountTable, WordId};
use crate::criterion::{ClusterId, Clustering};
use crate::models::{check_query, LanguageModel, ModelError};
use crate::scalar::Real;

/// Discount applied to class-pair counts when the model is built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Discount {
    /// `n1 / (n1 + 2 n2)` from the class-pair count-of-counts, clamped to `[0.1, 0.9]`.
    Adaptive,
    Fixed(f64),
    /// Relative frequencies; unseen class pairs get probability 0. Diagnostic only.
    None,
}

pub const ADAPTIVE_DISCOUNT_RANGE: (f64, f64) = (0.1, 0.9);

/// Two-sided class model `p(w | ctx) = p(G2(w) | G1(ctx)) * p(w | G2(w))`.
///
/// Class transitions use absolute discounting per context cluster; the freed mass goes
/// to unseen word clusters in proportion to their floored unigram mass. Emissions are
/// relative frequencies with one extra count per vocabulary word.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredLm<F> {
    order: usize,
    vocab_size: usize,
    clustering: Clustering,
    pairs: Vec<(ClusterId, ClusterId, u64)>,
    word_counts: Vec<u64>,
    b_final: F,
    word_cluster: Vec<ClusterId>,
    cluster_mass: Vec<u64>,
    row_total: Vec<u64>,
    transition: Vec<F>,
}

impl<F: Real> ClusteredLm<F> {
    pub fn build(
        counts: &CountTable,
        clustering: &Clustering,
        vocab_size: usize,
        discount: Discount,
    ) -> Result<Self, ModelError> {
        let (c1, c2) = (clustering.c1(), clustering.c2());
        let mut grid = vec![0u64; c1 * c2];
        for (ctx, w, n) in counts.events() {
            let g1 = clustering
                .row_cluster(ctx)
                .ok_or_else(|| ModelError::UnmappedContext(ctx.to_vec()))?;
            let g2 = clustering.col_cluster(w).ok_or(ModelError::UnmappedWord(w))?;
            grid[g1 as usize * c2 + g2 as usize] += n;
        }
        let pairs: Vec<_> = grid
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(i, &n)| ((i / c2) as ClusterId, (i % c2) as ClusterId, n))
            .collect();
        let word_counts = (0..vocab_size as WordId)
            .map(|w| counts.col_marginal(w))
            .collect();
        let b_final = match discount {
            Discount::Adaptive => adaptive_discount(&pairs),
            Discount::Fixed(b) => b,
            Discount::None => 0.0,
        };
        Self::from_parts(
            counts.order(),
            vocab_size,
            clustering.clone(),
            pairs,
            word_counts,
            F::of(b_final),
        )
    }

    /// Assembles a model from its stored statistics; all probabilities are derived here.
    pub fn from_parts(
        order: usize,
        vocab_size: usize,
        clustering: Clustering,
        pairs: Vec<(ClusterId, ClusterId, u64)>,
        word_counts: Vec<u64>,
        b_final: F,
    ) -> Result<Self, ModelError> {
        let (c1, c2) = (clustering.c1(), clustering.c2());
        let word_cluster = (0..vocab_size as WordId)
            .map(|w| clustering.col_cluster(w).ok_or(ModelError::UnmappedWord(w)))
            .collect::<Result<Vec<_>, _>>()?;
        let mut cluster_mass = vec![0u64; c2];
        for (w, &g) in word_cluster.iter().enumerate() {
            cluster_mass[g as usize] += word_counts[w] + 1;
        }
        let mass_total: u64 = cluster_mass.iter().sum();

        let mut row_total = vec![0u64; c1];
        let mut by_row: Vec<Vec<(ClusterId, u64)>> = vec![Vec::new(); c1];
        for &(g1, g2, n) in &pairs {
            row_total[g1 as usize] += n;
            by_row[g1 as usize].push((g2, n));
        }

        let mut transition = vec![F::zero(); c1 * c2];
        for (g1, seen) in by_row.iter().enumerate() {
            let total = row_total[g1];
            if total == 0 {
                continue;
            }
            let row = &mut transition[g1 * c2..(g1 + 1) * c2];
            let seen_mass: u64 = seen.iter().map(|&(g2, _)| cluster_mass[g2 as usize]).sum();
            let unseen_mass = mass_total - seen_mass;
            let n = F::count(total);
            if unseen_mass == 0 || b_final == F::zero() {
                for &(g2, k) in seen {
                    row[g2 as usize] = F::count(k) / n;
                }
                continue;
            }
            for &(g2, k) in seen {
                row[g2 as usize] = (F::count(k) - b_final) / n;
            }
            let freed = b_final * F::count(seen.len() as u64) / n;
            let scale = freed / F::count(unseen_mass);
            for g2 in 0..c2 {
                if row[g2] == F::zero() {
                    row[g2] = scale * F::count(cluster_mass[g2]);
                }
            }
        }

        Ok(ClusteredLm {
            order,
            vocab_size,
            clustering,
            pairs,
            word_counts,
            b_final,
            word_cluster,
            cluster_mass,
            row_total,
            transition,
        })
    }

    pub fn clustering(&self) -> &Clustering {
        &self.clustering
    }

    pub fn b_final(&self) -> F {
        self.b_final
    }

    pub fn pairs(&self) -> &[(ClusterId, ClusterId, u64)] {
        &self.pairs
    }

    pub fn word_counts(&self) -> &[u64] {
        &self.word_counts
    }

    /// `p(g2 | g1)`; errors for context clusters without training events.
    pub fn class_prob(&self, g1: ClusterId, g2: ClusterId) -> Result<F, ModelError> {
        if self.row_total[g1 as usize] == 0 {
            return Err(ModelError::UnreachableRow(g1));
        }
        Ok(self.transition[g1 as usize * self.clustering.c2() + g2 as usize])
    }

    /// `p(w | G2(w))`.
    pub fn emission(&self, word: WordId) -> F {
        let g2 = self.word_cluster[word as usize];
        F::count(self.word_counts[word as usize] + 1) / F::count(self.cluster_mass[g2 as usize])
    }

    pub fn is_reachable(&self, g1: ClusterId) -> bool {
        self.row_total[g1 as usize] > 0
    }
}

/// `n1 / (n1 + 2 n2)` over class-pair counts, clamped.
pub fn adaptive_discount(pairs: &[(ClusterId, ClusterId, u64)]) -> f64 {
    let n1 = pairs.iter().filter(|p| p.2 == 1).count() as f64;
    let n2 = pairs.iter().filter(|p| p.2 == 2).count() as f64;
    let (lo, hi) = ADAPTIVE_DISCOUNT_RANGE;
    if n1 == 0.0 {
        return lo;
    }
    (n1 / (n1 + 2.0 * n2)).clamp(lo, hi)
}

impl<F: Real> LanguageModel<F> for ClusteredLm<F> {
    fn order(&self) -> usize {
        self.order
    }

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn prob(&self, context: &[WordId], word: WordId) -> Result<F, ModelError> {
        check_query(self.order, self.vocab_size, context, word)?;
        let g1 = self
            .clustering
            .row_cluster(context)
            .ok_or_else(|| ModelError::UnmappedContext(context.to_vec()))?;
        let g2 = self.word_cluster[word as usize];
        Ok(self.class_prob(g1, g2)? * self.emission(word))
    }
}
