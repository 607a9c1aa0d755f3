//! Dense, indexed view of a [`CountTable`] for the exchange loop.
//!
//! Row elements are the table's contexts in sorted order; column elements are word
//! ids. Both sides keep adjacency lists so an element's profile over the opposite
//! clustering costs time linear in its number of distinct neighbours.

use crate::corpus::{Context, CountTable, WordId};
use crate::criterion::{ClusterId, Side};

#[derive(Debug, Clone)]
struct Adjacency {
    offsets: Vec<usize>,
    entries: Vec<(u32, u64)>,
}

impl Adjacency {
    fn neighbours(&self, i: usize) -> &[(u32, u64)] {
        &self.entries[self.offsets[i]..self.offsets[i + 1]]
    }
}

#[derive(Debug, Clone)]
pub struct ElementGraph {
    row_keys: Vec<Context>,
    rows: Adjacency,
    cols: Adjacency,
    row_mass: Vec<u64>,
    col_mass: Vec<u64>,
    total: u64,
}

impl ElementGraph {
    /// `n_words` fixes the column universe; it is raised to cover every id in the table.
    pub fn new(counts: &CountTable, n_words: usize) -> Self {
        let n_cols = counts
            .max_word_id()
            .map_or(0, |m| m as usize + 1)
            .max(n_words);

        let mut row_keys: Vec<Context> = Vec::new();
        let mut row_offsets = vec![0];
        let mut row_entries = Vec::with_capacity(counts.len());
        let mut row_mass = Vec::new();
        let mut col_degree = vec![0usize; n_cols];
        let mut col_mass = vec![0u64; n_cols];

        for (ctx, w, n) in counts.events() {
            if row_keys.last().map(Vec::as_slice) != Some(ctx) {
                if !row_keys.is_empty() {
                    row_offsets.push(row_entries.len());
                }
                row_keys.push(ctx.to_vec());
                row_mass.push(0);
            }
            let r = row_keys.len() - 1;
            row_entries.push((w, n));
            row_mass[r] += n;
            col_degree[w as usize] += 1;
            col_mass[w as usize] += n;
        }
        row_offsets.push(row_entries.len());

        let mut col_offsets = Vec::with_capacity(n_cols + 1);
        col_offsets.push(0);
        for d in &col_degree {
            col_offsets.push(col_offsets.last().unwrap() + d);
        }
        let mut fill = col_offsets.clone();
        let mut col_entries = vec![(0u32, 0u64); row_entries.len()];
        for r in 0..row_keys.len() {
            for &(w, n) in &row_entries[row_offsets[r]..row_offsets[r + 1]] {
                col_entries[fill[w as usize]] = (r as u32, n);
                fill[w as usize] += 1;
            }
        }

        ElementGraph {
            row_keys,
            rows: Adjacency {
                offsets: row_offsets,
                entries: row_entries,
            },
            cols: Adjacency {
                offsets: col_offsets,
                entries: col_entries,
            },
            row_mass,
            col_mass,
            total: counts.total(),
        }
    }

    pub fn len(&self, side: Side) -> usize {
        match side {
            Side::Row => self.row_keys.len(),
            Side::Column => self.col_mass.len(),
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn row_key(&self, row: usize) -> &[WordId] {
        &self.row_keys[row]
    }

    /// Occurrence count of an element on its side of the table.
    pub fn mass(&self, side: Side, element: usize) -> u64 {
        match side {
            Side::Row => self.row_mass[element],
            Side::Column => self.col_mass[element],
        }
    }

    /// Opposite-side elements co-occurring with `element`, with counts.
    pub fn neighbours(&self, side: Side, element: usize) -> &[(u32, u64)] {
        match side {
            Side::Row => self.rows.neighbours(element),
            Side::Column => self.cols.neighbours(element),
        }
    }

    /// Elements with mass `>= min_count` in descending mass, ties by index; at most `cap`.
    pub fn element_order(&self, side: Side, min_count: u64, cap: usize) -> Vec<u32> {
        let mut order: Vec<u32> = (0..self.len(side) as u32)
            .filter(|&e| self.mass(side, e as usize) >= min_count)
            .collect();
        order.sort_by(|&a, &b| {
            self.mass(side, b as usize)
                .cmp(&self.mass(side, a as usize))
                .then(a.cmp(&b))
        });
        order.truncate(cap);
        order
    }

    /// Fills `out` with the element's counts aggregated by `opposite` (the clustering
    /// of the other side), sorted by cluster id. `scratch` must be all zero on entry
    /// and is left all zero.
    pub fn profile(
        &self,
        side: Side,
        element: usize,
        opposite: &[ClusterId],
        scratch: &mut [u64],
        out: &mut Vec<(ClusterId, u64)>,
    ) {
        out.clear();
        for &(other, n) in self.neighbours(side, element) {
            let g = opposite[other as usize];
            if scratch[g as usize] == 0 {
                out.push((g, 0));
            }
            scratch[g as usize] += n;
        }
        for entry in out.iter_mut() {
            entry.1 = scratch[entry.0 as usize];
            scratch[entry.0 as usize] = 0;
        }
        out.sort_unstable_by_key(|e| e.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{count_ngrams, TokenStream};

    #[test]
    fn adjacency_and_profiles() {
        let t = count_ngrams(&TokenStream::new(vec![1, 2, 1, 3, 1, 2]), 2).unwrap();
        let g = ElementGraph::new(&t, 4);
        assert_eq!(g.len(Side::Row), 3);
        assert_eq!(g.len(Side::Column), 4);
        assert_eq!(g.row_key(0), &[1]);
        assert_eq!(g.neighbours(Side::Row, 0), &[(2, 2), (3, 1)]);
        assert_eq!(g.mass(Side::Column, 1), 2);
        assert_eq!(g.neighbours(Side::Column, 1), &[(1, 1), (2, 1)]);

        let col_clusters = vec![0, 0, 1, 1];
        let mut scratch = vec![0; 2];
        let mut prof = Vec::new();
        g.profile(Side::Row, 0, &col_clusters, &mut scratch, &mut prof);
        assert_eq!(prof, vec![(1, 3)]);
        assert!(scratch.iter().all(|&x| x == 0));
    }

    #[test]
    fn order_is_by_mass_then_index() {
        // column masses: a(1):5, b(2):9, c(3):5
        let mut t = CountTable::new(2).unwrap();
        t.add(&[4], 1, 5);
        t.add(&[4], 2, 9);
        t.add(&[4], 3, 5);
        let g = ElementGraph::new(&t, 5);
        assert_eq!(g.element_order(Side::Column, 5, usize::MAX), vec![2, 1, 3]);
        assert!(g.element_order(Side::Column, 10, usize::MAX).is_empty());
    }

    #[test]
    fn row_cap_keeps_most_frequent() {
        let mut t = CountTable::new(2).unwrap();
        t.add(&[1], 1, 6);
        t.add(&[2], 1, 8);
        t.add(&[3], 1, 7);
        let g = ElementGraph::new(&t, 4);
        let order = g.element_order(Side::Row, 5, 2);
        let keys: Vec<&[u32]> = order.iter().map(|&r| g.row_key(r as usize)).collect();
        assert_eq!(keys, vec![&[2][..], &[3][..]]);
    }
}
