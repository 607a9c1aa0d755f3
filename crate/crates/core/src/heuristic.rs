//! Target-cluster preselection for the exchange loop.
//!
//! Every cluster keeps the `h` opposite-side clusters it co-occurs with most. An
//! element's own top-`h` list (taken from the profile the exchange loop computes
//! anyway) is intersected with each cluster's list; the intersection size is the
//! cluster's score and only the `t` best-scoring clusters are tried as targets.
//! Lists of the two clusters touched by a move are recomputed at once; all lists
//! are rebuilt every `u` moves.

use std::io::Write;

use crate::criterion::{ClusterId, ClusterStats, Side};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeuristicParams {
    /// Length of the per-cluster co-occurrence lists.
    pub h: usize,
    /// Number of target clusters tried per element.
    pub t: usize,
    /// Moves between full list refreshes.
    pub u: usize,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        HeuristicParams { h: 5, t: 10, u: 1000 }
    }
}

/// Ordered `(cluster, count)` list: count descending, id ascending, zeros dropped.
pub type TopList = Vec<(ClusterId, u64)>;

fn top_of<I: IntoIterator<Item = (ClusterId, u64)>>(entries: I, h: usize) -> TopList {
    if h == 0 {
        return Vec::new();
    }
    let mut v: TopList = entries.into_iter().filter(|e| e.1 > 0).collect();
    let key = |a: &(ClusterId, u64), b: &(ClusterId, u64)| b.1.cmp(&a.1).then(a.0.cmp(&b.0));
    if v.len() > h {
        v.select_nth_unstable_by(h - 1, key);
        v.truncate(h);
    }
    v.sort_unstable_by(key);
    v
}

/// Top-`h` opposite clusters of one element, from its profile.
pub fn element_top(profile: &[(ClusterId, u64)], h: usize) -> TopList {
    top_of(profile.iter().copied(), h)
}

/// Number of clusters present in both lists.
pub fn candidate_score(element_list: &[ClusterId], cluster_list: &[ClusterId]) -> usize {
    element_list
        .iter()
        .filter(|g| cluster_list.contains(g))
        .count()
}

/// Reusable buffers for [`CandidateIndex::select_targets`].
#[derive(Debug, Default)]
pub struct TargetScratch {
    marked: Vec<bool>,
    weight: Vec<u64>,
    ranked: Vec<(usize, u128, ClusterId)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateIndex {
    params: HeuristicParams,
    row_lists: Vec<TopList>,
    col_lists: Vec<TopList>,
    moves_since_refresh: usize,
    refreshes: usize,
    work: u64,
}

impl CandidateIndex {
    /// Computes every list from scratch.
    pub fn build<F: Real>(stats: &ClusterStats<F>, params: HeuristicParams) -> Self {
        let mut index = CandidateIndex {
            params,
            row_lists: Vec::new(),
            col_lists: Vec::new(),
            moves_since_refresh: 0,
            refreshes: 0,
            work: 0,
        };
        index.refresh(stats);
        index.refreshes = 0;
        index
    }

    pub fn params(&self) -> HeuristicParams {
        self.params
    }

    pub fn moves_since_refresh(&self) -> usize {
        self.moves_since_refresh
    }

    /// Full refreshes performed since construction.
    pub fn refreshes(&self) -> usize {
        self.refreshes
    }

    /// Grid cells scanned while maintaining lists.
    pub fn maintenance_work(&self) -> u64 {
        self.work
    }

    pub fn list(&self, side: Side, cluster: ClusterId) -> &[(ClusterId, u64)] {
        match side {
            Side::Row => &self.row_lists[cluster as usize],
            Side::Column => &self.col_lists[cluster as usize],
        }
    }

    fn compute<F: Real>(&mut self, stats: &ClusterStats<F>, side: Side, own: ClusterId) -> TopList {
        let opp = stats.clusters(side.opposite());
        self.work += opp as u64;
        top_of(
            (0..opp as ClusterId).map(|g| (g, stats.oriented(side, own, g))),
            self.params.h,
        )
    }

    fn refresh<F: Real>(&mut self, stats: &ClusterStats<F>) {
        self.row_lists = (0..stats.c1() as ClusterId)
            .map(|g| self.compute(stats, Side::Row, g))
            .collect();
        self.col_lists = (0..stats.c2() as ClusterId)
            .map(|g| self.compute(stats, Side::Column, g))
            .collect();
        self.refreshes += 1;
    }

    /// Up to `t` target clusters for an element currently in `current`, best first.
    ///
    /// Ranking: overlap score, then profile-weighted co-occurrence over the cluster's
    /// list, then lower id. Clusters with zero score are still eligible, so the
    /// result always holds `min(t, C - 1)` clusters.
    pub fn select_targets<F: Real>(
        &self,
        stats: &ClusterStats<F>,
        side: Side,
        current: ClusterId,
        profile: &[(ClusterId, u64)],
        scratch: &mut TargetScratch,
    ) -> Vec<ClusterId> {
        let own = stats.clusters(side);
        let opp = stats.clusters(side.opposite());
        scratch.marked.resize(opp, false);
        scratch.weight.resize(opp, 0);
        for &(g, _) in &element_top(profile, self.params.h) {
            scratch.marked[g as usize] = true;
        }
        for &(g, k) in profile {
            scratch.weight[g as usize] = k;
        }

        scratch.ranked.clear();
        for c in (0..own as ClusterId).filter(|&c| c != current) {
            let mut score = 0;
            let mut weight = 0u128;
            for &(g, n) in self.list(side, c) {
                score += usize::from(scratch.marked[g as usize]);
                weight += u128::from(scratch.weight[g as usize]) * u128::from(n);
            }
            scratch.ranked.push((score, weight, c));
        }
        let key = |a: &(usize, u128, ClusterId), b: &(usize, u128, ClusterId)| {
            b.0.cmp(&a.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2))
        };
        let t = self.params.t.min(scratch.ranked.len());
        if t > 0 && t < scratch.ranked.len() {
            scratch.ranked.select_nth_unstable_by(t - 1, key);
            scratch.ranked.truncate(t);
        }
        scratch.ranked.sort_unstable_by(key);
        scratch.ranked.truncate(t);

        for &(g, _) in profile {
            scratch.marked[g as usize] = false;
            scratch.weight[g as usize] = 0;
        }
        scratch.ranked.iter().map(|r| r.2).collect()
    }

    /// Scoring work for one selection: one step per list entry of every candidate.
    pub fn selection_cost(&self, side: Side) -> u64 {
        let lists = match side {
            Side::Row => &self.row_lists,
            Side::Column => &self.col_lists,
        };
        lists.iter().map(|l| l.len() as u64 + 1).sum()
    }

    /// Updates after a committed move on `side`: refreshes the two touched lists and
    /// rebuilds everything once `u` moves have accumulated.
    pub fn note_move<F: Real>(
        &mut self,
        stats: &ClusterStats<F>,
        side: Side,
        from: ClusterId,
        to: ClusterId,
    ) {
        let from_list = self.compute(stats, side, from);
        let to_list = self.compute(stats, side, to);
        let lists = match side {
            Side::Row => &mut self.row_lists,
            Side::Column => &mut self.col_lists,
        };
        lists[from as usize] = from_list;
        lists[to as usize] = to_list;
        self.moves_since_refresh += 1;
        if self.moves_since_refresh >= self.params.u.max(1) {
            self.refresh(stats);
            self.moves_since_refresh = 0;
        }
    }

    /// Diagnostic dump: `side<TAB>cluster<TAB>id:count id:count ...`.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (name, lists) in [("row", &self.row_lists), ("col", &self.col_lists)] {
            for (c, list) in lists.iter().enumerate() {
                let items: Vec<String> = list.iter().map(|(g, n)| format!("{g}:{n}")).collect();
                writeln!(out, "{name}\t{c}\t{}", items.join(" "))?;
            }
        }
        Ok(())
    }
}
