//! Exchange clustering of contexts (`G1`) and words (`G2`) under the
//! leaving-one-out criterion.
//!
//! Each iteration visits every clusterable word, then every clusterable context, in
//! descending frequency. For each element the best strictly improving move among the
//! candidate targets is applied. Elements rarer than `min_count` never move.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::CountTable;
use crate::criterion::{ClusterId, ClusterStats, Clustering, CriterionError, Side};
use crate::graph::ElementGraph;
use crate::heuristic::{CandidateIndex, HeuristicParams, TargetScratch};
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum ExchangeError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{side:?} side has {found} elements with nonzero count; at least 2 are needed")]
    TooFewElements { side: Side, found: usize },
    #[error(transparent)]
    Criterion(#[from] CriterionError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeConfig {
    /// Number of context clusters `C1`.
    pub c1: usize,
    /// Number of word clusters `C2`.
    pub c2: usize,
    /// Elements occurring fewer times stay in the residual cluster.
    pub min_count: u64,
    pub max_iterations: usize,
    /// Absolute-discounting constant used inside the criterion.
    pub b: f64,
    /// Stop once an iteration's relative criterion gain falls below this; 0 disables.
    pub convergence_epsilon: f64,
    /// Cap on the number of distinct contexts that are actively clustered.
    pub max_rows_clustered: usize,
    /// Recorded for reproducibility; initialisation itself is frequency-ordered.
    pub seed: u64,
    /// Worker threads for candidate evaluation; 1 keeps everything on the caller.
    pub threads: usize,
}

impl Default for ExchangeConfig {
    fn default() -> Self {
        ExchangeConfig {
            c1: 100,
            c2: 100,
            min_count: 5,
            max_iterations: 20,
            b: 0.75,
            convergence_epsilon: 0.0,
            max_rows_clustered: 500_000,
            seed: 42,
            threads: 1,
        }
    }
}

impl ExchangeConfig {
    pub fn validate(&self) -> Result<(), ExchangeError> {
        let bad = |m: &str| Err(ExchangeError::Config(m.to_string()));
        if self.c1 < 2 || self.c2 < 2 {
            return bad("c1 and c2 must be at least 2");
        }
        if self.c1 > u32::MAX as usize || self.c2 > u32::MAX as usize {
            return bad("cluster counts exceed the id range");
        }
        if self.min_count < 2 {
            return bad("min_count must be at least 2");
        }
        if self.max_iterations < 1 {
            return bad("max_iterations must be at least 1");
        }
        if !(self.b > 0.0 && self.b < 1.0) {
            return bad("b must lie in (0, 1)");
        }
        if self.convergence_epsilon.is_nan() || self.convergence_epsilon < 0.0 {
            return bad("convergence_epsilon must be non-negative");
        }
        Ok(())
    }

    fn clusters(&self, side: Side) -> usize {
        match side {
            Side::Row => self.c1,
            Side::Column => self.c2,
        }
    }

    fn cap(&self, side: Side) -> usize {
        match side {
            Side::Row => self.max_rows_clustered,
            Side::Column => usize::MAX,
        }
    }
}

/// One line of the iteration log; iteration 0 is the initial clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<F> {
    pub iteration: usize,
    pub criterion: F,
    pub moves: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// An iteration made no move.
    Converged,
    /// Relative gain fell below the configured epsilon.
    SmallGain,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeTrace<F> {
    pub records: Vec<IterationRecord<F>>,
    pub stop: StopReason,
}

impl<F: Real> ExchangeTrace<F> {
    pub fn initial(&self) -> F {
        self.records[0].criterion
    }

    pub fn last(&self) -> &IterationRecord<F> {
        self.records.last().expect("trace has an initial record")
    }

    pub fn is_monotone(&self) -> bool {
        self.records
            .windows(2)
            .all(|w| w[1].criterion >= w[0].criterion)
    }

    /// `iteration<TAB>criterion<TAB>moves<TAB>seconds` per record.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.records {
            writeln!(
                out,
                "{}\t{}\t{}\t{:.3}",
                r.iteration,
                r.criterion.to_f64_lossy(),
                r.moves,
                r.seconds
            )?;
        }
        Ok(())
    }
}

/// Instrumented operation counts; independent of machine speed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorkCounters {
    /// Number of `(element, target)` delta evaluations.
    pub delta_evaluations: u64,
    /// Profile entries touched by those evaluations (one extra per evaluation for
    /// the marginal terms).
    pub delta_work: u64,
    /// Neighbour entries scanned while building element profiles.
    pub profile_work: u64,
    /// List entries scanned while scoring candidate clusters.
    pub selection_work: u64,
    /// Grid cells scanned while maintaining heuristic lists.
    pub maintenance_work: u64,
    pub moves: u64,
}

impl WorkCounters {
    /// Work spent choosing and evaluating targets (profile building excluded).
    pub fn move_search_work(&self) -> u64 {
        self.delta_work + self.selection_work + self.maintenance_work
    }
}

/// Dense assignment of every graph element to a cluster, per side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub rows: Vec<ClusterId>,
    pub cols: Vec<ClusterId>,
}

impl Assignment {
    pub fn side(&self, side: Side) -> &[ClusterId] {
        match side {
            Side::Row => &self.rows,
            Side::Column => &self.cols,
        }
    }

    fn side_mut(&mut self, side: Side) -> &mut Vec<ClusterId> {
        match side {
            Side::Row => &mut self.rows,
            Side::Column => &mut self.cols,
        }
    }

    /// Converts to a [`Clustering`] with explicit entries for every context and every
    /// word seen in the graph; the last cluster on each side is the residual.
    pub fn to_clustering(&self, graph: &ElementGraph, c1: usize, c2: usize) -> Clustering {
        let mut g = Clustering::new(c1, c2);
        for (r, &k) in self.rows.iter().enumerate() {
            g.set_row(graph.row_key(r).to_vec(), k).expect("row id in range");
        }
        for (w, &k) in self.cols.iter().enumerate() {
            if graph.mass(Side::Column, w) > 0 || !graph.neighbours(Side::Column, w).is_empty() {
                g.set_col(w as u32, k).expect("column id in range");
            }
        }
        g.set_residuals(Some(c1 as ClusterId - 1), Some(c2 as ClusterId - 1))
            .expect("residual ids in range");
        g
    }
}

/// Statistics of a dense assignment.
pub fn assignment_stats<F: Real>(
    graph: &ElementGraph,
    assignment: &Assignment,
    c1: usize,
    c2: usize,
    b: F,
) -> Result<ClusterStats<F>, CriterionError> {
    let mut stats = ClusterStats::empty(c1, c2, b)?;
    for r in 0..graph.len(Side::Row) {
        let g1 = assignment.rows[r];
        for &(w, n) in graph.neighbours(Side::Row, r) {
            stats.add(g1, assignment.cols[w as usize], n);
        }
    }
    Ok(stats)
}

fn initialize_side(
    graph: &ElementGraph,
    side: Side,
    config: &ExchangeConfig,
) -> Result<Vec<ClusterId>, ExchangeError> {
    let n = graph.len(side);
    let live = (0..n).filter(|&e| graph.mass(side, e) > 0).count();
    if live < 2 {
        return Err(ExchangeError::TooFewElements { side, found: live });
    }
    let c = config.clusters(side);
    let residual = (c - 1) as ClusterId;
    let order = graph.element_order(side, config.min_count, config.cap(side));
    let mut singles: Vec<u32> = order.into_iter().take(c - 1).collect();

    let residual_mass = |singles: &[u32]| {
        let taken: u64 = singles.iter().map(|&e| graph.mass(side, e as usize)).sum();
        graph.total() - taken
    };
    if residual_mass(&singles) == 1 {
        singles.pop();
    }

    let mut assign = vec![residual; n];
    for (k, &e) in singles.iter().enumerate() {
        assign[e as usize] = k as ClusterId;
    }
    Ok(assign)
}

/// Initial clustering: the `c - 1` most frequent clusterable elements of each side get
/// singleton clusters, everything else shares the last (residual) cluster.
pub fn initialize(graph: &ElementGraph, config: &ExchangeConfig) -> Result<Assignment, ExchangeError> {
    config.validate()?;
    Ok(Assignment {
        rows: initialize_side(graph, Side::Row, config)?,
        cols: initialize_side(graph, Side::Column, config)?,
    })
}

#[derive(Debug, Clone)]
pub struct ExchangeOutcome<F> {
    pub assignment: Assignment,
    pub clustering: Clustering,
    pub stats: ClusterStats<F>,
    pub trace: ExchangeTrace<F>,
    pub work: WorkCounters,
    /// Work counters per iteration (index 0 is iteration 1).
    pub work_per_iteration: Vec<WorkCounters>,
}

/// Runs exchange clustering on `counts`. `n_words` is the vocabulary size; with
/// `heuristic` set, only the preselected target clusters are tried.
pub fn cluster<F: Real>(
    counts: &CountTable,
    n_words: usize,
    config: &ExchangeConfig,
    heuristic: Option<HeuristicParams>,
) -> Result<ExchangeOutcome<F>, ExchangeError> {
    let graph = ElementGraph::new(counts, n_words);
    let assignment = initialize(&graph, config)?;
    run_from(&graph, assignment, config, heuristic)
}

/// Runs the exchange loop from a given assignment.
pub fn run_from<F: Real>(
    graph: &ElementGraph,
    assignment: Assignment,
    config: &ExchangeConfig,
    heuristic: Option<HeuristicParams>,
) -> Result<ExchangeOutcome<F>, ExchangeError> {
    config.validate()?;
    if let Some(p) = heuristic {
        if p.u == 0 {
            return Err(ExchangeError::Config("u must be at least 1".into()));
        }
    }
    let pool = if config.threads > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .ok()
    } else {
        None
    };
    let mut run = Exchange {
        graph,
        stats: assignment_stats(graph, &assignment, config.c1, config.c2, F::of(config.b))?,
        assignment,
        index: None,
        work: WorkCounters::default(),
        pool,
    };
    run.index = heuristic.map(|p| CandidateIndex::build(&run.stats, p));

    let orders = [
        (Side::Column, graph.element_order(Side::Column, config.min_count, usize::MAX)),
        (Side::Row, graph.element_order(Side::Row, config.min_count, config.max_rows_clustered)),
    ];

    let mut records = vec![IterationRecord {
        iteration: 0,
        criterion: run.stats.loo_criterion()?,
        moves: 0,
        seconds: 0.0,
    }];
    let mut work_per_iteration = Vec::new();
    let mut stop = StopReason::IterationCap;
    for iteration in 1..=config.max_iterations {
        let start = Instant::now();
        let before = run.work;
        let mut moves = 0;
        for (side, order) in &orders {
            moves += run.pass(*side, order)?;
        }
        if let Some(index) = &run.index {
            run.work.maintenance_work = index.maintenance_work();
        }
        let criterion = run.stats.loo_criterion()?;
        let previous = records.last().unwrap().criterion;
        records.push(IterationRecord {
            iteration,
            criterion,
            moves,
            seconds: start.elapsed().as_secs_f64(),
        });
        work_per_iteration.push(diff(run.work, before));
        log::debug!("iteration {iteration}: criterion {criterion} after {moves} moves");
        if moves == 0 {
            stop = StopReason::Converged;
            break;
        }
        let eps = F::of(config.convergence_epsilon);
        if eps > F::zero() && (criterion - previous) / previous.abs().max(F::min_positive_value()) < eps {
            stop = StopReason::SmallGain;
            break;
        }
    }

    Ok(ExchangeOutcome {
        clustering: run.assignment.to_clustering(graph, config.c1, config.c2),
        assignment: run.assignment,
        stats: run.stats,
        trace: ExchangeTrace { records, stop },
        work: run.work,
        work_per_iteration,
    })
}

fn diff(after: WorkCounters, before: WorkCounters) -> WorkCounters {
    WorkCounters {
        delta_evaluations: after.delta_evaluations - before.delta_evaluations,
        delta_work: after.delta_work - before.delta_work,
        profile_work: after.profile_work - before.profile_work,
        selection_work: after.selection_work - before.selection_work,
        maintenance_work: after.maintenance_work - before.maintenance_work,
        moves: after.moves - before.moves,
    }
}

struct Exchange<'a, F> {
    graph: &'a ElementGraph,
    stats: ClusterStats<F>,
    assignment: Assignment,
    index: Option<CandidateIndex>,
    work: WorkCounters,
    pool: Option<rayon::ThreadPool>,
}

impl<F: Real> Exchange<'_, F> {
    fn pass(&mut self, side: Side, order: &[u32]) -> Result<usize, ExchangeError> {
        let opp_clusters = self.stats.clusters(side.opposite());
        let mut scratch = vec![0u64; opp_clusters];
        let mut profile = Vec::new();
        let mut target_scratch = TargetScratch::default();
        let mut moves = 0;

        for &e in order {
            let e = e as usize;
            self.graph.profile(
                side,
                e,
                self.assignment.side(side.opposite()),
                &mut scratch,
                &mut profile,
            );
            self.work.profile_work += self.graph.neighbours(side, e).len() as u64;
            let mass: u64 = profile.iter().map(|p| p.1).sum();
            let from = self.assignment.side(side)[e];
            if mass == 0 || !self.stats.can_leave(side, from, mass) {
                continue;
            }

            let targets: Vec<ClusterId> = match &self.index {
                None => (0..self.stats.clusters(side) as ClusterId)
                    .filter(|&c| c != from)
                    .collect(),
                Some(index) => {
                    self.work.selection_work += index.selection_cost(side);
                    index.select_targets(&self.stats, side, from, &profile, &mut target_scratch)
                }
            };
            self.work.delta_evaluations += targets.len() as u64;
            self.work.delta_work += targets.len() as u64 * (profile.len() as u64 + 1);

            let best = self.best_target(side, &profile, mass, from, &targets)?;
            let Some((to, gain)) = best else { continue };
            let scale = self.stats.total();
            if gain <= F::gain_tolerance(F::count(scale)) {
                continue;
            }
            self.stats.apply_unchecked(side, &profile, mass, from, to);
            self.assignment.side_mut(side)[e] = to;
            if let Some(index) = &mut self.index {
                index.note_move(&self.stats, side, from, to);
            }
            self.work.moves += 1;
            moves += 1;
        }
        Ok(moves)
    }

    /// Highest-gain legal target; ties go to the lower cluster id.
    fn best_target(
        &self,
        side: Side,
        profile: &[(ClusterId, u64)],
        mass: u64,
        from: ClusterId,
        targets: &[ClusterId],
    ) -> Result<Option<(ClusterId, F)>, ExchangeError> {
        let stats = &self.stats;
        let eval = |&to: &ClusterId| -> Option<(ClusterId, F)> {
            if stats.marginal(side, to) + mass == 1 {
                return None;
            }
            match stats.delta_unchecked(side, profile, mass, from, to) {
                Ok(d) if d.is_finite() => Some((to, d)),
                _ => None,
            }
        };
        let pick = |a: Option<(ClusterId, F)>, b: Option<(ClusterId, F)>| match (a, b) {
            (None, x) | (x, None) => x,
            (Some(x), Some(y)) => {
                if y.1 > x.1 || (y.1 == x.1 && y.0 < x.0) {
                    Some(y)
                } else {
                    Some(x)
                }
            }
        };
        let best = match &self.pool {
            Some(pool) if targets.len() >= 64 => {
                pool.install(|| targets.par_iter().map(eval).reduce(|| None, pick))
            }
            _ => targets.iter().map(eval).fold(None, pick),
        };
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{count_ngrams, TokenStream};

    fn config(c: usize) -> ExchangeConfig {
        ExchangeConfig {
            c1: c,
            c2: c,
            min_count: 2,
            ..ExchangeConfig::default()
        }
    }

    #[test]
    fn validation() {
        assert!(config(1).validate().is_err());
        let mut c = config(3);
        c.min_count = 1;
        assert!(c.validate().is_err());
        let mut c = config(3);
        c.max_iterations = 0;
        assert!(c.validate().is_err());
        assert!(config(3).validate().is_ok());
    }

    #[test]
    fn initialisation_follows_frequency() {
        // column counts 9, 8, 7, 2, 2 for words 1..=5
        let mut t = CountTable::new(2).unwrap();
        for (w, n) in [(1, 9), (2, 8), (3, 7), (4, 2), (5, 2)] {
            t.add(&[6], w, n);
        }
        let g = ElementGraph::new(&t, 7);
        let cfg = ExchangeConfig {
            c1: 2,
            c2: 3,
            min_count: 5,
            ..ExchangeConfig::default()
        };
        let err = initialize(&g, &cfg).unwrap_err();
        assert_eq!(err, ExchangeError::TooFewElements { side: Side::Row, found: 1 });
        t.add(&[7], 1, 3);
        let g = ElementGraph::new(&t, 8);
        let a = initialize(&g, &cfg).unwrap();
        assert_eq!(&a.cols[1..6], &[0, 1, 2, 2, 2]);
    }

    #[test]
    fn residual_of_one_demotes_last_singleton() {
        let mut t = CountTable::new(2).unwrap();
        t.add(&[1], 1, 5);
        t.add(&[1], 2, 4);
        t.add(&[2], 3, 1);
        let g = ElementGraph::new(&t, 4);
        let cfg = ExchangeConfig {
            c1: 3,
            c2: 3,
            min_count: 2,
            ..ExchangeConfig::default()
        };
        let a = initialize(&g, &cfg).unwrap();
        // columns: 1 and 2 are clusterable, 3 alone would leave the residual at 1
        assert_eq!(&a.cols[1..], &[0, 2, 2]);
        let s = assignment_stats::<f64>(&g, &a, 3, 3, 0.75).unwrap();
        assert!(s.loo_criterion().is_ok());
    }

    #[test]
    fn identical_profiles_end_together() {
        // x and y are interchangeable: both follow a and precede b
        let text = [1, 2, 4, 1, 3, 4, 1, 2, 4, 1, 3, 4, 1, 2, 4, 1, 3, 4, 1, 2, 4, 1, 3, 4, 1];
        let t = count_ngrams(&TokenStream::new(text.to_vec()), 2).unwrap();
        let out = cluster::<f64>(&t, 5, &config(3), None).unwrap();
        assert!(out.trace.is_monotone());
        assert_eq!(out.trace.stop, StopReason::Converged);
        let g2 = &out.assignment.cols;
        assert_eq!(g2[2], g2[3]);
    }

    #[test]
    fn converged_clustering_is_a_fixed_point() {
        let text: Vec<u32> = (0..400u32).map(|i| (i * 7 + i / 3) % 9).collect();
        let t = count_ngrams(&TokenStream::new(text), 2).unwrap();
        let cfg = config(4);
        let first = cluster::<f64>(&t, 9, &cfg, None).unwrap();
        let graph = ElementGraph::new(&t, 9);
        let again = run_from::<f64>(&graph, first.assignment.clone(), &cfg, None).unwrap();
        assert_eq!(again.trace.records.len(), 2);
        assert_eq!(again.trace.records[1].moves, 0);
        assert_eq!(again.assignment, first.assignment);
    }

    #[test]
    fn trace_format() {
        let trace = ExchangeTrace {
            records: vec![IterationRecord {
                iteration: 0,
                criterion: -1.5f64,
                moves: 0,
                seconds: 0.0,
            }],
            stop: StopReason::Converged,
        };
        let mut buf = Vec::new();
        trace.write_tsv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0\t-1.5\t0\t0.000\n");
    }
}
