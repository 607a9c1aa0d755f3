//! Cluster-level sufficient statistics and the likelihood criteria built on them.
//!
//! Rows of the class-pair table are predictor clusters `g1` (contexts of `M` words),
//! columns are predicted-word clusters `g2`. All logarithms are natural.
//!
//! The leaving-one-out criterion is
//!
//! ```text
//! F = sum_{N(g1,g2) > 1} N(g1,g2) ln(N(g1,g2) - 1 - b)
//!   + n1 ln(b (n+ - 1) / (n0 + 1))
//!   - sum_g1 N(g1) ln(N(g1) - 1) - sum_g2 N(g2) ln(N(g2) - 1)
//! ```
//!
//! where `n+`, `n0`, `n1` count seen, unseen and once-seen cells over the full
//! configured `C1 x C2` grid (empty clusters included).

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::corpus::{Context, CorpusError, CountTable, Vocabulary, WordId};
use crate::scalar::{n_log_n, Real};

pub type ClusterId = u32;

/// Which side of the class-pair table an element belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// Predictor contexts, clustered by `G1`.
    Row,
    /// Predicted words, clustered by `G2`.
    Column,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Row => Side::Column,
            Side::Column => Side::Row,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CriterionError {
    #[error("context {0:?} has nonzero count but no row cluster")]
    UnassignedRow(Context),
    #[error("word {0} has nonzero count but no column cluster")]
    UnassignedColumn(WordId),
    #[error("cluster id {id} out of range for {side:?} side with {bound} clusters")]
    OutOfRange { side: Side, id: ClusterId, bound: usize },
    #[error("{side:?} cluster {cluster} has marginal 1; leaving-one-out needs at least 2")]
    SingletonMarginal { side: Side, cluster: ClusterId },
    #[error("degenerate statistics: {n_one} once-seen pairs but only {n_plus} seen pairs")]
    Degenerate { n_plus: u64, n_one: u64 },
    #[error("move would leave {side:?} cluster {cluster} with marginal 1")]
    Guard { side: Side, cluster: ClusterId },
    #[error("element profile does not match the current statistics")]
    InconsistentProfile,
    #[error("discount must lie in (0, 1), got {0}")]
    BadDiscount(f64),
}

/// Two total classification functions: `G1` over contexts and `G2` over words.
///
/// Elements without an explicit entry fall into the side's residual cluster, when
/// one is configured.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    c1: usize,
    c2: usize,
    rows: BTreeMap<Context, ClusterId>,
    row_residual: Option<ClusterId>,
    cols: BTreeMap<WordId, ClusterId>,
    col_residual: Option<ClusterId>,
}

impl Clustering {
    pub fn new(c1: usize, c2: usize) -> Self {
        Clustering {
            c1,
            c2,
            rows: BTreeMap::new(),
            row_residual: None,
            cols: BTreeMap::new(),
            col_residual: None,
        }
    }

    /// Ties `G1` and `G2` to one word clustering, the classic bigram setting.
    pub fn one_sided(words: &BTreeMap<WordId, ClusterId>, c: usize) -> Self {
        let mut g = Clustering::new(c, c);
        for (&w, &k) in words {
            g.rows.insert(vec![w], k);
            g.cols.insert(w, k);
        }
        g
    }

    pub fn c1(&self) -> usize {
        self.c1
    }

    pub fn c2(&self) -> usize {
        self.c2
    }

    pub fn set_row(&mut self, context: Context, cluster: ClusterId) -> Result<(), CriterionError> {
        check_bound(Side::Row, cluster, self.c1)?;
        self.rows.insert(context, cluster);
        Ok(())
    }

    pub fn set_col(&mut self, word: WordId, cluster: ClusterId) -> Result<(), CriterionError> {
        check_bound(Side::Column, cluster, self.c2)?;
        self.cols.insert(word, cluster);
        Ok(())
    }

    pub fn set_residuals(
        &mut self,
        row: Option<ClusterId>,
        col: Option<ClusterId>,
    ) -> Result<(), CriterionError> {
        if let Some(r) = row {
            check_bound(Side::Row, r, self.c1)?;
        }
        if let Some(c) = col {
            check_bound(Side::Column, c, self.c2)?;
        }
        self.row_residual = row;
        self.col_residual = col;
        Ok(())
    }

    pub fn row_residual(&self) -> Option<ClusterId> {
        self.row_residual
    }

    pub fn col_residual(&self) -> Option<ClusterId> {
        self.col_residual
    }

    pub fn row_cluster(&self, context: &[WordId]) -> Option<ClusterId> {
        self.rows.get(context).copied().or(self.row_residual)
    }

    pub fn col_cluster(&self, word: WordId) -> Option<ClusterId> {
        self.cols.get(&word).copied().or(self.col_residual)
    }

    /// Explicit row assignments in context order.
    pub fn row_assignments(&self) -> impl Iterator<Item = (&[WordId], ClusterId)> + '_ {
        self.rows.iter().map(|(c, &k)| (c.as_slice(), k))
    }

    /// Explicit column assignments in word-id order.
    pub fn col_assignments(&self) -> impl Iterator<Item = (WordId, ClusterId)> + '_ {
        self.cols.iter().map(|(&w, &k)| (w, k))
    }
}

/// Clustering files: a `#clusters<TAB>C<TAB>residual` header (`-` for no residual),
/// then `element<TAB>cluster` lines. Row elements are space-joined context words.
impl Clustering {
    pub fn write_side<W: Write>(&self, side: Side, mut out: W, vocab: &Vocabulary) -> std::io::Result<()> {
        let spell = |w: WordId| vocab.word(w).unwrap_or(crate::corpus::UNK_TOKEN).to_string();
        let (c, residual) = match side {
            Side::Row => (self.c1, self.row_residual),
            Side::Column => (self.c2, self.col_residual),
        };
        let residual = residual.map_or_else(|| "-".to_string(), |r| r.to_string());
        writeln!(out, "#clusters\t{c}\t{residual}")?;
        match side {
            Side::Row => {
                for (ctx, k) in self.row_assignments() {
                    let key: Vec<String> = ctx.iter().map(|&w| spell(w)).collect();
                    writeln!(out, "{}\t{k}", key.join(" "))?;
                }
            }
            Side::Column => {
                for (w, k) in self.col_assignments() {
                    writeln!(out, "{}\t{k}", spell(w))?;
                }
            }
        }
        Ok(())
    }

    /// Reads a row file and a column file written by [`Clustering::write_side`].
    pub fn read_files<R1: BufRead, R2: BufRead>(
        rows: R1,
        cols: R2,
        vocab: &Vocabulary,
    ) -> Result<Self, CorpusError> {
        let (c1, row_residual, row_lines) = read_side(rows)?;
        let (c2, col_residual, col_lines) = read_side(cols)?;
        let mut g = Clustering::new(c1, c2);
        let bad = |line: usize, e: CriterionError| CorpusError::Parse {
            line,
            message: e.to_string(),
        };
        g.set_residuals(row_residual, col_residual).map_err(|e| bad(1, e))?;
        let mut width = None;
        for (line, key, k) in row_lines {
            let ctx: Context = key.split(' ').map(|w| vocab.id_or_unk(w)).collect();
            if *width.get_or_insert(ctx.len()) != ctx.len() {
                return Err(CorpusError::Parse {
                    line,
                    message: "contexts of different lengths".into(),
                });
            }
            g.set_row(ctx, k).map_err(|e| bad(line, e))?;
        }
        for (line, key, k) in col_lines {
            g.set_col(vocab.id_or_unk(&key), k).map_err(|e| bad(line, e))?;
        }
        Ok(g)
    }
}

type SideLines = (usize, Option<ClusterId>, Vec<(usize, String, ClusterId)>);

fn read_side<R: BufRead>(input: R) -> Result<SideLines, CorpusError> {
    let parse = |line: usize, message: &str| CorpusError::Parse {
        line,
        message: message.to_string(),
    };
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| parse(1, "empty clustering file"))??;
    let fields: Vec<&str> = header.split('\t').collect();
    let (c, residual) = match fields[..] {
        ["#clusters", c, r] => {
            let c: usize = c.parse().map_err(|_| parse(1, "bad cluster count"))?;
            let r = match r {
                "-" => None,
                r => Some(r.parse().map_err(|_| parse(1, "bad residual id"))?),
            };
            (c, r)
        }
        _ => return Err(parse(1, "expected #clusters<TAB>C<TAB>residual header")),
    };
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let n = i + 2;
        if line.is_empty() {
            continue;
        }
        let (key, k) = line
            .rsplit_once('\t')
            .ok_or_else(|| parse(n, "expected element<TAB>cluster"))?;
        let k: ClusterId = k.parse().map_err(|_| parse(n, "bad cluster id"))?;
        out.push((n, key.to_string(), k));
    }
    Ok((c, residual, out))
}

fn check_bound(side: Side, id: ClusterId, bound: usize) -> Result<(), CriterionError> {
    if (id as usize) < bound {
        Ok(())
    } else {
        Err(CriterionError::OutOfRange { side, id, bound })
    }
}

/// Class-pair counts `N(g1,g2)` on the configured `C1 x C2` grid, with marginals and
/// the seen/unseen/once-seen cell counts.
///
/// The grid is stored densely; zero cells are the "unseen" pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStats<F> {
    c1: usize,
    c2: usize,
    pair: Vec<u64>,
    row: Vec<u64>,
    col: Vec<u64>,
    total: u64,
    n_plus: u64,
    n_one: u64,
    b: F,
}

impl<F: Real> ClusterStats<F> {
    pub fn empty(c1: usize, c2: usize, b: F) -> Result<Self, CriterionError> {
        if !(b > F::zero() && b < F::one()) {
            return Err(CriterionError::BadDiscount(b.to_f64_lossy()));
        }
        Ok(ClusterStats {
            c1,
            c2,
            pair: vec![0; c1 * c2],
            row: vec![0; c1],
            col: vec![0; c2],
            total: 0,
            n_plus: 0,
            n_one: 0,
            b,
        })
    }

    /// Aggregates word-level counts through the clustering.
    pub fn build(counts: &CountTable, clustering: &Clustering, b: F) -> Result<Self, CriterionError> {
        let mut stats = Self::empty(clustering.c1, clustering.c2, b)?;
        for (ctx, w, n) in counts.events() {
            let g1 = clustering
                .row_cluster(ctx)
                .ok_or_else(|| CriterionError::UnassignedRow(ctx.to_vec()))?;
            let g2 = clustering
                .col_cluster(w)
                .ok_or(CriterionError::UnassignedColumn(w))?;
            check_bound(Side::Row, g1, stats.c1)?;
            check_bound(Side::Column, g2, stats.c2)?;
            stats.add(g1, g2, n);
        }
        Ok(stats)
    }

    /// Adds `n` events to cell `(g1, g2)`, keeping all scalars consistent.
    pub fn add(&mut self, g1: ClusterId, g2: ClusterId, n: u64) {
        if n == 0 {
            return;
        }
        let i = self.cell(g1, g2);
        let old = self.pair[i];
        self.set_cell(i, old + n);
        self.row[g1 as usize] += n;
        self.col[g2 as usize] += n;
        self.total += n;
    }

    fn cell(&self, g1: ClusterId, g2: ClusterId) -> usize {
        g1 as usize * self.c2 + g2 as usize
    }

    fn set_cell(&mut self, i: usize, new: u64) {
        let old = self.pair[i];
        self.n_plus = self.n_plus + u64::from(new > 0) - u64::from(old > 0);
        self.n_one = self.n_one + u64::from(new == 1) - u64::from(old == 1);
        self.pair[i] = new;
    }

    pub fn c1(&self) -> usize {
        self.c1
    }

    pub fn c2(&self) -> usize {
        self.c2
    }

    pub fn b(&self) -> F {
        self.b
    }

    pub fn pair(&self, g1: ClusterId, g2: ClusterId) -> u64 {
        self.pair[self.cell(g1, g2)]
    }

    pub fn row_marginal(&self, g1: ClusterId) -> u64 {
        self.row[g1 as usize]
    }

    pub fn col_marginal(&self, g2: ClusterId) -> u64 {
        self.col[g2 as usize]
    }

    pub fn marginal(&self, side: Side, g: ClusterId) -> u64 {
        match side {
            Side::Row => self.row[g as usize],
            Side::Column => self.col[g as usize],
        }
    }

    /// Number of clusters on `side`.
    pub fn clusters(&self, side: Side) -> usize {
        match side {
            Side::Row => self.c1,
            Side::Column => self.c2,
        }
    }

    /// `N(own, opposite)` read from the point of view of `side`.
    pub fn oriented(&self, side: Side, own: ClusterId, opposite: ClusterId) -> u64 {
        match side {
            Side::Row => self.pair(own, opposite),
            Side::Column => self.pair(opposite, own),
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn n_plus(&self) -> u64 {
        self.n_plus
    }

    pub fn n_zero(&self) -> u64 {
        (self.c1 * self.c2) as u64 - self.n_plus
    }

    pub fn n_one(&self) -> u64 {
        self.n_one
    }

    /// Nonzero cells in row-major order.
    pub fn seen_pairs(&self) -> impl Iterator<Item = (ClusterId, ClusterId, u64)> + '_ {
        let c2 = self.c2;
        self.pair
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(move |(i, &n)| ((i / c2) as ClusterId, (i % c2) as ClusterId, n))
    }

    /// Maximum-likelihood criterion `sum N ln N - sum N(g1) ln N(g1) - sum N(g2) ln N(g2)`.
    pub fn ml_criterion(&self) -> F {
        let pairs: F = self.pair.iter().map(|&n| n_log_n::<F>(n)).sum();
        let rows: F = self.row.iter().map(|&n| n_log_n::<F>(n)).sum();
        let cols: F = self.col.iter().map(|&n| n_log_n::<F>(n)).sum();
        pairs - rows - cols
    }

    /// Leaving-one-out criterion; requires every nonempty cluster to have marginal >= 2.
    pub fn loo_criterion(&self) -> Result<F, CriterionError> {
        for (g, &n) in self.row.iter().enumerate() {
            if n == 1 {
                return Err(CriterionError::SingletonMarginal {
                    side: Side::Row,
                    cluster: g as ClusterId,
                });
            }
        }
        for (g, &n) in self.col.iter().enumerate() {
            if n == 1 {
                return Err(CriterionError::SingletonMarginal {
                    side: Side::Column,
                    cluster: g as ClusterId,
                });
            }
        }
        let pairs: F = self.pair.iter().map(|&n| self.pair_term(n)).sum();
        let rows: F = self.row.iter().map(|&n| marginal_term::<F>(n)).sum();
        let cols: F = self.col.iter().map(|&n| marginal_term::<F>(n)).sum();
        let once = self.once_term(self.n_plus, self.n_one)?;
        Ok(pairs + once - rows - cols)
    }

    fn pair_term(&self, n: u64) -> F {
        if n > 1 {
            F::count(n) * (F::count(n - 1) - self.b).ln()
        } else {
            F::zero()
        }
    }

    fn once_term(&self, n_plus: u64, n_one: u64) -> Result<F, CriterionError> {
        if n_one == 0 {
            return Ok(F::zero());
        }
        if n_plus <= 1 {
            return Err(CriterionError::Degenerate { n_plus, n_one });
        }
        let n_zero = (self.c1 * self.c2) as u64 - n_plus;
        let ratio = self.b * F::count(n_plus - 1) / F::count(n_zero + 1);
        Ok(F::count(n_one) * ratio.ln())
    }

    fn check_move(
        &self,
        side: Side,
        profile: &[(ClusterId, u64)],
        from: ClusterId,
        to: ClusterId,
    ) -> Result<u64, CriterionError> {
        check_bound(side, from, self.clusters(side))?;
        check_bound(side, to, self.clusters(side))?;
        let opp = self.clusters(side.opposite());
        let mut mass = 0u64;
        for &(g, k) in profile {
            if g as usize >= opp || self.oriented(side, from, g) < k {
                return Err(CriterionError::InconsistentProfile);
            }
            mass += k;
        }
        let from_m = self.marginal(side, from);
        if from_m < mass {
            return Err(CriterionError::InconsistentProfile);
        }
        if from_m - mass == 1 {
            return Err(CriterionError::Guard { side, cluster: from });
        }
        if self.marginal(side, to) + mass == 1 {
            return Err(CriterionError::Guard { side, cluster: to });
        }
        Ok(mass)
    }

    /// Whether an element of marginal `mass` may leave `from` without leaving it at 1.
    pub fn can_leave(&self, side: Side, from: ClusterId, mass: u64) -> bool {
        self.marginal(side, from).checked_sub(mass) != Some(1)
    }

    /// Change in the leaving-one-out criterion if an element with the given profile
    /// moves from `from` to `to`.
    ///
    /// `profile` lists the element's counts aggregated by the opposite side's clusters
    /// (distinct ids, no zero entries needed). Cost is linear in the profile length.
    pub fn delta_move(
        &self,
        side: Side,
        profile: &[(ClusterId, u64)],
        from: ClusterId,
        to: ClusterId,
    ) -> Result<F, CriterionError> {
        if from == to {
            return Ok(F::zero());
        }
        let mass = self.check_move(side, profile, from, to)?;
        self.delta_unchecked(side, profile, mass, from, to)
    }

    /// [`ClusterStats::delta_move`] without the consistency checks; the caller guarantees
    /// `from != to`, a valid profile and a legal move.
    pub(crate) fn delta_unchecked(
        &self,
        side: Side,
        profile: &[(ClusterId, u64)],
        mass: u64,
        from: ClusterId,
        to: ClusterId,
    ) -> Result<F, CriterionError> {
        let mut delta = F::zero();
        let mut n_plus = self.n_plus as i64;
        let mut n_one = self.n_one as i64;
        for &(g, k) in profile {
            if k == 0 {
                continue;
            }
            let a = self.oriented(side, from, g);
            let c = self.oriented(side, to, g);
            let (a2, c2) = (a - k, c + k);
            delta = delta + self.pair_term(a2) - self.pair_term(a) + self.pair_term(c2)
                - self.pair_term(c);
            n_plus += i64::from(a2 > 0) - i64::from(a > 0) + i64::from(c2 > 0) - i64::from(c > 0);
            n_one += i64::from(a2 == 1) - i64::from(a == 1) + i64::from(c2 == 1) - i64::from(c == 1);
        }
        let from_m = self.marginal(side, from);
        let to_m = self.marginal(side, to);
        delta = delta - marginal_term::<F>(from_m - mass) + marginal_term::<F>(from_m)
            - marginal_term::<F>(to_m + mass)
            + marginal_term::<F>(to_m);
        let once_new = self.once_term(n_plus as u64, n_one as u64)?;
        let once_old = self.once_term(self.n_plus, self.n_one)?;
        Ok(delta + once_new - once_old)
    }

    /// Commits the move evaluated by [`ClusterStats::delta_move`].
    pub fn apply_move(
        &mut self,
        side: Side,
        profile: &[(ClusterId, u64)],
        from: ClusterId,
        to: ClusterId,
    ) -> Result<(), CriterionError> {
        if from == to {
            return Ok(());
        }
        let mass = self.check_move(side, profile, from, to)?;
        self.apply_unchecked(side, profile, mass, from, to);
        Ok(())
    }

    pub(crate) fn apply_unchecked(
        &mut self,
        side: Side,
        profile: &[(ClusterId, u64)],
        mass: u64,
        from: ClusterId,
        to: ClusterId,
    ) {
        for &(g, k) in profile {
            if k == 0 {
                continue;
            }
            let (src, dst) = match side {
                Side::Row => (self.cell(from, g), self.cell(to, g)),
                Side::Column => (self.cell(g, from), self.cell(g, to)),
            };
            let a = self.pair[src];
            let c = self.pair[dst];
            self.set_cell(src, a - k);
            self.set_cell(dst, c + k);
        }
        let marg = match side {
            Side::Row => &mut self.row,
            Side::Column => &mut self.col,
        };
        marg[from as usize] -= mass;
        marg[to as usize] += mass;
    }

    /// Diagnostic dump, `g1<TAB>g2<TAB>count` per nonzero cell.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (g1, g2, n) in self.seen_pairs() {
            writeln!(out, "{g1}\t{g2}\t{n}")?;
        }
        Ok(())
    }
}

/// `n ln(n - 1)`, zero for empty clusters. Callers exclude `n == 1`.
fn marginal_term<F: Real>(n: u64) -> F {
    if n > 1 {
        F::count(n) * F::count(n - 1).ln()
    } else {
        F::zero()
    }
}
