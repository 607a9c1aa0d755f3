#![allow(dead_code)]

use std::collections::HashMap;

use ngcf::{ClusterId, Clustering, CountTable, Side, TokenStream, WordId};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Skewed random token stream over ids `1..=vocab`.
pub fn random_stream(rng: &mut ChaCha8Rng, tokens: usize, vocab: u32) -> TokenStream {
    let ids = (0..tokens)
        .map(|_| {
            let u: f64 = rng.gen();
            1 + ((u * u * vocab as f64) as u32).min(vocab - 1)
        })
        .collect();
    TokenStream::new(ids)
}

/// Random total clustering of every row and column present in `counts`.
pub fn random_clustering(rng: &mut ChaCha8Rng, counts: &CountTable, c1: usize, c2: usize) -> Clustering {
    let mut g = Clustering::new(c1, c2);
    for (ctx, _) in counts.rows() {
        g.set_row(ctx.to_vec(), rng.gen_range(0..c1 as ClusterId)).unwrap();
    }
    for (w, _) in counts.cols() {
        g.set_col(w, rng.gen_range(0..c2 as ClusterId)).unwrap();
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    Row(Vec<WordId>),
    Col(WordId),
}

impl Element {
    pub fn side(&self) -> Side {
        match self {
            Element::Row(_) => Side::Row,
            Element::Col(_) => Side::Column,
        }
    }

    pub fn cluster(&self, g: &Clustering) -> ClusterId {
        match self {
            Element::Row(c) => g.row_cluster(c).unwrap(),
            Element::Col(w) => g.col_cluster(*w).unwrap(),
        }
    }

    pub fn moved(&self, g: &Clustering, to: ClusterId) -> Clustering {
        let mut g = g.clone();
        match self {
            Element::Row(c) => g.set_row(c.clone(), to).unwrap(),
            Element::Col(w) => g.set_col(*w, to).unwrap(),
        }
        g
    }
}

pub fn random_element(rng: &mut ChaCha8Rng, counts: &CountTable) -> Element {
    if rng.gen_bool(0.5) {
        let rows: Vec<_> = counts.rows().map(|(c, _)| c.to_vec()).collect();
        Element::Row(rows[rng.gen_range(0..rows.len())].clone())
    } else {
        let cols: Vec<_> = counts.cols().map(|(w, _)| w).collect();
        Element::Col(cols[rng.gen_range(0..cols.len())])
    }
}

/// Counts of `element` aggregated by the opposite side's clusters.
pub fn profile(counts: &CountTable, g: &Clustering, element: &Element) -> Vec<(ClusterId, u64)> {
    let mut acc: HashMap<ClusterId, u64> = HashMap::new();
    for (ctx, w, n) in counts.events() {
        match element {
            Element::Row(c) if c.as_slice() == ctx => {
                *acc.entry(g.col_cluster(w).unwrap()).or_default() += n;
            }
            Element::Col(x) if *x == w => {
                *acc.entry(g.row_cluster(ctx).unwrap()).or_default() += n;
            }
            _ => {}
        }
    }
    let mut v: Vec<_> = acc.into_iter().collect();
    v.sort();
    v
}

pub struct LiteralStats {
    pub pairs: HashMap<(ClusterId, ClusterId), u64>,
    pub rows: HashMap<ClusterId, u64>,
    pub cols: HashMap<ClusterId, u64>,
    pub grid: u64,
}

pub fn literal_stats(counts: &CountTable, g: &Clustering) -> LiteralStats {
    let mut s = LiteralStats {
        pairs: HashMap::new(),
        rows: HashMap::new(),
        cols: HashMap::new(),
        grid: (g.c1() * g.c2()) as u64,
    };
    for (ctx, w, n) in counts.events() {
        let (a, b) = (g.row_cluster(ctx).unwrap(), g.col_cluster(w).unwrap());
        *s.pairs.entry((a, b)).or_default() += n;
        *s.rows.entry(a).or_default() += n;
        *s.cols.entry(b).or_default() += n;
    }
    s
}

/// Direct transcription of the leaving-one-out criterion; `None` when a marginal is 1
/// or the once-seen term is undefined.
pub fn literal_loo(counts: &CountTable, g: &Clustering, b: f64) -> Option<f64> {
    let s = literal_stats(counts, g);
    if s.rows.values().chain(s.cols.values()).any(|&n| n == 1) {
        return None;
    }
    let n_plus = s.pairs.len() as f64;
    let n_zero = s.grid as f64 - n_plus;
    let n_one = s.pairs.values().filter(|&&n| n == 1).count() as f64;
    let mut f = 0.0;
    for &n in s.pairs.values() {
        if n > 1 {
            f += n as f64 * (n as f64 - 1.0 - b).ln();
        }
    }
    if n_one > 0.0 {
        if n_plus <= 1.0 {
            return None;
        }
        f += n_one * (b * (n_plus - 1.0) / (n_zero + 1.0)).ln();
    }
    for &n in s.rows.values().chain(s.cols.values()) {
        f -= n as f64 * (n as f64 - 1.0).ln();
    }
    Some(f)
}

pub fn literal_ml(counts: &CountTable, g: &Clustering) -> f64 {
    let s = literal_stats(counts, g);
    let nln = |n: u64| n as f64 * (n as f64).ln();
    s.pairs.values().map(|&n| nln(n)).sum::<f64>()
        - s.rows.values().map(|&n| nln(n)).sum::<f64>()
        - s.cols.values().map(|&n| nln(n)).sum::<f64>()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mean) * (b - mean)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mean).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - mean).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
