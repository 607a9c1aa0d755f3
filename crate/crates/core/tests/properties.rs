mod common;

use std::collections::BTreeMap;

use common::*;
use ngcf::models::LanguageModel;
use ngcf::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn table(ids: &[u32], order: usize) -> CountTable {
    count_ngrams(&TokenStream::new(ids.to_vec()), order).unwrap()
}

fn ids_strategy(max_len: usize, vocab: u32) -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(1..=vocab, 3..max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn merge_is_commutative_and_associative(
        a in ids_strategy(60, 8), b in ids_strategy(60, 8), c in ids_strategy(60, 8), order in 2usize..4,
    ) {
        let (a, b, c) = (table(&a, order), table(&b, order), table(&c, order));
        let ab = merge_counts(&[a.clone(), b.clone()]).unwrap();
        let ba = merge_counts(&[b.clone(), a.clone()]).unwrap();
        prop_assert_eq!(&ab, &ba);
        let left = merge_counts(&[ab, c.clone()]).unwrap();
        let right = merge_counts(&[a, merge_counts(&[b, c]).unwrap()]).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn criteria_match_literal_formulas(seed in any::<u64>(), order in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let counts = count_ngrams(&random_stream(&mut rng, 400, 25), order).unwrap();
        let (c1, c2) = (rng.gen_range(2..8), rng.gen_range(2..8));
        let g = random_clustering(&mut rng, &counts, c1, c2);
        let stats = Stats::build(&counts, &g, 0.75).unwrap();
        prop_assert!((stats.ml_criterion() - literal_ml(&counts, &g)).abs() < 1e-9);
        match (stats.loo_criterion(), literal_loo(&counts, &g, 0.75)) {
            (Ok(a), Some(b)) => prop_assert!((a - b).abs() < 1e-9),
            (Err(_), None) => {}
            (a, b) => prop_assert!(false, "library {:?} vs literal {:?}", a, b),
        }
        let lit = literal_stats(&counts, &g);
        prop_assert_eq!(stats.n_plus(), lit.pairs.len() as u64);
        prop_assert_eq!(stats.n_one(), lit.pairs.values().filter(|&&n| n == 1).count() as u64);
        prop_assert_eq!(stats.n_plus() + stats.n_zero(), (c1 * c2) as u64);
    }

    #[test]
    fn relabelling_clusters_preserves_criteria(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let counts = count_ngrams(&random_stream(&mut rng, 300, 20), 2).unwrap();
        let g = random_clustering(&mut rng, &counts, 5, 4);
        let mut relabelled = Clustering::new(5, 4);
        for (ctx, k) in g.row_assignments() {
            relabelled.set_row(ctx.to_vec(), 4 - k).unwrap();
        }
        for (w, k) in g.col_assignments() {
            relabelled.set_col(w, (k + 1) % 4).unwrap();
        }
        let a = Stats::build(&counts, &g, 0.75).unwrap();
        let b = Stats::build(&counts, &relabelled, 0.75).unwrap();
        prop_assert!((a.ml_criterion() - b.ml_criterion()).abs() < 1e-9);
        if let (Ok(x), Ok(y)) = (a.loo_criterion(), b.loo_criterion()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn apply_matches_rebuild_and_reverses(seed in any::<u64>(), order in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let counts = count_ngrams(&random_stream(&mut rng, 500, 30), order).unwrap();
        let (c1, c2) = (rng.gen_range(2..7), rng.gen_range(2..7));
        let mut g = random_clustering(&mut rng, &counts, c1, c2);
        let mut stats = Stats::build(&counts, &g, 0.75).unwrap();
        // undoing a move revisits earlier states, so the start must itself be legal
        prop_assume!((0..c1 as ClusterId).all(|k| stats.row_marginal(k) != 1));
        prop_assume!((0..c2 as ClusterId).all(|k| stats.col_marginal(k) != 1));
        let original = stats.clone();
        let mut history = Vec::new();
        for _ in 0..100 {
            let e = random_element(&mut rng, &counts);
            let from = e.cluster(&g);
            let bound = if e.side() == Side::Row { c1 } else { c2 };
            let to = rng.gen_range(0..bound as ClusterId);
            let p = profile(&counts, &g, &e);
            if stats.apply_move(e.side(), &p, from, to).is_ok() {
                g = e.moved(&g, to);
                history.push((e, from, to));
            }
        }
        prop_assert_eq!(&stats, &Stats::build(&counts, &g, 0.75).unwrap());
        let lit = literal_stats(&counts, &g);
        prop_assert_eq!(stats.n_plus(), lit.pairs.len() as u64);
        prop_assert_eq!(stats.n_one(), lit.pairs.values().filter(|&&n| n == 1).count() as u64);
        prop_assert_eq!(stats.total(), counts.total());

        while let Some((e, from, to)) = history.pop() {
            let p = profile(&counts, &g, &e);
            stats.apply_move(e.side(), &p, to, from).unwrap();
            g = e.moved(&g, from);
        }
        prop_assert_eq!(stats, original);
    }

    #[test]
    fn delta_matches_literal_recompute(seed in any::<u64>(), order in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let counts = count_ngrams(&random_stream(&mut rng, 500, 25), order).unwrap();
        let (c1, c2) = (rng.gen_range(2..7), rng.gen_range(2..7));
        let g = random_clustering(&mut rng, &counts, c1, c2);
        let stats = Stats::build(&counts, &g, 0.75).unwrap();
        for _ in 0..20 {
            let e = random_element(&mut rng, &counts);
            let from = e.cluster(&g);
            let bound = if e.side() == Side::Row { c1 } else { c2 };
            let to = rng.gen_range(0..bound as ClusterId);
            let p = profile(&counts, &g, &e);
            let before = literal_loo(&counts, &g, 0.75);
            let after = literal_loo(&counts, &e.moved(&g, to), 0.75);
            if let (Ok(d), Some(x), Some(y)) = (stats.delta_move(e.side(), &p, from, to), before, after) {
                prop_assert!((d - (y - x)).abs() < 1e-8 * (1.0 + x.abs()), "{} vs {}", d, y - x);
            }
        }
    }

    #[test]
    fn delta_is_antisymmetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let counts = count_ngrams(&random_stream(&mut rng, 600, 20), 2).unwrap();
        let g = random_clustering(&mut rng, &counts, 4, 4);
        let mut stats = Stats::build(&counts, &g, 0.75).unwrap();
        let e = random_element(&mut rng, &counts);
        let from = e.cluster(&g);
        let to = (from + 1) % 4;
        let p = profile(&counts, &g, &e);
        prop_assert_eq!(stats.delta_move(e.side(), &p, from, from).unwrap(), 0.0);
        if let Ok(forward) = stats.delta_move(e.side(), &p, from, to) {
            stats.apply_move(e.side(), &p, from, to).unwrap();
            if let Ok(back) = stats.delta_move(e.side(), &p, to, from) {
                prop_assert!((forward + back).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn f32_delta_tracks_f64(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let counts = count_ngrams(&random_stream(&mut rng, 800, 30), 2).unwrap();
        let g = random_clustering(&mut rng, &counts, 5, 5);
        let s64 = Stats::build(&counts, &g, 0.75).unwrap();
        let s32 = Stats32::build(&counts, &g, 0.75).unwrap();
        let e = random_element(&mut rng, &counts);
        let from = e.cluster(&g);
        let p = profile(&counts, &g, &e);
        if let (Ok(a), Ok(b)) = (s64.delta_move(e.side(), &p, from, (from + 2) % 5), s32.delta_move(e.side(), &p, from, (from + 2) % 5)) {
            prop_assert!((a - b as f64).abs() <= 1e-3 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn one_sided_wrapper_matches_generic_path(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let counts = count_ngrams(&random_stream(&mut rng, 400, 15), 2).unwrap();
        let mut words = BTreeMap::new();
        for w in 0..=15u32 {
            words.insert(w, rng.gen_range(0..4));
        }
        let one = Clustering::one_sided(&words, 4);
        let mut generic = Clustering::new(4, 4);
        for (&w, &k) in &words {
            generic.set_row(vec![w], k).unwrap();
            generic.set_col(w, k).unwrap();
        }
        let a = Stats::build(&counts, &one, 0.75).unwrap();
        let b = Stats::build(&counts, &generic, 0.75).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.loo_criterion().ok(), b.loo_criterion().ok());
    }

    #[test]
    fn backoff_rows_sum_to_one(seed in any::<u64>(), cutoff in 1u64..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = 20u32;
        let counts = count_ngrams(&random_stream(&mut rng, 500, v - 1), 2).unwrap();
        let lm = BackoffModel::build(&counts, cutoff, v as usize).unwrap();
        for h in 0..v {
            let s: f64 = (0..v).map(|w| lm.prob(&[h], w).unwrap()).sum();
            prop_assert!((s - 1.0).abs() < 1e-9, "history {}: {}", h, s);
            prop_assert!(lm.backoff_mass(h) > 0.0);
        }
    }

    #[test]
    fn clustered_rows_sum_to_one(seed in any::<u64>(), order in 2usize..4, fixed in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = 15u32;
        let counts = count_ngrams(&random_stream(&mut rng, 400, v - 1), order).unwrap();
        let mut g = random_clustering(&mut rng, &counts, 4, 3);
        g.set_residuals(Some(3), Some(2)).unwrap();
        let discount = if fixed { Discount::Fixed(0.75) } else { Discount::Adaptive };
        let lm = ClusteredModel::build(&counts, &g, v as usize, discount).unwrap();
        for _ in 0..10 {
            let h: Vec<u32> = (0..order - 1).map(|_| rng.gen_range(0..v)).collect();
            match (0..v).map(|w| lm.prob(&h, w)).collect::<Result<Vec<f64>, _>>() {
                Ok(p) => {
                    prop_assert!(p.iter().all(|&x| x > 0.0 || !fixed));
                    prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                }
                Err(e) => prop_assert!(matches!(e, ModelError::UnreachableRow(_)), "{}", e),
            }
        }
    }

    #[test]
    fn perplexity_is_invariant_under_id_permutation(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = 12u32;
        let train = random_stream(&mut rng, 300, v - 1);
        let test = random_stream(&mut rng, 80, v - 1);
        // permutation of 1..v; the unknown id 0 stays fixed
        let mut perm: Vec<u32> = (1..v).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let map = |s: &TokenStream| TokenStream::new(s.ids().iter().map(|&w| if w == 0 { 0 } else { perm[w as usize - 1] }).collect());
        let pp = |train: &TokenStream, test: &TokenStream| {
            let counts = count_ngrams(train, 2).unwrap();
            let lm = BackoffModel::build(&counts, 1, v as usize).unwrap();
            perplexity(&lm, test, true).unwrap().perplexity
        };
        let a = pp(&train, &test);
        let b = pp(&map(&train), &map(&test));
        prop_assert!((a - b).abs() < 1e-9 * a);
    }
}
