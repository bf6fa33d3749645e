//! Property-based invariants over randomized inputs.

use num_complex::Complex64;
use proptest::prelude::*;

use sdgcn::graph::{
    parse_edge_list, random_signed_digraph, sample_training_batch, split_edges, EdgeListFormat,
};
use sdgcn::linalg::{ComplexMatrix, SparseComplexMatrix};
use sdgcn::metrics::auc;
use sdgcn::spectral::{hermitian_adjacency, PhaseParams};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edge_list_round_trips(num_nodes in 5usize..40, edge_prob in 0.05f64..0.5,
                             neg_prob in 0.0f64..1.0, seed in 0u64..1000) {
        let g = random_signed_digraph(num_nodes, edge_prob, neg_prob, seed);
        prop_assume!(!g.edges.is_empty());
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let (parsed, stats) =
            parse_edge_list(std::io::Cursor::new(buf), EdgeListFormat::Whitespace).unwrap();
        prop_assert_eq!(stats.duplicates, 0);
        prop_assert_eq!(stats.self_loops, 0);
        // dense ids follow first appearance, so compare through original ids
        let restore = |g: &sdgcn::graph::SignedDigraph| -> Vec<(u64, u64, i8)> {
            g.edges
                .iter()
                .map(|e| (g.original_ids[e.source], g.original_ids[e.target], e.sign))
                .collect()
        };
        prop_assert_eq!(restore(&parsed), restore(&g));
    }

    #[test]
    fn split_partitions_every_edge(num_nodes in 10usize..40, seed in 0u64..1000) {
        let g = random_signed_digraph(num_nodes, 0.3, 0.4, seed);
        prop_assume!(g.positive_count() >= 5 && g.negative_count() >= 5);
        let split = split_edges(&g, seed, (0.6, 0.2, 0.2)).unwrap();
        let mut all: Vec<usize> = split
            .train
            .iter()
            .chain(&split.validation)
            .chain(&split.test)
            .copied()
            .collect();
        all.sort_unstable();
        let expected: Vec<usize> = (0..g.edges.len()).collect();
        prop_assert_eq!(all, expected, "split must partition the edge index set");
        // per-sign sizes within one of the exact ratio
        for positive in [true, false] {
            let class_total = g.edges.iter().filter(|e| (e.sign > 0) == positive).count() as f64;
            for (part, ratio) in [(&split.train, 0.6), (&split.validation, 0.2), (&split.test, 0.2)] {
                let got = part
                    .iter()
                    .filter(|&&i| (g.edges[i].sign > 0) == positive)
                    .count() as f64;
                prop_assert!((got - ratio * class_total).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn sampled_batch_is_contained_and_balanced(num_nodes in 10usize..40, seed in 0u64..500,
                                               epoch in 0u64..50, ratio in 0.5f64..6.0) {
        let g = random_signed_digraph(num_nodes, 0.3, 0.4, seed);
        prop_assume!(g.positive_count() >= 5 && g.negative_count() >= 5);
        let split = split_edges(&g, seed, (0.6, 0.2, 0.2)).unwrap();
        let batch = sample_training_batch(&g, &split, ratio, seed, epoch);
        let train: std::collections::HashSet<_> = split.train_edges(&g).into_iter().collect();
        prop_assert!(batch.edges.iter().all(|e| train.contains(e)));
        let neg_train = train.iter().filter(|e| e.sign < 0).count();
        let pos_train = train.iter().filter(|e| e.sign > 0).count();
        let neg_batch = batch.edges.iter().filter(|e| e.sign < 0).count();
        let pos_batch = batch.edges.iter().filter(|e| e.sign > 0).count();
        prop_assert_eq!(neg_batch, neg_train, "every negative training edge is kept");
        let want = (ratio * neg_train as f64).ceil() as usize;
        prop_assert_eq!(pos_batch, want.min(pos_train));
    }

    #[test]
    fn hermitian_adjacency_is_hermitian_with_bounded_entries(
        num_nodes in 4usize..30, seed in 0u64..1000, q_frac in 0.0f64..0.5) {
        let g = random_signed_digraph(num_nodes, 0.3, 0.4, seed);
        prop_assume!(!g.edges.is_empty());
        let params = PhaseParams::new(q_frac * std::f64::consts::PI).unwrap();
        let h = hermitian_adjacency(&g, &params);
        prop_assert!(h.matrix.hermitian_deviation().unwrap() <= 1e-12);
        for (_, _, v) in h.matrix.iter() {
            // |H(u,v)| = A_s(u,v) up to the epsilon stabilizer
            let m = v.norm();
            prop_assert!((m - 0.5).abs() < 1e-9 || (m - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sparse_matmul_matches_dense_bitwise(rows in 1usize..12, cols in 1usize..12,
                                           inner in 1usize..12, seed in 0u64..1000) {
        let mut state = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut triplets = Vec::new();
        for i in 0..rows {
            for j in 0..inner {
                if next() > 0.3 {
                    triplets.push((i, j, Complex64::new(next(), next())));
                }
            }
        }
        let sparse = SparseComplexMatrix::from_triplets(rows, inner, triplets);
        let dense_b = ComplexMatrix::from_fn(inner, cols, |_, _| Complex64::new(next(), next()));
        let via_sparse = sparse.matmul_dense(&dense_b).unwrap();
        let via_dense = sparse.to_dense().matmul(&dense_b).unwrap();
        // identical summation order makes the two paths agree bitwise
        prop_assert_eq!(via_sparse.data(), via_dense.data());
    }

    #[test]
    fn auc_bounds_and_monotone_invariance(
        scores in prop::collection::vec(-10.0f64..10.0, 4..40), seed in 0u64..100) {
        let labels: Vec<bool> = scores
            .iter()
            .enumerate()
            .map(|(i, _)| (i as u64).wrapping_mul(seed + 7) % 3 != 0)
            .collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let base = auc(&scores, &labels).unwrap();
        prop_assert!((0.0..=1.0).contains(&base));
        let transformed: Vec<f64> = scores.iter().map(|s| (s / 4.0).tanh() * 3.0 + 1.0).collect();
        let t = auc(&transformed, &labels).unwrap();
        prop_assert!((base - t).abs() < 1e-12);
    }
}
