use nalgebra::DMatrix;
use patchdim::clustering::{
    distance_matrix, dual_rooted_mst_distance, dual_rooted_trees, eac_dc_similarity, laplacian_mds,
    root_pairs, spectral_cluster, SimilarityMatrix, Tree,
};
use patchdim::metrics::ari;
use patchdim::Error;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Smallest possible largest edge over all paths between `a` and `b`.
fn minimax(dist: &DMatrix<f64>, a: usize, b: usize) -> f64 {
    let n = dist.nrows();
    let mut m = dist.clone();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = m[(i, j)].min(m[(i, k)].max(m[(k, j)]));
            }
        }
    }
    m[(a, b)]
}

fn points(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, n, |_, _| rng.random_range(-1.0..1.0))
}

fn blobs(seed: u64, sizes: &[usize]) -> (DMatrix<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = sizes.iter().sum();
    let mut p = DMatrix::zeros(3, n);
    let mut labels = Vec::new();
    let mut col = 0;
    for (b, &s) in sizes.iter().enumerate() {
        for _ in 0..s {
            for d in 0..3 {
                p[(d, col)] =
                    rng.random_range(-0.5..0.5) + if d == 0 { 100.0 * b as f64 } else { 0.0 };
            }
            labels.push(b);
            col += 1;
        }
    }
    (p, labels)
}

/// Similarity with one dense random block per component.
fn component_similarity(rng: &mut ChaCha8Rng, labels: &[usize]) -> SimilarityMatrix<f64> {
    let n = labels.len();
    let mut s = DMatrix::identity(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if labels[i] == labels[j] {
                let v = rng.random_range(0.5..1.0);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
    }
    SimilarityMatrix::new(s).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hit_weight_is_the_minimax_distance(seed in any::<u64>(), n in 2usize..=8, dim in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = points(&mut rng, dim, n);
        let d = distance_matrix(&p);
        let a = rng.random_range(0..n);
        let b = (a + rng.random_range(1..n)) % n;
        let hit = dual_rooted_mst_distance(&p, a, b).unwrap();
        let want = minimax(&d, a, b);
        prop_assert!(hit >= want - 1e-12);
        prop_assert!(hit <= want + 1e-12);
        prop_assert_eq!(hit, dual_rooted_mst_distance(&p, b, a).unwrap());
    }

    #[test]
    fn trees_are_disjoint_and_contain_roots(seed in any::<u64>(), n in 2usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = points(&mut rng, 2, n);
        let t = dual_rooted_trees(&distance_matrix(&p), 0, n - 1).unwrap();
        prop_assert_eq!(t.owner[0], Some(Tree::A));
        prop_assert_eq!(t.owner[n - 1], Some(Tree::B));
    }

    #[test]
    fn components_are_recovered(seed in any::<u64>(), k in 2usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut labels = Vec::new();
        for c in 0..k {
            labels.extend(std::iter::repeat_n(c, rng.random_range(2..=8)));
        }
        labels.shuffle(&mut rng);
        prop_assume!(labels.len() <= 50);
        let sim = component_similarity(&mut rng, &labels);
        let got = spectral_cluster(&sim, None, seed).unwrap();
        prop_assert_eq!(got.k, k);
        prop_assert_eq!(ari(&got.labels, &labels).unwrap(), 1.0);
    }
}

#[test]
fn similarity_entries_have_denominator_r() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = points(&mut rng, 4, 12);
    for r in [1, 7, 66, 150] {
        let s = eac_dc_similarity(&p, Some(r), 5).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let scaled = s.values()[(i, j)] * r as f64;
                assert!((scaled - scaled.round()).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn blobs_separate_with_margin() {
    let (p, labels) = blobs(1, &[8, 7]);
    let s = eac_dc_similarity(&p, None, 11).unwrap();
    let n = labels.len();
    let mut within = f64::INFINITY;
    let mut across: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let v = s.values()[(i, j)];
            if labels[i] == labels[j] {
                within = within.min(v);
            } else {
                across = across.max(v);
            }
        }
    }
    assert!(within - across >= 0.5, "within {within} across {across}");
    let c = spectral_cluster(&s, None, 2).unwrap();
    assert_eq!(c.k, 2);
    assert_eq!(ari(&c.labels, &labels).unwrap(), 1.0);
}

#[test]
fn pipeline_is_deterministic() {
    let (p, _) = blobs(2, &[5, 5]);
    let a = eac_dc_similarity(&p, Some(40), 9).unwrap();
    assert_eq!(a, eac_dc_similarity(&p, Some(40), 9).unwrap());
    assert_eq!(
        spectral_cluster(&a, None, 1).unwrap(),
        spectral_cluster(&a, None, 1).unwrap()
    );
    assert_eq!(root_pairs(10, 30, 4), root_pairs(10, 30, 4));
    let two = eac_dc_similarity(&points(&mut ChaCha8Rng::seed_from_u64(0), 2, 2), None, 0).unwrap();
    assert_eq!(two.size(), 2);
    assert_eq!(two.values()[(0, 0)], 1.0);
}

#[test]
fn root_pairs_cover_all_pairs_before_repeating() {
    let pairs = root_pairs(6, 20, 1);
    assert_eq!(pairs.len(), 20);
    let mut first: Vec<_> = pairs[..15].to_vec();
    first.sort_unstable();
    first.dedup();
    assert_eq!(first.len(), 15);
    assert!(pairs.iter().all(|&(a, b)| a < b && b < 6));
}

#[test]
fn permuting_items_permutes_labels() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let labels = [0, 0, 1, 1, 1, 2, 2, 0, 2, 1];
    let sim = component_similarity(&mut rng, &labels);
    let base = spectral_cluster(&sim, None, 3).unwrap();
    let mut perm: Vec<usize> = (0..labels.len()).collect();
    perm.shuffle(&mut rng);
    let moved = SimilarityMatrix::new(DMatrix::from_fn(10, 10, |i, j| {
        sim.values()[(perm[i], perm[j])]
    }))
    .unwrap();
    let got = spectral_cluster(&moved, None, 3).unwrap();
    let pulled: Vec<usize> = perm.iter().map(|&p| base.labels[p]).collect();
    assert_eq!(ari(&got.labels, &pulled).unwrap(), 1.0);
}

#[test]
fn mds_separates_blocks_and_commutes_with_relabeling() {
    let labels = [0, 1, 0, 1, 1, 0, 0];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut s = component_similarity(&mut rng, &labels).values().clone();
    s[(0, 1)] = 0.05;
    s[(1, 0)] = 0.05;
    let sim = SimilarityMatrix::new(s.clone()).unwrap();
    let e = laplacian_mds(&sim, 1).unwrap();
    let side: Vec<bool> = (0..7).map(|i| e.coordinates[(i, 0)] > 0.0).collect();
    for i in 0..7 {
        assert_eq!(side[i] == side[0], labels[i] == labels[0]);
    }
    assert!(laplacian_mds(&sim, 6).is_ok());
    assert!(laplacian_mds(&sim, 7).is_err());

    let full = laplacian_mds(&sim, 6).unwrap();
    let perm = [3, 0, 6, 1, 5, 2, 4];
    let moved =
        SimilarityMatrix::new(DMatrix::from_fn(7, 7, |i, j| s[(perm[i], perm[j])])).unwrap();
    let other = laplacian_mds(&moved, 6).unwrap();
    for (a, b) in full.eigenvalues.iter().zip(&other.eigenvalues) {
        assert!((a - b).abs() < 1e-10);
    }
    // Pairwise distances between embedded items do not depend on labels.
    let dist = |e: &DMatrix<f64>, i: usize, j: usize| (e.row(i) - e.row(j)).norm();
    for i in 0..7 {
        for j in 0..7 {
            let want = dist(&full.coordinates, perm[i], perm[j]);
            assert!((dist(&other.coordinates, i, j) - want).abs() < 1e-9);
        }
    }
}

#[test]
fn identity_similarity_is_rejected() {
    let sim = SimilarityMatrix::new(DMatrix::<f64>::identity(4, 4)).unwrap();
    assert!(matches!(
        spectral_cluster(&sim, None, 0),
        Err(Error::IsolatedItem(0))
    ));
    assert!(SimilarityMatrix::new(DMatrix::from_element(2, 2, 2.0)).is_err());
}
