use std::collections::BTreeSet;

use kurev::cluster::{
    diff_values, distance_matrix, gini, kmeans, median_silhouette, pca_reduce, quartiles, select_k,
    silhouettes_from_distances, wcss, ClusterError, Clustering, Pca,
};
use kurev::ku::{KuId, KU_COUNT};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rows(data: &DMatrix<f64>) -> Vec<Vec<f64>> {
    data.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn blob(rng: &mut ChaCha8Rng, centre: (f64, f64), spread: f64, n: usize, out: &mut Vec<f64>) {
    for _ in 0..n {
        out.push(centre.0 + rng.gen_range(-spread..=spread));
        out.push(centre.1 + rng.gen_range(-spread..=spread));
    }
}

fn points(centres: &[(f64, f64)], spread: f64, n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = Vec::new();
    for &c in centres {
        blob(&mut rng, c, spread, n, &mut v);
    }
    DMatrix::from_row_slice(v.len() / 2, 2, &v)
}

#[test]
fn pca_examples() {
    // Points on one line through 28-space need a single component.
    let dir: Vec<f64> = (0..KU_COUNT).map(|j| (j + 1) as f64).collect();
    let line = DMatrix::from_fn(10, KU_COUNT, |i, j| i as f64 * dir[j]);
    let (_, reduced) = pca_reduce(&line, 0.95).unwrap();
    assert_eq!(reduced.ncols(), 1);

    // ±e_i rows give equal eigenvalues: 27 of 28 components reach 95%.
    let iso = DMatrix::from_fn(2 * KU_COUNT, KU_COUNT, |i, j| {
        if i % KU_COUNT == j {
            if i < KU_COUNT {
                1.0
            } else {
                -1.0
            }
        } else {
            0.0
        }
    });
    let pca = Pca::fit(&iso).unwrap();
    assert_eq!(pca.components_for(0.95).unwrap(), 27);

    let flat = DMatrix::from_element(5, KU_COUNT, 0.3);
    assert!(matches!(Pca::fit(&flat), Err(ClusterError::Degenerate)));
}

#[test]
fn kmeans_examples() {
    let pairs = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.1, 0.0, 50.0, 50.0, 50.1, 50.0]);
    let c = kmeans(&pairs, 2, 3, 300).unwrap();
    assert_eq!(c.labels[0], c.labels[1]);
    assert_eq!(c.labels[2], c.labels[3]);
    assert_ne!(c.labels[0], c.labels[2]);

    let same = DMatrix::from_element(6, 2, 1.0);
    let c = kmeans(&same, 2, 0, 300).unwrap();
    assert_eq!(c.labels.len(), 6);
    assert!(c.iterations <= 300);

    assert!(kmeans(&pairs, 5, 0, 300).is_err());
}

/// Exhaustive minimum of the within-cluster sum of squares over every labeling.
fn exhaustive_wcss(pts: &[Vec<f64>], k: usize) -> f64 {
    let n = pts.len();
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; n];
    loop {
        let used: BTreeSet<usize> = labels.iter().copied().collect();
        if used.len() == k {
            let centroids: Vec<Vec<f64>> = (0..k)
                .map(|c| {
                    let members: Vec<&Vec<f64>> = pts
                        .iter()
                        .zip(&labels)
                        .filter(|(_, l)| **l == c)
                        .map(|(p, _)| p)
                        .collect();
                    (0..pts[0].len())
                        .map(|d| members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64)
                        .collect()
                })
                .collect();
            best = best.min(wcss(pts, &labels, &centroids));
        }
        // Next labeling in base k; the first point stays in cluster 0 by symmetry.
        let mut i = n - 1;
        loop {
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            if i == 1 {
                return best;
            }
            i -= 1;
        }
    }
}

#[test]
fn kmeans_reaches_the_exhaustive_optimum_on_twelve_points() {
    let data = points(&[(0.0, 0.0), (4.0, 0.0), (2.0, 3.0), (9.0, 9.0)], 1.5, 3, 12);
    let pts = rows(&data);
    let optimum = exhaustive_wcss(&pts, 3);
    let ours = kmeans(&data, 3, 0, 300).unwrap();
    let best_of_50 = (0..50)
        .map(|s| kmeans(&data, 3, s, 300).unwrap().objective)
        .fold(f64::INFINITY, f64::min);
    assert!(
        ours.objective <= best_of_50 + 1e-9,
        "{} vs {best_of_50}",
        ours.objective
    );
    assert!(
        (ours.objective - optimum).abs() < 1e-9,
        "{} vs optimum {optimum}",
        ours.objective
    );
}

#[test]
fn silhouette_examples() {
    let two = points(&[(0.0, 0.0), (100.0, 0.0)], 0.5, 8, 1);
    let labels: Vec<usize> = (0..16).map(|i| i / 8).collect();
    assert!(median_silhouette(&two, &labels).unwrap() > 0.9);

    let one = points(&[(0.0, 0.0)], 1.0, 200, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let random: Vec<usize> = (0..200).map(|_| rng.gen_range(0..2)).collect();
    assert!(median_silhouette(&one, &random).unwrap().abs() < 0.2);

    // The middle point is equidistant from both clusters.
    let line = DMatrix::from_row_slice(5, 1, &[0.0, 1.0, 2.0, 3.0, 4.0]);
    let s = silhouettes_from_distances(&distance_matrix(&line), &[0, 0, 0, 1, 1]).unwrap();
    // a = mean(2, 1) = 1.5 for point 2, b = mean(1, 2) = 1.5.
    assert_eq!(s[2], 0.0);
    // Singletons score 0.
    let s = silhouettes_from_distances(&distance_matrix(&line), &[0, 0, 0, 0, 1]).unwrap();
    assert_eq!(s[4], 0.0);
    assert!(matches!(
        median_silhouette(&line, &[0; 5]),
        Err(ClusterError::SingleCluster)
    ));
}

#[test]
fn select_k_examples() {
    // With equal blobs, splitting one leaves the median above 0.9, so the
    // blob that would be split holds the majority of points.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut v = Vec::new();
    blob(&mut rng, (0.0, 0.0), 1.0, 30, &mut v);
    blob(&mut rng, (100.0, 0.0), 0.05, 10, &mut v);
    blob(&mut rng, (0.0, 100.0), 0.05, 10, &mut v);
    let three = DMatrix::from_row_slice(v.len() / 2, 2, &v);
    let sel = select_k(&three, 2..=8, 0.9, 1).unwrap();
    assert_eq!(sel.clustering.k, 3);
    assert!(!sel.below_threshold);
    assert!(
        sel.curve.iter().filter(|(k, _)| *k > 3).all(|(_, s)| *s < 0.9),
        "{:?}",
        sel.curve
    );

    let mut v = Vec::new();
    blob(&mut rng, (0.0, 0.0), 1.0, 30, &mut v);
    blob(&mut rng, (60.0, 60.0), 0.05, 10, &mut v);
    let two = DMatrix::from_row_slice(v.len() / 2, 2, &v);
    assert_eq!(select_k(&two, 2..=5, 0.9, 1).unwrap().clustering.k, 2);

    let equal = points(&[(0.0, 0.0), (100.0, 0.0), (0.0, 100.0)], 0.5, 10, 4);
    assert!(select_k(&equal, 2..=8, 0.9, 1).unwrap().clustering.k >= 3);

    let uniform = points(&[(0.0, 0.0)], 10.0, 60, 6);
    let sel = select_k(&uniform, 2..=6, 0.9, 1).unwrap();
    assert!(sel.below_threshold);
    let best = sel.curve.iter().map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(sel.median_silhouette, best);
}

#[test]
fn gini_examples() {
    assert_eq!(gini(&[5, 5, 5, 5]), 0.0);
    assert_eq!(gini(&[7]), 0.0);
    // Σ|xi − xj| = 6 · 96 over ordered pairs, divided by 2 · 4 · 100.
    assert!((gini(&[1, 1, 1, 97]) - 576.0 / 800.0).abs() < 1e-12);
}

#[test]
fn quartile_examples() {
    assert_eq!(quartiles(&[1.0, 2.0, 3.0, 4.0]), (1.75, 3.25));
    assert_eq!(quartiles(&[5.0]), (5.0, 5.0));
}

fn labelled(labels: Vec<usize>) -> Clustering {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    Clustering {
        k,
        labels,
        centroids: vec![],
        objective: 0.0,
        objective_history: vec![],
        iterations: 0,
    }
}

fn profile(values: &[(u8, f64)]) -> [f64; KU_COUNT] {
    let mut row = [0.0; KU_COUNT];
    for (k, v) in values {
        row[KuId::new(*k).unwrap().position()] = *v;
    }
    row
}

#[test]
fn diff_value_examples() {
    let rows = vec![profile(&[(10, 0.1)]), profile(&[(10, 0.2)]), profile(&[(10, 0.3)])];
    let whole = diff_values(&rows, &labelled(vec![0, 0, 0])).unwrap();
    assert!(whole.iter().all(|r| r.diff_value == 0.0 && !r.flagged));

    // Hand fixture: K10 column 0.0, 0.1, 0.2, 0.9, 1.0 with clusters {0,1,2} and {3,4}.
    let rows: Vec<_> = [0.0, 0.1, 0.2, 0.9, 1.0].iter().map(|v| profile(&[(10, *v)])).collect();
    let recs = diff_values(&rows, &labelled(vec![0, 0, 0, 1, 1])).unwrap();
    let k10 = KuId::new(10).unwrap();
    let get = |c: usize| recs.iter().find(|r| r.cluster == c && r.ku == k10).unwrap();
    // Overall median 0.2, Q1 0.1, Q3 0.9.
    assert!((get(0).diff_value - (0.1 - 0.2)).abs() < 1e-12);
    assert!(!get(0).flagged);
    assert!((get(1).diff_value - (0.95 - 0.2)).abs() < 1e-12);
    assert!(get(1).flagged);
    assert!((get(1).q3 - 0.9).abs() < 1e-12);

    assert!(matches!(
        diff_values(&rows, &labelled(vec![0, 1])),
        Err(ClusterError::LabelMismatch { .. })
    ));
}

fn arb_data() -> impl Strategy<Value = DMatrix<f64>> {
    (4usize..25, 1usize..5).prop_flat_map(|(n, d)| {
        prop::collection::vec(-10.0f64..10.0, n * d).prop_map(move |v| DMatrix::from_row_slice(n, d, &v))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kmeans_objective_never_increases(data in arb_data(), k in 2usize..5, seed in any::<u64>()) {
        let k = k.min(data.nrows());
        let c = kmeans(&data, k, seed, 300).unwrap();
        for w in c.objective_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0), "{:?}", c.objective_history);
        }
        let used: BTreeSet<usize> = c.labels.iter().copied().collect();
        let distinct: BTreeSet<Vec<u64>> = rows(&data).iter().map(|r| r.iter().map(|x| x.to_bits()).collect()).collect();
        if distinct.len() >= k {
            prop_assert_eq!(used, (0..k).collect::<BTreeSet<_>>());
        }
        prop_assert!((wcss(&rows(&data), &c.labels, &c.centroids) - c.objective).abs() < 1e-6);
    }

    #[test]
    fn pca_is_orthonormal_and_complete(data in arb_data()) {
        let Ok(pca) = Pca::fit(&data) else { return Ok(()) };
        let c = pca.components();
        let gram = c.transpose() * c;
        let d = data.ncols();
        prop_assert!((gram - DMatrix::<f64>::identity(d, d)).amax() < 1e-9);
        let back = pca.reconstruct(&pca.project(&data, d));
        prop_assert!((back - &data).amax() < 1e-9);
    }

    #[test]
    fn gini_ignores_order_and_scale(sizes in prop::collection::vec(1u64..50, 1..12), c in 1u64..9, seed in any::<u64>()) {
        let base = gini(&sizes);
        prop_assert!((0.0..=1.0).contains(&base));
        let mut shuffled = sizes.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!((gini(&shuffled) - base).abs() < 1e-12);
        let scaled: Vec<u64> = sizes.iter().map(|s| s * c).collect();
        prop_assert!((gini(&scaled) - base).abs() < 1e-12);
    }

    #[test]
    fn diff_flags_follow_the_iqr(values in prop::collection::vec(0.0f64..1.0, 3..20), k in 2usize..4) {
        let rows: Vec<[f64; KU_COUNT]> = values.iter().map(|v| profile(&[(10, *v), (3, 1.0 - v)])).collect();
        let labels: Vec<usize> = (0..rows.len()).map(|i| i % k).collect();
        for r in diff_values(&rows, &labelled(labels)).unwrap() {
            prop_assert_eq!(r.flagged, r.cluster_median < r.q1 || r.cluster_median > r.q3);
            prop_assert!((r.diff_value - (r.cluster_median - r.overall_median)).abs() < 1e-15);
        }
    }
}
