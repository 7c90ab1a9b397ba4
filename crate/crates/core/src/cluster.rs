//! Developer clustering over knowledge-unit profiles: PCA reduction, seeded
//! k-means, median-silhouette model selection, Gini index of cluster sizes and
//! per-cluster median differences.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ku::{KuId, KU_COUNT};
use crate::profiles::ExpertiseMatrix;

pub const DEFAULT_VARIANCE: f64 = 0.95;
pub const DEFAULT_SILHOUETTE: f64 = 0.90;
pub const DEFAULT_K_MAX: usize = 100;
pub const DEFAULT_MAX_ITER: usize = 300;
/// Independent k-means++ starts per run; the lowest objective wins.
pub const KMEANS_RESTARTS: usize = 8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClusterError {
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("all rows are identical; there is no variance to analyse")]
    Degenerate,
    #[error("k = {k} is outside 2..={n}")]
    BadK { k: usize, n: usize },
    #[error("silhouette needs at least two non-empty clusters")]
    SingleCluster,
    #[error("label count {labels} does not match row count {rows}")]
    LabelMismatch { labels: usize, rows: usize },
    #[error("variance threshold {0} is outside (0, 1]")]
    BadThreshold(f64),
}

/// Principal components of a row-observation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    mean: DVector<f64>,
    /// Unit eigenvectors as columns, by descending eigenvalue.
    components: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

impl Pca {
    /// Fits all components of `data` (rows are observations).
    pub fn fit(data: &DMatrix<f64>) -> Result<Self, ClusterError> {
        let n = data.nrows();
        if n < 2 {
            return Err(ClusterError::TooFewRows { needed: 2, got: n });
        }
        let mean = data.row_mean().transpose();
        let mut centered = data.clone();
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        let cov = centered.transpose() * &centered / (n as f64 - 1.0);
        let trace: f64 = cov.diagonal().iter().sum();
        if trace <= 0.0 {
            return Err(ClusterError::Degenerate);
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let d = data.ncols();
        let mut components = DMatrix::zeros(d, d);
        let mut eigenvalues = Vec::with_capacity(d);
        for (j, &src) in order.iter().enumerate() {
            let mut v = eig.eigenvectors.column(src).into_owned();
            // Deterministic sign: largest-magnitude entry positive.
            let pivot = v
                .iter()
                .copied()
                .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            if pivot < 0.0 {
                v.neg_mut();
            }
            components.set_column(j, &v);
            eigenvalues.push(eig.eigenvalues[src].max(0.0));
        }
        Ok(Pca {
            mean,
            components,
            eigenvalues,
        })
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().sum();
        self.eigenvalues.iter().map(|e| e / total).collect()
    }

    /// Smallest component count whose cumulative explained variance reaches `threshold`.
    pub fn components_for(&self, threshold: f64) -> Result<usize, ClusterError> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(ClusterError::BadThreshold(threshold));
        }
        let mut cumulative = 0.0;
        for (i, r) in self.explained_variance_ratio().iter().enumerate() {
            cumulative += r;
            if cumulative >= threshold - 1e-12 {
                return Ok(i + 1);
            }
        }
        Ok(self.eigenvalues.len())
    }

    /// Scores of `data` on the first `m` components.
    pub fn project(&self, data: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
        let mut centered = data.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        centered * self.components.columns(0, m)
    }

    /// Maps scores on the first `scores.ncols()` components back to the original space.
    pub fn reconstruct(&self, scores: &DMatrix<f64>) -> DMatrix<f64> {
        let m = scores.ncols();
        let mut out = scores * self.components.columns(0, m).transpose();
        for mut row in out.row_iter_mut() {
            row += self.mean.transpose();
        }
        out
    }
}

/// Projects `data` onto the fewest components explaining `threshold` of its variance.
pub fn pca_reduce(data: &DMatrix<f64>, threshold: f64) -> Result<(Pca, DMatrix<f64>), ClusterError> {
    let pca = Pca::fit(data)?;
    let m = pca.components_for(threshold)?;
    let reduced = pca.project(data, m);
    Ok((pca, reduced))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    /// Cluster of each row, dense in `0..k`.
    pub labels: Vec<usize>,
    /// Centroids as rows.
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares.
    pub objective: f64,
    /// Objective after every Lloyd iteration of the winning start.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
}

impl Clustering {
    pub fn sizes(&self) -> Vec<u64> {
        let mut sizes = vec![0u64; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn rows_of(data: &DMatrix<f64>) -> Vec<Vec<f64>> {
    data.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Within-cluster sum of squared distances.
pub fn wcss(points: &[Vec<f64>], labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points.iter().zip(labels).map(|(p, &l)| sq_dist(p, &centroids[l])).sum()
}

fn kmeans_pp_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            while d2[pick] == 0.0 {
                pick -= 1;
            }
            pick
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

/// Nearest centroid; the current label wins ties, then the lowest index.
fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>], labels: &mut [usize]) -> bool {
    let mut changed = false;
    for (p, label) in points.iter().zip(labels.iter_mut()) {
        let mut best = *label;
        let mut best_d = sq_dist(p, &centroids[best]);
        for (j, c) in centroids.iter().enumerate() {
            let d = sq_dist(p, c);
            if d < best_d {
                best = j;
                best_d = d;
            }
        }
        if best != *label {
            *label = best;
            changed = true;
        }
    }
    changed
}

/// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty(points: &[Vec<f64>], centroids: &mut [Vec<f64>], labels: &mut [usize]) -> bool {
    let k = centroids.len();
    let mut repaired = false;
    loop {
        let mut sizes = vec![0usize; k];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return repaired;
        };
        let donor = (0..points.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .max_by(|&a, &b| {
                sq_dist(&points[a], &centroids[labels[a]])
                    .total_cmp(&sq_dist(&points[b], &centroids[labels[b]]))
                    .then(b.cmp(&a))
            })
            .expect("k <= n leaves a cluster with two points");
        labels[donor] = empty;
        centroids[empty] = points[donor].clone();
        repaired = true;
    }
}

fn update_centroids(points: &[Vec<f64>], labels: &[usize], centroids: &mut [Vec<f64>]) {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(p) {
            *s += x;
        }
    }
    for ((c, s), n) in centroids.iter_mut().zip(sums).zip(counts) {
        if n > 0 {
            *c = s.into_iter().map(|x| x / n as f64).collect();
        }
    }
}

fn lloyd(points: &[Vec<f64>], k: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> Clustering {
    let mut centroids = kmeans_pp_init(points, k, rng);
    let mut labels = vec![0usize; points.len()];
    assign(points, &centroids, &mut labels);
    repair_empty(points, &mut centroids, &mut labels);
    let mut history = Vec::new();
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        update_centroids(points, &labels, &mut centroids);
        history.push(wcss(points, &labels, &centroids));
        let changed = assign(points, &centroids, &mut labels);
        let repaired = repair_empty(points, &mut centroids, &mut labels);
        if !changed && !repaired {
            break;
        }
    }
    let objective = wcss(points, &labels, &centroids);
    Clustering {
        k,
        labels,
        centroids,
        objective,
        objective_history: history,
        iterations,
    }
}

/// Seeded k-means: several k-means++ starts refined by Lloyd iterations.
pub fn kmeans(data: &DMatrix<f64>, k: usize, seed: u64, max_iter: usize) -> Result<Clustering, ClusterError> {
    let n = data.nrows();
    if k < 2 || k > n {
        return Err(ClusterError::BadK { k, n });
    }
    let points = rows_of(data);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Clustering> = None;
    for _ in 0..KMEANS_RESTARTS {
        let run = lloyd(&points, k, max_iter.max(1), &mut rng);
        if best.as_ref().is_none_or(|b| run.objective < b.objective - 1e-12) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one start"))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Pairwise Euclidean distances.
pub fn distance_matrix(data: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let points = rows_of(data);
    points
        .par_iter()
        .map(|a| points.iter().map(|b| sq_dist(a, b).sqrt()).collect())
        .collect()
}

/// Silhouette of every point; points in singleton clusters get 0.
pub fn silhouettes_from_distances(dist: &[Vec<f64>], labels: &[usize]) -> Result<Vec<f64>, ClusterError> {
    if dist.len() != labels.len() {
        return Err(ClusterError::LabelMismatch {
            labels: labels.len(),
            rows: dist.len(),
        });
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(ClusterError::SingleCluster);
    }
    Ok((0..labels.len())
        .into_par_iter()
        .map(|i| {
            let own = labels[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for (j, &l) in labels.iter().enumerate() {
                sums[l] += dist[i][j];
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect())
}

/// Median over points of the silhouette coefficient.
pub fn median_silhouette(data: &DMatrix<f64>, labels: &[usize]) -> Result<f64, ClusterError> {
    let dist = distance_matrix(data);
    let mut s = silhouettes_from_distances(&dist, labels)?;
    Ok(median(&mut s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub clustering: Clustering,
    pub median_silhouette: f64,
    /// No K reached the threshold; the best-scoring K was taken instead.
    pub below_threshold: bool,
    /// `(k, median silhouette)` for every K tried.
    pub curve: Vec<(usize, f64)>,
}

/// Seed of the run for `k`, derived from the master seed.
fn seed_for_k(seed: u64, k: usize) -> u64 {
    seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Largest K in `k_range` whose clustering has median silhouette ≥ `threshold`.
pub fn select_k(
    data: &DMatrix<f64>,
    k_range: std::ops::RangeInclusive<usize>,
    threshold: f64,
    seed: u64,
) -> Result<KSelection, ClusterError> {
    let n = data.nrows();
    let lo = (*k_range.start()).max(2);
    let hi = (*k_range.end()).min(n);
    if lo > hi {
        return Err(ClusterError::BadK { k: *k_range.start(), n });
    }
    let dist = distance_matrix(data);
    let mut runs: Vec<(Clustering, f64)> = (lo..=hi)
        .into_par_iter()
        .map(|k| {
            let c = kmeans(data, k, seed_for_k(seed, k), DEFAULT_MAX_ITER)?;
            let mut s = silhouettes_from_distances(&dist, &c.labels)?;
            Ok((c, median(&mut s)))
        })
        .collect::<Result<_, ClusterError>>()?;
    let curve: Vec<(usize, f64)> = runs.iter().map(|(c, s)| (c.k, *s)).collect();
    let qualifying = runs.iter().rposition(|(_, s)| *s >= threshold);
    let (pos, below) = match qualifying {
        Some(p) => (p, false),
        None => {
            let best = runs
                .iter()
                .enumerate()
                .max_by(|(i, a), (j, b)| a.1.total_cmp(&b.1).then(j.cmp(i)))
                .map(|(i, _)| i)
                .expect("non-empty range");
            (best, true)
        }
    };
    let (clustering, median_silhouette) = runs.swap_remove(pos);
    Ok(KSelection {
        clustering,
        median_silhouette,
        below_threshold: below,
        curve,
    })
}

/// Gini index of cluster sizes: Σᵢ Σⱼ |xᵢ − xⱼ| / (2 n² μ).
pub fn gini(sizes: &[u64]) -> f64 {
    let n = sizes.len();
    let total: u64 = sizes.iter().sum();
    if n == 0 || total == 0 {
        return 0.0;
    }
    let mut sum_abs = 0u128;
    for &a in sizes {
        for &b in sizes {
            sum_abs += a.abs_diff(b) as u128;
        }
    }
    // 2 n² μ = 2 n · total
    sum_abs as f64 / (2.0 * n as f64 * total as f64)
}

/// First and third quartiles by linear interpolation between order statistics.
pub fn quartiles(values: &[f64]) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    (quantile_sorted(&v, 0.25), quantile_sorted(&v, 0.75))
}

fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffValueRecord {
    pub cluster: usize,
    pub ku: KuId,
    pub cluster_median: f64,
    pub overall_median: f64,
    /// Cluster median minus overall median.
    pub diff_value: f64,
    pub q1: f64,
    pub q3: f64,
    /// Cluster median lies outside the overall interquartile range.
    pub flagged: bool,
}

/// Per cluster and knowledge unit, the cluster median's offset from the overall median.
pub fn diff_values(
    profiles: &[[f64; KU_COUNT]],
    clustering: &Clustering,
) -> Result<Vec<DiffValueRecord>, ClusterError> {
    if profiles.len() != clustering.labels.len() {
        return Err(ClusterError::LabelMismatch {
            labels: clustering.labels.len(),
            rows: profiles.len(),
        });
    }
    let mut out = Vec::new();
    for ku in KuId::all() {
        let column: Vec<f64> = profiles.iter().map(|r| r[ku.position()]).collect();
        let (q1, q3) = quartiles(&column);
        let overall_median = median(&mut column.clone());
        for cluster in 0..clustering.k {
            let mut members: Vec<f64> = column
                .iter()
                .zip(&clustering.labels)
                .filter(|(_, &l)| l == cluster)
                .map(|(v, _)| *v)
                .collect();
            if members.is_empty() {
                continue;
            }
            let cluster_median = median(&mut members);
            out.push(DiffValueRecord {
                cluster,
                ku,
                cluster_median,
                overall_median,
                diff_value: cluster_median - overall_median,
                q1,
                q3,
                flagged: cluster_median < q1 || cluster_median > q3,
            });
        }
    }
    out.sort_by_key(|r| (r.cluster, r.ku));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterOptions {
    pub k_max: usize,
    pub variance: f64,
    pub silhouette: f64,
    pub seed: u64,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions {
            k_max: DEFAULT_K_MAX,
            variance: DEFAULT_VARIANCE,
            silhouette: DEFAULT_SILHOUETTE,
            seed: 0,
        }
    }
}

/// Full clustering study of developer profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAnalysis {
    pub developers: Vec<String>,
    pub pca_components: usize,
    pub explained_variance: Vec<f64>,
    pub selection: KSelection,
    pub sizes: Vec<u64>,
    pub gini: f64,
    pub diff_values: Vec<DiffValueRecord>,
}

pub fn analyse_profiles(profiles: &ExpertiseMatrix, options: &ClusterOptions) -> Result<ClusterAnalysis, ClusterError> {
    let rows: Vec<[f64; KU_COUNT]> = profiles.rows().map(|(_, r)| *r).collect();
    let developers: Vec<String> = profiles.developers().to_vec();
    if rows.len() < 3 {
        return Err(ClusterError::TooFewRows {
            needed: 3,
            got: rows.len(),
        });
    }
    let data = DMatrix::from_fn(rows.len(), KU_COUNT, |i, j| rows[i][j]);
    let (pca, reduced) = pca_reduce(&data, options.variance)?;
    let selection = select_k(&reduced, 2..=options.k_max, options.silhouette, options.seed)?;
    let sizes = selection.clustering.sizes();
    let diff = diff_values(&rows, &selection.clustering)?;
    Ok(ClusterAnalysis {
        developers,
        pca_components: reduced.ncols(),
        explained_variance: pca.explained_variance_ratio(),
        gini: gini(&sizes),
        sizes,
        selection,
        diff_values: diff,
    })
}

impl ClusterAnalysis {
    pub fn write_labels<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["developer", "cluster"])?;
        for (d, l) in self.developers.iter().zip(&self.selection.clustering.labels) {
            w.write_record([d.clone(), l.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_silhouette_curve<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["k", "median_silhouette"])?;
        for (k, s) in &self.selection.curve {
            w.write_record([k.to_string(), format!("{s:.6}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_diff_values<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "cluster",
            "ku",
            "cluster_median",
            "overall_median",
            "diff_value",
            "q1",
            "q3",
            "flagged",
        ])?;
        for r in &self.diff_values {
            w.write_record([
                r.cluster.to_string(),
                r.ku.to_string(),
                format!("{:.6}", r.cluster_median),
                format!("{:.6}", r.overall_median),
                format!("{:.6}", r.diff_value),
                format!("{:.6}", r.q1),
                format!("{:.6}", r.q3),
                r.flagged.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_cases() {
        assert_eq!(gini(&[5, 5, 5, 5]), 0.0);
        assert_eq!(gini(&[7]), 0.0);
        // pairs with 97: 6 ordered pairs × 96 = 576; 576 / (2·4·100)
        assert!((gini(&[1, 1, 1, 97]) - 0.72).abs() < 1e-12);
    }

    #[test]
    fn type7_quartiles() {
        assert_eq!(quartiles(&[1.0, 2.0, 3.0, 4.0]), (1.75, 3.25));
        assert_eq!(quartiles(&[5.0]), (5.0, 5.0));
    }

    #[test]
    fn identical_points_terminate() {
        let data = DMatrix::from_element(4, 2, 1.0);
        let c = kmeans(&data, 2, 3, 50).unwrap();
        assert_eq!(c.sizes().iter().filter(|&&s| s > 0).count(), 2);
        assert_eq!(c.objective, 0.0);
    }

    #[test]
    fn separated_pairs() {
        let data = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.1, 0.0, 10.0, 10.0, 10.1, 10.0]);
        let c = kmeans(&data, 2, 1, 100).unwrap();
        assert_eq!(c.labels[0], c.labels[1]);
        assert_eq!(c.labels[2], c.labels[3]);
        assert_ne!(c.labels[0], c.labels[2]);
        assert!(median_silhouette(&data, &c.labels).unwrap() > 0.9);
    }

    #[test]
    fn degenerate_pca() {
        let data = DMatrix::from_element(3, 4, 2.0);
        assert_eq!(Pca::fit(&data).unwrap_err(), ClusterError::Degenerate);
    }
}
