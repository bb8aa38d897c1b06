use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{argmax_rows, cosine_matrix};

/// Restarts used by [`kmeans`]; the best inertia wins.
pub const KMEANS_RESTARTS: usize = 10;
pub const KMEANS_MAX_ITERS: usize = 100;
pub const KMEANS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub centroids: Array2<f64>,
    pub inertia: f64,
}

impl ClusterAssignment {
    pub fn k(&self) -> usize {
        self.centroids.nrows()
    }
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_init(points: ArrayView2<'_, f64>, k: usize, rng: &mut impl Rng) -> Array2<f64> {
    let n = points.nrows();
    let mut centroids = Array2::zeros((k, points.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&points.row(first));
    let mut closest: Vec<f64> = points
        .rows()
        .into_iter()
        .map(|p| sq_dist(p, points.row(first)))
        .collect();
    for c in 1..k {
        let pick = match WeightedIndex::new(&closest) {
            Ok(dist) => dist.sample(rng),
            // every point already coincides with a centroid
            Err(_) => rng.random_range(0..n),
        };
        centroids.row_mut(c).assign(&points.row(pick));
        for (i, p) in points.rows().into_iter().enumerate() {
            closest[i] = closest[i].min(sq_dist(p, points.row(pick)));
        }
    }
    centroids
}

fn assign(points: ArrayView2<'_, f64>, centroids: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
    points
        .rows()
        .into_iter()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (c, cent) in centroids.rows().into_iter().enumerate() {
                let d = sq_dist(p, cent);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .unzip()
}

/// Means of `points` grouped by `labels`; empty groups stay zero and are
/// reported through the returned counts.
pub(crate) fn cluster_means(points: ArrayView2<'_, f64>, labels: &[usize], k: usize) -> (Array2<f64>, Vec<usize>) {
    let mut sums = Array2::<f64>::zeros((k, points.ncols()));
    let mut counts = vec![0usize; k];
    for (p, &l) in points.rows().into_iter().zip(labels) {
        sums.row_mut(l).scaled_add(1.0, &p);
        counts[l] += 1;
    }
    for (mut row, &c) in sums.rows_mut().into_iter().zip(&counts) {
        if c > 0 {
            row /= c as f64;
        }
    }
    (sums, counts)
}

/// One k-means++ seeded Lloyd run. Returns the assignment and the inertia
/// after every centroid update.
pub(crate) fn lloyd(points: ArrayView2<'_, f64>, k: usize, rng: &mut impl Rng) -> (ClusterAssignment, Vec<f64>) {
    let mut centroids = plus_plus_init(points, k, rng);
    let (mut labels, mut dists) = assign(points, &centroids);
    let mut trace = vec![dists.iter().sum::<f64>()];
    for _ in 0..KMEANS_MAX_ITERS {
        let (means, counts) = cluster_means(points, &labels, k);
        centroids = means;
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            // hand the empty cluster the point worst served by its centroid
            let far = (0..labels.len())
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                .unwrap();
            centroids.row_mut(c).assign(&points.row(far));
            labels[far] = c;
            dists[far] = 0.0;
        }
        let (new_labels, new_dists) = assign(points, &centroids);
        let inertia: f64 = new_dists.iter().sum();
        let prev = *trace.last().unwrap();
        trace.push(inertia);
        let stalled = new_labels == labels;
        labels = new_labels;
        dists = new_dists;
        if prev - inertia < KMEANS_TOL || stalled {
            break;
        }
    }
    // leave centroids as the exact means of the final labelling
    let (means, counts) = cluster_means(points, &labels, k);
    for c in 0..k {
        if counts[c] > 0 {
            centroids.row_mut(c).assign(&means.row(c));
        }
    }
    let inertia = points
        .rows()
        .into_iter()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, centroids.row(l)))
        .sum();
    (
        ClusterAssignment {
            labels,
            centroids,
            inertia,
        },
        trace,
    )
}

/// k-means with k-means++ seeding, keeping the best of [`KMEANS_RESTARTS`].
pub fn kmeans(points: ArrayView2<'_, f64>, k: usize, seed: u64) -> Result<ClusterAssignment> {
    kmeans_with_restarts(points, k, seed, KMEANS_RESTARTS)
}

pub fn kmeans_with_restarts(
    points: ArrayView2<'_, f64>,
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<ClusterAssignment> {
    if k == 0 || k > points.nrows() {
        return Err(Error::InvalidConfig(format!(
            "k-means needs 1 <= k <= n, got k={k}, n={}",
            points.nrows()
        )));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidValue("non-finite point passed to k-means".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<ClusterAssignment> = None;
    for _ in 0..restarts.max(1) {
        let (run, _) = lloyd(points, k, &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.unwrap())
}

/// Index of the most cosine-similar centroid for every row; ties go to the
/// lowest index.
pub fn assign_by_similarity(emb: ArrayView2<'_, f64>, centroids: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    if emb.ncols() != centroids.ncols() {
        return Err(Error::shape(
            "embedding vs centroid width",
            centroids.ncols(),
            emb.ncols(),
        ));
    }
    Ok(argmax_rows(cosine_matrix(emb, centroids).view()))
}

/// Fraction of positions where two labellings agree.
pub fn matching_rate(a: &[usize], b: &[usize]) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64
}
