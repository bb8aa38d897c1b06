use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{CsrMatrix, SparseGraph};
use crate::error::{Error, Result};
use crate::linalg::cosine_matrix;

/// Standard deviation of the Gaussian noise added to SBM features.
pub const SBM_NOISE_STD: f64 = 1.0;

/// Extra pure-noise feature columns appended after the block one-hot.
const SBM_NOISE_COLS: usize = 8;

/// Stochastic block model with one-hot-plus-noise features. Labels are the
/// block ids.
pub fn generate_sbm(block_sizes: &[usize], p_in: f64, p_out: f64, seed: u64) -> Result<SparseGraph> {
    generate_sbm_with_noise(block_sizes, p_in, p_out, SBM_NOISE_STD, seed)
}

pub fn generate_sbm_with_noise(
    block_sizes: &[usize],
    p_in: f64,
    p_out: f64,
    noise_std: f64,
    seed: u64,
) -> Result<SparseGraph> {
    if block_sizes.is_empty() {
        return Err(Error::InvalidConfig("SBM needs at least one block".into()));
    }
    if !(0.0 <= p_out && p_out < p_in && p_in <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "SBM probabilities must satisfy 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}"
        )));
    }
    if !(noise_std >= 0.0) {
        return Err(Error::InvalidConfig(format!("noise std {noise_std}")));
    }
    let labels: Vec<usize> = block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &size)| std::iter::repeat(b).take(size))
        .collect();
    let n = labels.len();
    let blocks = block_sizes.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if labels[u] == labels[v] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((u, v, 1.0));
            }
        }
    }

    let noise = Normal::new(0.0, noise_std).expect("validated std");
    let mut features = Array2::<f32>::zeros((n, blocks + SBM_NOISE_COLS));
    for (i, mut row) in features.rows_mut().into_iter().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            let base = if j == labels[i] { 1.0 } else { 0.0 };
            *x = (base + noise.sample(&mut rng)) as f32;
        }
    }
    SparseGraph::from_edges(n, &edges, features, Some(labels))
}

/// Symmetric 0/1 k-nearest-neighbour graph under cosine similarity.
/// Ties go to the lowest index; the union of directed choices is kept.
pub fn knn_graph(vectors: ArrayView2<'_, f64>, k: usize) -> Result<CsrMatrix> {
    let n = vectors.nrows();
    if k >= n {
        return Err(Error::InvalidConfig(format!("knn k={k} must be < n={n}")));
    }
    let sims = cosine_matrix(vectors, vectors);
    let mut triplets = Vec::with_capacity(2 * n * k);
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        order.sort_by(|&a, &b| sims[[i, b]].total_cmp(&sims[[i, a]]).then(a.cmp(&b)));
        for &j in &order[..k] {
            triplets.push((i, j, 1.0));
            triplets.push((j, i, 1.0));
        }
    }
    CsrMatrix::from_triplets(n, n, triplets)
}
