//! Extremal eigenpairs of the normalized Laplacian.
//!
//! The structural branch consumes the `k1` smallest and `k2` largest
//! eigenpairs. The largest band comes straight from Lanczos on `L`; the
//! smallest band is the largest band of `2I - L`, mapped back, which is valid
//! because the normalized Laplacian spectrum lies in `[0, 2]`.

mod dense;
mod io;
mod lanczos;

use ndarray::{s, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use dense::DENSE_MAX_N;
pub use io::{read_eigensystem, write_eigensystem, EIGEN_MAGIC};

use crate::error::{Error, Result};
use crate::graph::{CsrMatrix, NormKind, NormalizedOperator};

pub const DEFAULT_TOL: f64 = 1e-8;
/// Graphs up to this size use the dense path in [`compute_eigensystem`].
pub const DENSE_AUTO_N: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    /// Ascending within each band; the `k1` small ones come first.
    pub eigenvalues: Vec<f64>,
    /// `n × (k1 + k2)`, column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: Array2<f64>,
    pub k1: usize,
    pub k2: usize,
    /// `‖Lv - λv‖₂` per pair. Empty when loaded from disk.
    pub residuals: Vec<f64>,
}

impl EigenSystem {
    pub fn n(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Default band split for a condensed size: `k1 = round(0.9 n')`.
pub fn band_split(n_prime: usize) -> (usize, usize) {
    let k1 = (0.9 * n_prime as f64).round() as usize;
    (k1, n_prime - k1)
}

pub fn max_iterations(k1: usize, k2: usize) -> usize {
    10 * (k1 + k2) + 200
}

/// Full spectrum of a dense symmetric matrix, ascending. Used as the oracle
/// for the iterative solver.
pub fn dense_eig(matrix: &Array2<f64>) -> Result<EigenSystem> {
    let (values, mut vectors) = dense::symmetric_eigen(matrix)?;
    canonicalize_signs(&mut vectors);
    let residuals = dense_residuals(matrix, &values, &vectors);
    Ok(EigenSystem {
        k1: values.len(),
        k2: 0,
        eigenvalues: values,
        eigenvectors: vectors,
        residuals,
    })
}

/// `k1` smallest and `k2` largest eigenpairs of a normalized Laplacian via
/// Lanczos with full reorthogonalization.
pub fn extremal_eigs(laplacian: &NormalizedOperator, k1: usize, k2: usize, tol: f64, seed: u64) -> Result<EigenSystem> {
    check_request(laplacian, k1, k2, tol)?;
    let l = laplacian.matrix.as_ref();
    let n = l.rows();
    let max_iter = max_iterations(k1, k2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // solve slightly tighter than requested: final residuals are recomputed on L
    let inner_tol = 0.5 * tol;

    let flipped = |x: &[f64], y: &mut [f64]| {
        l.matvec(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = 2.0 * xi - *yi;
        }
    };
    let small = lanczos::largest_eigenpairs(n, k1, flipped, inner_tol, max_iter, &mut rng)?;
    let large = lanczos::largest_eigenpairs(n, k2, |x, y| l.matvec(x, y), inner_tol, max_iter, &mut rng)?;

    // small band: descending in 2 - λ means ascending in λ
    let mut values: Vec<f64> = small.values.iter().map(|t| 2.0 - t).collect();
    let mut columns = small.vectors;
    values.extend(large.values.iter().rev());
    columns.extend(large.vectors.into_iter().rev());

    let mut vectors = Array2::<f64>::zeros((n, k1 + k2));
    for (j, col) in columns.iter().enumerate() {
        let nv = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (i, &x) in col.iter().enumerate() {
            vectors[[i, j]] = x / nv;
        }
    }
    canonicalize_signs(&mut vectors);
    finish(l, vectors, k1, k2, tol)
}

/// Dense path for `n <= DENSE_AUTO_N`, Lanczos otherwise.
pub fn compute_eigensystem(
    laplacian: &NormalizedOperator,
    k1: usize,
    k2: usize,
    tol: f64,
    seed: u64,
) -> Result<EigenSystem> {
    check_request(laplacian, k1, k2, tol)?;
    let n = laplacian.n();
    if n > DENSE_AUTO_N {
        return extremal_eigs(laplacian, k1, k2, tol, seed);
    }
    let full = dense_eig(&laplacian.matrix.to_dense())?;
    let mut vectors = Array2::<f64>::zeros((n, k1 + k2));
    vectors
        .slice_mut(s![.., ..k1])
        .assign(&full.eigenvectors.slice(s![.., ..k1]));
    vectors
        .slice_mut(s![.., k1..])
        .assign(&full.eigenvectors.slice(s![.., n - k2..]));
    finish(laplacian.matrix.as_ref(), vectors, k1, k2, tol)
}

fn check_request(laplacian: &NormalizedOperator, k1: usize, k2: usize, tol: f64) -> Result<()> {
    if laplacian.kind != NormKind::Laplacian {
        return Err(Error::InvalidConfig("eigensolver expects a Laplacian operator".into()));
    }
    let n = laplacian.n();
    if k1 + k2 > n {
        return Err(Error::InvalidConfig(format!("k1 + k2 = {} exceeds n = {n}", k1 + k2)));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tol must be positive, got {tol}")));
    }
    Ok(())
}

/// Rayleigh quotients, clamping to `[0, 2]`, and residuals on the original operator.
fn finish(l: &CsrMatrix, vectors: Array2<f64>, k1: usize, k2: usize, tol: f64) -> Result<EigenSystem> {
    let n = l.rows();
    let mut values = Vec::with_capacity(k1 + k2);
    let mut residuals = Vec::with_capacity(k1 + k2);
    let mut lv = vec![0.0; n];
    for col in vectors.columns() {
        let v = col.to_vec();
        l.matvec(&v, &mut lv);
        let lambda: f64 = v.iter().zip(&lv).map(|(a, b)| a * b).sum();
        let r = lv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        values.push(lambda.clamp(0.0, 2.0));
        residuals.push(r);
    }
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    if worst > tol {
        return Err(Error::SolverDiverged {
            iterations: max_iterations(k1, k2),
            worst_residual: worst,
            residuals,
        });
    }
    Ok(EigenSystem {
        eigenvalues: values,
        eigenvectors: vectors,
        k1,
        k2,
        residuals,
    })
}

fn dense_residuals(matrix: &Array2<f64>, values: &[f64], vectors: &Array2<f64>) -> Vec<f64> {
    let av = matrix.dot(vectors);
    values
        .iter()
        .enumerate()
        .map(|(j, &lambda)| {
            av.column(j)
                .iter()
                .zip(vectors.column(j))
                .map(|(a, v)| (a - lambda * v).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Flips each column so its largest-magnitude entry (lowest index on ties)
/// is positive.
pub fn canonicalize_signs(vectors: &mut Array2<f64>) {
    for mut col in vectors.columns_mut() {
        let mut best = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col.len() > 0 && col[best] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
}
