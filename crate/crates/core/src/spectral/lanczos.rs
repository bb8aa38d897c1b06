//! Thick-restart Lanczos with full reorthogonalization for the largest
//! eigenpairs of a symmetric operator.
//!
//! The basis is kept explicitly together with its image under the operator,
//! so the projected matrix is formed as `Vᵀ A V` rather than from the
//! three-term recurrence. That makes restarts trivial: the wanted Ritz
//! vectors become the new basis and the next direction is the part of the
//! last image orthogonal to the old basis.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub(crate) struct LanczosOutput {
    /// Descending.
    pub values: Vec<f64>,
    /// One vector per value.
    pub vectors: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Removes the span of `basis` from `q` (two passes) and returns its
/// remaining norm.
fn orthogonalize(q: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    for _ in 0..2 {
        for b in basis {
            let p = dot(b, q);
            axpy(-p, b, q);
        }
    }
    norm(q)
}

fn random_unit(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    v
}

/// Largest `k` eigenpairs of the symmetric operator `apply` of size `n`.
pub(crate) fn largest_eigenpairs(
    n: usize,
    k: usize,
    apply: impl Fn(&[f64], &mut [f64]),
    tol: f64,
    max_matvecs: usize,
    rng: &mut impl Rng,
) -> Result<LanczosOutput> {
    if k == 0 {
        return Ok(LanczosOutput {
            values: vec![],
            vectors: vec![],
        });
    }
    assert!(k <= n, "k must not exceed n");
    let max_basis = n.min((2 * k).max(k + 80));
    let keep = max_basis.saturating_sub(1).min(k + (max_basis - k) / 2);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_basis);
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(max_basis);
    let mut next = random_unit(n, rng);
    let mut matvecs = 0;
    let breakdown = 1e-10;

    loop {
        while basis.len() < max_basis {
            let mut q = std::mem::take(&mut next);
            let mut qn = orthogonalize(&mut q, &basis);
            while qn < breakdown {
                // invariant subspace found; continue from a fresh direction
                q = random_unit(n, rng);
                qn = orthogonalize(&mut q, &basis);
            }
            q.iter_mut().for_each(|x| *x /= qn);
            let mut w = vec![0.0; n];
            apply(&q, &mut w);
            matvecs += 1;
            next = w.clone();
            basis.push(q);
            images.push(w);
        }

        let m = basis.len();
        let projected = DMatrix::from_fn(m, m, |i, j| {
            0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]))
        });
        let eig = projected.symmetric_eigen();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let ritz = |count: usize| -> (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
            let mut vals = Vec::with_capacity(count);
            let mut vecs = Vec::with_capacity(count);
            let mut imgs = Vec::with_capacity(count);
            for &col in order.iter().take(count) {
                let s = eig.eigenvectors.column(col);
                let mut y = vec![0.0; n];
                let mut ay = vec![0.0; n];
                for (i, &si) in s.iter().enumerate() {
                    axpy(si, &basis[i], &mut y);
                    axpy(si, &images[i], &mut ay);
                }
                vals.push(eig.eigenvalues[col]);
                vecs.push(y);
                imgs.push(ay);
            }
            (vals, vecs, imgs)
        };

        let (vals, vecs, imgs) = ritz(k);
        let residuals: Vec<f64> = vals
            .iter()
            .zip(vecs.iter().zip(&imgs))
            .map(|(&theta, (y, ay))| {
                ay.iter()
                    .zip(y)
                    .map(|(a, b)| (a - theta * b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let worst = residuals.iter().copied().fold(0.0, f64::max);
        if worst <= tol || m == n {
            return Ok(LanczosOutput {
                values: vals,
                vectors: vecs,
            });
        }
        if matvecs >= max_matvecs {
            return Err(Error::SolverDiverged {
                iterations: matvecs,
                worst_residual: worst,
                residuals,
            });
        }

        // continuation direction: last image with the old span removed
        let mut cont = std::mem::take(&mut next);
        orthogonalize(&mut cont, &basis);
        let (_, kept, kept_images) = ritz(keep);
        basis = kept;
        images = kept_images;
        next = cont;
    }
}
