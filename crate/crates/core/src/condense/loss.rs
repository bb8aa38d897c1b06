use ndarray::Array2;

use crate::autodiff::Var;
use crate::error::{Error, Result};

/// Selection matrix with a single one per row at `cols[i]`.
fn selector(rows: usize, cols: usize, picks: impl Iterator<Item = usize>) -> Array2<f64> {
    let mut m = Array2::zeros((rows, cols));
    for (i, j) in picks.enumerate() {
        m[[i, j]] = 1.0;
    }
    m
}

/// `Σᵢ log Σ_{j ≠ excluded[i]} exp(s[i, j])` computed stably.
///
/// The excluded entry is pushed far below every other logit before a row
/// log-softmax, so its weight underflows to exactly zero. The log-sum-exp
/// of row `i` is then recovered from any surviving column `j` as
/// `s[i, j] − logsoftmax[i, j]`.
fn masked_logsumexp<'t>(s: Var<'t>, excluded: &[usize], floor: f64) -> Result<Var<'t>> {
    let tape = s.tape();
    let (rows, cols) = s.shape();
    let keep = Array2::from_shape_fn((rows, cols), |(i, j)| if j == excluded[i] { 0.0 } else { 1.0 });
    let offset = keep.mapv(|k| if k == 0.0 { floor } else { 0.0 });
    let masked = s.mul(tape.leaf(keep))?.add(tape.leaf(offset))?;
    let log_sm = masked.log_softmax_rows()?;
    let pick = tape.leaf(selector(rows, cols, excluded.iter().map(|&e| (e + 1) % cols)));
    masked.mul(pick)?.sum()?.sub(log_sm.mul(pick)?.sum()?)
}

fn check_labels(labels: &[usize], n: usize, k: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::shape("cluster labels", n, labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::IndexOutOfRange { index: bad, n: k });
    }
    Ok(())
}

/// Pulls every embedding towards its assigned centroid and away from the
/// others:
/// `−Σᵢ [ sim(eᵢ, c_{yᵢ})/τ − log Σ_{j≠yᵢ} exp(sim(eᵢ, cⱼ)/τ) ]`.
/// The positive centroid is left out of the denominator.
pub fn contrastive_cluster_loss<'t>(emb: Var<'t>, centroids: Var<'t>, labels: &[usize], tau: f64) -> Result<Var<'t>> {
    let (n, _) = emb.shape();
    let k = centroids.shape().0;
    if k < 2 {
        return Err(Error::DegenerateLoss(
            "cluster loss needs at least two centroids".into(),
        ));
    }
    check_labels(labels, n, k)?;
    let s = emb.cosine_similarity(centroids)?.scale(1.0 / tau)?;
    let positive = s.mul(emb.tape().leaf(selector(n, k, labels.iter().copied())))?.sum()?;
    masked_logsumexp(s, labels, floor(tau))?.sub(positive)
}

/// Pushes centroids apart:
/// `−Σᵢ [ 1/τ − log Σ_{j≠i} exp(sim(cᵢ, cⱼ)/τ) ]`. Zero for one centroid.
pub fn centroid_separation_loss<'t>(centroids: Var<'t>, tau: f64) -> Result<Var<'t>> {
    let k = centroids.shape().0;
    if k < 2 {
        return Ok(centroids.tape().scalar(0.0));
    }
    let s = centroids.cosine_similarity(centroids)?.scale(1.0 / tau)?;
    let diag: Vec<usize> = (0..k).collect();
    let lse = masked_logsumexp(s, &diag, floor(tau))?;
    lse.add(centroids.tape().scalar(-(k as f64) / tau))
}

/// `L_clu + α·L_cen`.
pub fn joint_loss<'t>(emb: Var<'t>, centroids: Var<'t>, labels: &[usize], tau: f64, alpha: f64) -> Result<Var<'t>> {
    let clu = contrastive_cluster_loss(emb, centroids, labels, tau)?;
    if alpha == 0.0 {
        return Ok(clu);
    }
    clu.add(centroid_separation_loss(centroids, tau)?.scale(alpha)?)
}

/// Logit assigned to excluded entries: far enough below the smallest
/// possible cosine logit `−1/τ` that `exp` underflows to zero.
fn floor(tau: f64) -> f64 {
    -(2.0 / tau + 1000.0)
}
