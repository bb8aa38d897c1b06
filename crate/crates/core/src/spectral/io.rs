use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::EigenSystem;
use crate::error::{Error, Result};

pub const EIGEN_MAGIC: &[u8; 4] = b"CTGE";

/// Layout: magic, `u32` n, `u32` k1, `u32` k2, eigenvalues as `f64`, then
/// eigenvectors column-major as `f64`, all little-endian.
pub fn write_eigensystem(path: &Path, eig: &EigenSystem) -> Result<()> {
    let n = eig.n();
    let k = eig.len();
    let mut buf = Vec::with_capacity(16 + 8 * (k + n * k));
    buf.extend_from_slice(EIGEN_MAGIC);
    for v in [n, eig.k1, eig.k2] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in &eig.eigenvalues {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for col in eig.eigenvectors.columns() {
        for v in col {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_eigensystem(path: &Path) -> Result<EigenSystem> {
    let bytes = fs::read(path)?;
    if bytes.len() < 16 || &bytes[..4] != EIGEN_MAGIC {
        return Err(Error::format(path, "missing CTGE header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (n, k1, k2) = (word(0), word(1), word(2));
    let k = k1 + k2;
    if k > n {
        return Err(Error::format(path, format!("k1 + k2 = {k} exceeds n = {n}")));
    }
    let expected = 8 * (k + n * k);
    let body = &bytes[16..];
    if body.len() != expected {
        return Err(Error::format(
            path,
            format!("expected {expected} payload bytes, found {}", body.len()),
        ));
    }
    let floats: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let eigenvalues = floats[..k].to_vec();
    let vecs = &floats[k..];
    let eigenvectors = Array2::from_shape_fn((n, k), |(i, j)| vecs[j * n + i]);
    Ok(EigenSystem {
        eigenvalues,
        eigenvectors,
        k1,
        k2,
        residuals: Vec::new(),
    })
}
