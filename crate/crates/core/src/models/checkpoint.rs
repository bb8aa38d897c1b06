use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{EigenMlpParams, GcnParams};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"CTGM";

const KIND_GCN: u8 = b'G';
const KIND_EIGENMLP: u8 = b'E';

/// Layout: magic, kind byte, `u32` period (0 for GCN), `u32` tensor count,
/// `(u32 rows, u32 cols)` per tensor, then every tensor row-major as `f64`.
/// All little-endian.
fn encode(kind: u8, period: usize, tensors: &[&Array2<f64>]) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MODEL_MAGIC);
    buf.push(kind);
    buf.extend_from_slice(&(period as u32).to_le_bytes());
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        buf.extend_from_slice(&(t.nrows() as u32).to_le_bytes());
        buf.extend_from_slice(&(t.ncols() as u32).to_le_bytes());
    }
    for t in tensors {
        for v in t.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

fn decode(path: &Path, want_kind: u8) -> Result<(usize, Vec<Array2<f64>>)> {
    let bytes = fs::read(path)?;
    let bad = |reason: String| Error::format(path, reason);
    if bytes.len() < 13 || &bytes[..4] != MODEL_MAGIC {
        return Err(bad("missing CTGM header".into()));
    }
    if bytes[4] != want_kind {
        return Err(bad(format!("checkpoint holds model kind {:?}", bytes[4] as char)));
    }
    let mut pos = 5;
    let mut word = |bytes: &[u8]| -> Result<usize> {
        let w = bytes.get(pos..pos + 4).ok_or_else(|| bad("truncated header".into()))?;
        pos += 4;
        Ok(u32::from_le_bytes(w.try_into().unwrap()) as usize)
    };
    let period = word(&bytes)?;
    let count = word(&bytes)?;
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        shapes.push((word(&bytes)?, word(&bytes)?));
    }
    let total: usize = shapes.iter().map(|(r, c)| r * c).sum();
    let body = &bytes[pos..];
    if body.len() != 8 * total {
        return Err(bad(format!(
            "expected {} payload bytes, found {}",
            8 * total,
            body.len()
        )));
    }
    let mut floats = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let tensors = shapes
        .into_iter()
        .map(|(r, c)| Array2::from_shape_simple_fn((r, c), || floats.next().unwrap()))
        .collect();
    Ok((period, tensors))
}

pub fn save_gcn(path: &Path, p: &GcnParams) -> Result<()> {
    fs::write(path, encode(KIND_GCN, 0, &[&p.w1, &p.w2]))?;
    Ok(())
}

pub fn load_gcn(path: &Path) -> Result<GcnParams> {
    let (_, tensors) = decode(path, KIND_GCN)?;
    let [w1, w2]: [Array2<f64>; 2] = tensors
        .try_into()
        .map_err(|_| Error::format(path, "GCN checkpoint needs 2 tensors"))?;
    let p = GcnParams { w1, w2 };
    p.validate().map_err(|e| Error::format(path, e.to_string()))?;
    Ok(p)
}

pub fn save_eigenmlp(path: &Path, p: &EigenMlpParams) -> Result<()> {
    fs::write(path, encode(KIND_EIGENMLP, p.period, &p.params()))?;
    Ok(())
}

pub fn load_eigenmlp(path: &Path) -> Result<EigenMlpParams> {
    let (period, tensors) = decode(path, KIND_EIGENMLP)?;
    let [phi1, phi2, phi2_b, psi1, psi1_b, psi2, psi2_b, w_rho]: [Array2<f64>; 8] = tensors
        .try_into()
        .map_err(|_| Error::format(path, "EigenMLP checkpoint needs 8 tensors"))?;
    let p = EigenMlpParams {
        phi1,
        phi2,
        phi2_b,
        psi1,
        psi1_b,
        psi2,
        psi2_b,
        w_rho,
        period,
    };
    p.validate().map_err(|e| Error::format(path, e.to_string()))?;
    Ok(p)
}
