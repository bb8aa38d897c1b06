use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{CondensedGraph, Provenance};
use crate::error::{Error, Result};
use crate::graph::io::{decode_features, FEATURE_MAGIC};
use crate::graph::write_features;

pub const ADJACENCY_MAGIC: &[u8; 4] = b"CTGA";

const ADJACENCY_FILE: &str = "adjacency.ctgf-dense";
const FEATURES_FILE: &str = "features.ctgf";
const PROXY_FILE: &str = "proxy_labels.ctgf";
const PROVENANCE_FILE: &str = "provenance.json";

fn encode_adjacency(a: &Array2<f64>) -> Vec<u8> {
    let mut buf = Vec::with_capacity(8 + 8 * a.len());
    buf.extend_from_slice(ADJACENCY_MAGIC);
    buf.extend_from_slice(&(a.nrows() as u32).to_le_bytes());
    for v in a.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

fn decode_adjacency(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::format(path, e.to_string()))?;
    if bytes.len() < 8 || &bytes[..4] != ADJACENCY_MAGIC {
        return Err(Error::format(path, "missing CTGA header"));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = &bytes[8..];
    if body.len() != 8 * n * n {
        return Err(Error::format(
            path,
            format!(
                "expected {} payload bytes for {n} nodes, found {}",
                8 * n * n,
                body.len()
            ),
        ));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Array2::from_shape_vec((n, n), values).expect("length checked"))
}

/// Writes the condensed graph as a directory of four files.
pub fn save_condensed(cg: &CondensedGraph, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(ADJACENCY_FILE), encode_adjacency(&cg.adjacency))?;
    write_features(&dir.join(FEATURES_FILE), &cg.features)?;
    write_features(&dir.join(PROXY_FILE), &cg.proxy_labels)?;
    fs::write(dir.join(PROVENANCE_FILE), serde_json::to_vec_pretty(&cg.provenance)?)?;
    Ok(())
}

pub fn load_condensed(dir: &Path) -> Result<CondensedGraph> {
    let adjacency = decode_adjacency(&dir.join(ADJACENCY_FILE))?;
    let load = |name: &str| -> Result<Array2<f32>> {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(|e| Error::format(&path, e.to_string()))?;
        if !bytes.starts_with(FEATURE_MAGIC) {
            return Err(Error::format(&path, "missing CTGF header"));
        }
        decode_features(&bytes).map_err(|reason| Error::format(&path, reason))
    };
    let features = load(FEATURES_FILE)?;
    let proxy_labels = load(PROXY_FILE)?;
    let prov_path = dir.join(PROVENANCE_FILE);
    let prov_bytes = fs::read(&prov_path).map_err(|e| Error::format(&prov_path, e.to_string()))?;
    let provenance: Provenance =
        serde_json::from_slice(&prov_bytes).map_err(|e| Error::format(&prov_path, e.to_string()))?;
    let cg = CondensedGraph {
        adjacency,
        features,
        proxy_labels,
        provenance,
    };
    cg.validate().map_err(|e| Error::format(dir, e.to_string()))?;
    Ok(cg)
}
