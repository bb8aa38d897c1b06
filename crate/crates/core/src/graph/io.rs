//! Edge-list, feature-matrix and label file formats.
//!
//! Feature files are binary: magic `CTGF`, `u32` rows, `u32` cols, then
//! `rows * cols` little-endian `f32` values in row-major order. Header-free
//! comma-separated text is accepted as a fallback when the magic is absent.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use super::SparseGraph;
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"CTGF";

pub fn load_graph(edge_path: &Path, feature_path: &Path, label_path: Option<&Path>) -> Result<SparseGraph> {
    let features = read_features(feature_path)?;
    let n = features.nrows();
    let edges = read_edges(edge_path)?;
    if let Some(&(u, v, _)) = edges.iter().find(|&&(u, v, _)| u >= n || v >= n) {
        let index = u.max(v);
        return Err(Error::IndexOutOfRange { index, n });
    }
    let labels = label_path.map(read_labels).transpose()?;
    if let Some(labels) = &labels {
        if labels.len() != n {
            return Err(Error::shape("label rows", n, labels.len()));
        }
    }
    SparseGraph::from_edges(n, &edges, features, labels)
}

/// Parses `u v [w]` lines; `#` starts a comment.
pub fn read_edges(path: &Path) -> Result<Vec<(usize, usize, f64)>> {
    let text = fs::read_to_string(path)?;
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            reason,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 && fields.len() != 3 {
            return Err(parse_err(format!("expected 2 or 3 fields, got {}", fields.len())));
        }
        let u: usize = fields[0].parse().map_err(|e| parse_err(format!("{e}")))?;
        let v: usize = fields[1].parse().map_err(|e| parse_err(format!("{e}")))?;
        let w: f64 = match fields.get(2) {
            Some(s) => s.parse().map_err(|e| parse_err(format!("{e}")))?,
            None => 1.0,
        };
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidValue(format!("edge weight {w} on line {}", lineno + 1)));
        }
        edges.push((u, v, w));
    }
    Ok(edges)
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                reason: format!("{e}"),
            })
        })
        .collect()
}

pub fn read_features(path: &Path) -> Result<Array2<f32>> {
    let bytes = fs::read(path)?;
    let features = if bytes.starts_with(FEATURE_MAGIC) {
        decode_features(&bytes).map_err(|reason| Error::format(path, reason))?
    } else {
        parse_csv_features(path, &bytes)?
    };
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidValue(format!("non-finite feature in {}", path.display())));
    }
    Ok(features)
}

pub fn write_features(path: &Path, features: &Array2<f32>) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&encode_features(features))?;
    Ok(())
}

pub fn encode_features(features: &Array2<f32>) -> Vec<u8> {
    let (rows, cols) = features.dim();
    let mut buf = Vec::with_capacity(12 + rows * cols * 4);
    buf.extend_from_slice(FEATURE_MAGIC);
    buf.extend_from_slice(&(rows as u32).to_le_bytes());
    buf.extend_from_slice(&(cols as u32).to_le_bytes());
    for v in features.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_features(bytes: &[u8]) -> std::result::Result<Array2<f32>, String> {
    if bytes.len() < 12 || &bytes[..4] != FEATURE_MAGIC {
        return Err("missing CTGF header".into());
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(4))
        .ok_or("shape header overflows")?;
    let body = &bytes[12..];
    if body.len() != expected {
        return Err(format!(
            "header declares {rows}x{cols} ({expected} bytes) but body has {} bytes",
            body.len()
        ));
    }
    let values: Vec<f32> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Array2::from_shape_vec((rows, cols), values).map_err(|e| e.to_string())
}

fn parse_csv_features(path: &Path, bytes: &[u8]) -> Result<Array2<f32>> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::format(path, "neither CTGF binary nor UTF-8 CSV"))?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f32> = line
            .split(',')
            .map(|f| {
                f.trim().parse::<f32>().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    reason: format!("{e}"),
                })
            })
            .collect::<Result<_>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => return Err(Error::shape(format!("CSV row {}", i + 1), c, row.len())),
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    Ok(Array2::from_shape_vec((rows, cols), values).expect("row lengths checked"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write(dir: &Path, name: &str, contents: &[u8]) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, contents).unwrap();
        p
    }

    #[test]
    fn minimal_and_edgeless() {
        let dir = tempfile::tempdir().unwrap();
        let feats = dir.path().join("x.bin");
        write_features(&feats, &Array2::zeros((2, 3))).unwrap();
        let edges = write(dir.path(), "e.txt", b"# comment\n0 1\n");
        let g = load_graph(&edges, &feats, None).unwrap();
        assert_eq!((g.n(), g.num_edges()), (2, 1));

        let feats4 = dir.path().join("x4.bin");
        write_features(&feats4, &Array2::ones((4, 2))).unwrap();
        let empty = write(dir.path(), "empty.txt", b"");
        let g = load_graph(&empty, &feats4, None).unwrap();
        assert_eq!((g.n(), g.num_edges()), (4, 0));
    }

    #[test]
    fn duplicate_edges_keep_max_weight() {
        let dir = tempfile::tempdir().unwrap();
        let feats = write(dir.path(), "x.csv", b"1,2\n3,4\n");
        let edges = write(dir.path(), "e.txt", b"0 1 0.5\n1 0 2.0\n");
        let g = load_graph(&edges, &feats, None).unwrap();
        assert_eq!(g.adjacency().get(0, 1), 2.0);
        assert_eq!(g.adjacency().get(1, 0), 2.0);
        assert_eq!(g.features()[[1, 0]], 3.0);
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let feats = dir.path().join("x.bin");
        write_features(&feats, &Array2::zeros((2, 3))).unwrap();
        let bad = write(dir.path(), "e.txt", b"0 2\n");
        assert!(matches!(
            load_graph(&bad, &feats, None),
            Err(Error::IndexOutOfRange { index: 2, n: 2 })
        ));

        let nan = write(dir.path(), "nan.csv", b"1,NaN\n");
        let ok_edges = write(dir.path(), "ok.txt", b"");
        assert!(matches!(load_graph(&ok_edges, &nan, None), Err(Error::InvalidValue(_))));

        let labels = write(dir.path(), "y.txt", b"0\n1\n2\n");
        assert!(matches!(
            load_graph(&ok_edges, &feats, Some(&labels)),
            Err(Error::ShapeMismatch { .. })
        ));

        let mut truncated = encode_features(&Array2::zeros((2, 3)));
        truncated.pop();
        let t = write(dir.path(), "t.bin", &truncated);
        assert!(matches!(read_features(&t), Err(Error::FormatError { .. })));
    }

    proptest! {
        #[test]
        fn feature_codec_round_trips(rows in 0usize..6, cols in 0usize..6, seed in any::<u64>()) {
            let m = Array2::from_shape_fn((rows, cols), |(i, j)| {
                ((seed.wrapping_mul(31).wrapping_add((i * 7 + j) as u64) % 1000) as f32) / 7.0 - 50.0
            });
            let back = decode_features(&encode_features(&m)).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
