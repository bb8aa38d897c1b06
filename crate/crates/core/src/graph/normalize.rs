use std::sync::Arc;

use super::{CsrMatrix, SparseGraph};

/// Which symmetric normalization to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// `D̃^{-1/2} (A + I) D̃^{-1/2}`, the GCN propagation operator.
    GcnAdjacency,
    /// `I - D^{-1/2} A D^{-1/2}` on the raw adjacency.
    Laplacian,
}

#[derive(Debug, Clone)]
pub struct NormalizedOperator {
    pub kind: NormKind,
    pub matrix: Arc<CsrMatrix>,
}

impl NormalizedOperator {
    pub fn n(&self) -> usize {
        self.matrix.rows()
    }
}

pub fn normalize(graph: &SparseGraph, kind: NormKind) -> NormalizedOperator {
    normalize_matrix(graph.adjacency(), kind)
}

/// Normalizes a symmetric nonnegative adjacency. Zero-degree rows get a
/// `D^{-1/2}` entry of 0.
pub fn normalize_matrix(adjacency: &CsrMatrix, kind: NormKind) -> NormalizedOperator {
    let n = adjacency.rows();
    let matrix = match kind {
        NormKind::GcnAdjacency => {
            let mut triplets: Vec<_> = adjacency.triplets().filter(|&(r, c, _)| r != c).collect();
            // existing self-loop weights are replaced by the unit loop
            triplets.extend((0..n).map(|i| (i, i, 1.0)));
            let with_loops = CsrMatrix::from_triplets(n, n, triplets).expect("indices already validated");
            let inv_sqrt = inv_sqrt_degrees(&with_loops);
            with_loops.map_values(|r, c, v| inv_sqrt[r] * v * inv_sqrt[c])
        }
        NormKind::Laplacian => {
            let inv_sqrt = inv_sqrt_degrees(adjacency);
            let mut triplets: Vec<_> = adjacency
                .triplets()
                .filter(|&(r, c, _)| r != c)
                .map(|(r, c, v)| (r, c, -inv_sqrt[r] * v * inv_sqrt[c]))
                .collect();
            triplets.extend((0..n).map(|i| {
                let self_loop = adjacency.get(i, i) * inv_sqrt[i] * inv_sqrt[i];
                (i, i, 1.0 - self_loop)
            }));
            CsrMatrix::from_triplets(n, n, triplets).expect("indices already validated")
        }
    };
    NormalizedOperator {
        kind,
        matrix: Arc::new(matrix),
    }
}

fn inv_sqrt_degrees(m: &CsrMatrix) -> Vec<f64> {
    m.row_sums()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect()
}
