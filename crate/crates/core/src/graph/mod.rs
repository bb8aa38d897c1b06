//! Graph representation, normalization operators, file IO, synthetic
//! generators and link splits.

mod csr;
pub mod io;
mod normalize;
mod split;
mod synth;

use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::Array2;

pub use csr::CsrMatrix;
pub use io::{load_graph, read_features, read_labels, write_features};
pub use normalize::{normalize, normalize_matrix, NormKind, NormalizedOperator};
pub use split::{split_links, Edge, LinkSplit, SplitPart};
pub use synth::{generate_sbm, generate_sbm_with_noise, knn_graph, SBM_NOISE_STD};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-9;

/// Undirected graph with a symmetric weighted adjacency, node features
/// and optional node labels.
///
/// Labels are evaluation-only. Every call to [`SparseGraph::labels`] is
/// counted so tests can prove that a pipeline stage never looked at them.
#[derive(Debug)]
pub struct SparseGraph {
    adjacency: CsrMatrix,
    features: Array2<f32>,
    labels: Option<Vec<usize>>,
    num_classes: usize,
    label_reads: AtomicUsize,
}

impl Clone for SparseGraph {
    fn clone(&self) -> Self {
        Self {
            adjacency: self.adjacency.clone(),
            features: self.features.clone(),
            labels: self.labels.clone(),
            num_classes: self.num_classes,
            label_reads: AtomicUsize::new(0),
        }
    }
}

impl SparseGraph {
    pub fn new(adjacency: CsrMatrix, features: Array2<f32>, labels: Option<Vec<usize>>) -> Result<Self> {
        let n = adjacency.rows();
        if adjacency.cols() != n {
            return Err(Error::shape(
                "adjacency",
                "square",
                format!("{}x{}", n, adjacency.cols()),
            ));
        }
        if features.nrows() != n {
            return Err(Error::shape("feature rows", n, features.nrows()));
        }
        let asym = adjacency.max_asymmetry();
        if asym > SYMMETRY_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        if let Some(w) = adjacency.data().iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidValue(format!("edge weight {w}")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("non-finite feature".into()));
        }
        let mut num_classes = 0;
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::shape("labels", n, labels.len()));
            }
            num_classes = labels.iter().max().map_or(0, |m| m + 1);
        }
        Ok(Self {
            adjacency,
            features,
            labels,
            num_classes,
            label_reads: AtomicUsize::new(0),
        })
    }

    /// Builds a graph from undirected `(u, v, w)` edges. Self-loops are
    /// dropped and duplicates collapse to their maximum weight.
    pub fn from_edges(
        n: usize,
        edges: &[(usize, usize, f64)],
        features: Array2<f32>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        let mut triplets = Vec::with_capacity(edges.len() * 2);
        for &(u, v, w) in edges {
            for idx in [u, v] {
                if idx >= n {
                    return Err(Error::IndexOutOfRange { index: idx, n });
                }
            }
            if u == v {
                continue;
            }
            triplets.push((u, v, w));
            triplets.push((v, u, w));
        }
        let adjacency = CsrMatrix::from_triplets(n, n, triplets)?;
        Self::new(adjacency, features, labels)
    }

    pub fn n(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    pub fn features(&self) -> &Array2<f32> {
        &self.features
    }

    pub fn features_f64(&self) -> Array2<f64> {
        self.features.mapv(f64::from)
    }

    /// Node labels, if any. Each call is recorded; see [`Self::label_reads`].
    pub fn labels(&self) -> Option<&[usize]> {
        self.label_reads.fetch_add(1, Ordering::SeqCst);
        self.labels.as_deref()
    }

    pub fn has_labels(&self) -> bool {
        self.labels.is_some()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Number of times [`Self::labels`] has been called on this instance.
    pub fn label_reads(&self) -> usize {
        self.label_reads.load(Ordering::SeqCst)
    }

    /// Undirected edges `(u, v, w)` with `u < v`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.adjacency.triplets().filter(|&(u, v, _)| u < v).collect()
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.triplets().filter(|&(u, v, _)| u < v).count()
    }

    /// Copy of this graph with a different edge set, same features and labels.
    pub fn with_edges(&self, edges: &[(usize, usize, f64)]) -> Result<Self> {
        Self::from_edges(self.n(), edges, self.features.clone(), self.labels.clone())
    }

    /// Subgraph induced by `nodes`, in the given order.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Self> {
        let n = self.n();
        let mut position = vec![usize::MAX; n];
        for (new, &old) in nodes.iter().enumerate() {
            if old >= n {
                return Err(Error::IndexOutOfRange { index: old, n });
            }
            position[old] = new;
        }
        let edges: Vec<_> = self
            .edges()
            .into_iter()
            .filter(|&(u, v, _)| position[u] != usize::MAX && position[v] != usize::MAX)
            .map(|(u, v, w)| (position[u], position[v], w))
            .collect();
        let features = self.features.select(ndarray::Axis(0), nodes);
        let labels = self.labels.as_ref().map(|l| nodes.iter().map(|&i| l[i]).collect());
        Self::from_edges(nodes.len(), &edges, features, labels)
    }
}
