use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::generate::{CondensedGraph, GraphSource, Provenance};
use crate::graph::SparseGraph;

fn check_size(n: usize, m: usize) -> Result<()> {
    if m > n {
        return Err(Error::InvalidConfig(format!("coreset of {m} nodes from {n}")));
    }
    Ok(())
}

/// `m` distinct node indices drawn uniformly, ascending.
pub fn random_coreset(n: usize, m: usize, seed: u64) -> Result<Vec<usize>> {
    check_size(n, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, m).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Greedy farthest-point selection under Euclidean distance, starting from
/// a random node. Indices are returned in selection order.
pub fn kcenter_coreset(emb: &Array2<f64>, m: usize, seed: u64) -> Result<Vec<usize>> {
    let n = emb.nrows();
    check_size(n, m)?;
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![rng.random_range(0..n)];
    let mut nearest = vec![f64::INFINITY; n];
    while chosen.len() < m {
        let last = emb.row(*chosen.last().unwrap());
        let mut far = (0, f64::NEG_INFINITY);
        for (i, d) in nearest.iter_mut().enumerate() {
            let diff = &emb.row(i) - &last;
            *d = d.min(diff.dot(&diff));
            if *d > far.1 {
                far = (i, *d);
            }
        }
        chosen.push(far.0);
    }
    Ok(chosen)
}

/// Condensed graph made of the subgraph induced by `nodes`, their original
/// features and the matching rows of `proxy` as targets.
pub fn coreset_graph(
    graph: &SparseGraph,
    nodes: &[usize],
    proxy: &Array2<f64>,
    source: GraphSource,
) -> Result<CondensedGraph> {
    if proxy.nrows() != graph.n() {
        return Err(Error::shape("proxy embedding rows", graph.n(), proxy.nrows()));
    }
    let sub = graph.induced_subgraph(nodes)?;
    let cg = CondensedGraph {
        adjacency: sub.adjacency().to_dense(),
        features: sub.features().clone(),
        proxy_labels: proxy.select(ndarray::Axis(0), nodes).mapv(|v| v as f32),
        provenance: Provenance {
            source,
            condense: None,
            inversion: None,
            eigenvector_loss: None,
            orthogonality_residual: None,
            attribute_loss: None,
            edges: sub.num_edges(),
        },
    };
    cg.validate()?;
    Ok(cg)
}
