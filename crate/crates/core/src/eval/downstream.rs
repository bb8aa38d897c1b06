use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{sparse_matmul, Adam, Tape};
use crate::error::{Error, Result};
use crate::generate::CondensedGraph;
use crate::graph::{normalize, normalize_matrix, CsrMatrix, NormKind, NormalizedOperator, SparseGraph};
use crate::linalg::{glorot, row_normalized};
use crate::models::{gcn_apply, gcn_forward, GcnParams};

/// Architecture of the model trained on a condensed graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    /// Two-layer GCN.
    Gcn,
    /// Two propagation steps followed by one linear map.
    Sgc,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DownstreamModel {
    Gcn(GcnParams),
    Sgc { w: Array2<f64> },
}

impl DownstreamModel {
    pub fn init(arch: Arch, input_dim: usize, hidden_dim: usize, embed_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match arch {
            Arch::Gcn => DownstreamModel::Gcn(GcnParams::init(input_dim, hidden_dim, embed_dim, &mut rng)),
            Arch::Sgc => DownstreamModel::Sgc {
                w: glorot(input_dim, embed_dim, &mut rng),
            },
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            DownstreamModel::Gcn(p) => p.input_dim(),
            DownstreamModel::Sgc { w } => w.nrows(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Array2<f64>> {
        match self {
            DownstreamModel::Gcn(p) => p.params_mut().into_iter().collect(),
            DownstreamModel::Sgc { w } => vec![w],
        }
    }
}

/// Outputs of `model` on the graph behind `a_hat`, without a tape.
pub fn apply(model: &DownstreamModel, a_hat: &NormalizedOperator, x: &Array2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != model.input_dim() {
        return Err(Error::shape("downstream input", model.input_dim(), x.ncols()));
    }
    match model {
        DownstreamModel::Gcn(p) => gcn_apply(p, a_hat, x),
        DownstreamModel::Sgc { w } => {
            let once = a_hat.matrix.matmul_dense(x.view())?;
            Ok(a_hat.matrix.matmul_dense(once.view())?.dot(w))
        }
    }
}

/// Frozen forward pass of `model` over `graph`.
pub fn embed(model: &DownstreamModel, graph: &SparseGraph) -> Result<Array2<f64>> {
    let a_hat = normalize(graph, NormKind::GcnAdjacency);
    apply(model, &a_hat, &graph.features_f64())
}

/// Fits a fresh model on the condensed graph so that its row-normalized
/// outputs match the row-normalized proxy labels in mean squared error.
/// Returns the model and the per-epoch losses.
pub fn train_downstream(
    cg: &CondensedGraph,
    arch: Arch,
    hidden_dim: usize,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<(DownstreamModel, Vec<f64>)> {
    let x = cg.features.mapv(f64::from);
    let target = row_normalized(cg.proxy_labels.mapv(f64::from).view());
    let a_hat = normalize_matrix(&CsrMatrix::from_dense(cg.adjacency.view()), NormKind::GcnAdjacency);
    let mut model = DownstreamModel::init(arch, x.ncols(), hidden_dim, target.ncols(), seed);
    let mut opt = Adam::new(lr);
    let mut trace = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let (out, leaves) = match &model {
            DownstreamModel::Gcn(p) => {
                let vars = p.on_tape(&tape);
                (gcn_forward(&vars, &a_hat, xv)?, vec![vars.w1, vars.w2])
            }
            DownstreamModel::Sgc { w } => {
                let w = tape.leaf(w.clone());
                let once = sparse_matmul(&a_hat.matrix, xv)?;
                (sparse_matmul(&a_hat.matrix, once)?.matmul(w)?, vec![w])
            }
        };
        let loss = out.row_l2_normalize()?.mse(tape.leaf(target.clone()))?;
        let value = loss.item();
        if !value.is_finite() {
            return Err(Error::NumericalOverflow(format!("downstream loss at epoch {epoch}")));
        }
        trace.push(value);
        let grads = tape.backward(loss)?;
        let grads: Vec<Array2<f64>> = leaves.iter().map(|&v| grads.get(v)).collect();
        opt.step(&mut model.params_mut(), &grads);
    }
    Ok((model, trace))
}
