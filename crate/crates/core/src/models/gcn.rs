use ndarray::Array2;
use rand::Rng;

use crate::autodiff::{sparse_matmul, Gradients, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{NormKind, NormalizedOperator};
use crate::linalg::glorot;

/// Hidden width of both relay models.
pub const HIDDEN_DIM: usize = 256;

/// Default output width of both relay models.
pub const EMBED_DIM: usize = 256;

/// Weights of the two-layer GCN `H = Â·ReLU(Â X W1)·W2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
}

/// The GCN weights as leaves on one tape.
#[derive(Debug, Clone, Copy)]
pub struct GcnVars<'t> {
    pub w1: Var<'t>,
    pub w2: Var<'t>,
}

impl GcnParams {
    pub fn init(input_dim: usize, hidden_dim: usize, embed_dim: usize, rng: &mut impl Rng) -> Self {
        Self {
            w1: glorot(input_dim, hidden_dim, rng),
            w2: glorot(hidden_dim, embed_dim, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn embed_dim(&self) -> usize {
        self.w2.ncols()
    }

    pub fn on_tape<'t>(&self, tape: &'t Tape) -> GcnVars<'t> {
        GcnVars {
            w1: tape.leaf(self.w1.clone()),
            w2: tape.leaf(self.w2.clone()),
        }
    }

    pub fn params_mut(&mut self) -> [&mut Array2<f64>; 2] {
        [&mut self.w1, &mut self.w2]
    }

    pub fn validate(&self) -> Result<()> {
        if self.w1.ncols() != self.w2.nrows() {
            return Err(Error::shape(
                "GCN layer widths",
                format!("{} rows in W2", self.w1.ncols()),
                format!("{} rows", self.w2.nrows()),
            ));
        }
        if self.w1.iter().chain(self.w2.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("non-finite GCN weight".into()));
        }
        Ok(())
    }
}

impl<'t> GcnVars<'t> {
    pub fn grads(&self, grads: &Gradients) -> [Array2<f64>; 2] {
        [grads.get(self.w1), grads.get(self.w2)]
    }
}

fn check_operator(a_hat: &NormalizedOperator, n: usize) -> Result<()> {
    if a_hat.kind != NormKind::GcnAdjacency {
        return Err(Error::InvalidConfig(
            "GCN propagation needs the self-loop normalized adjacency".into(),
        ));
    }
    if a_hat.n() != n {
        return Err(Error::shape(
            "GCN operator vs features",
            format!("{n} nodes"),
            format!("{} nodes", a_hat.n()),
        ));
    }
    Ok(())
}

/// Differentiable forward pass; the last layer has no activation.
pub fn gcn_forward<'t>(p: &GcnVars<'t>, a_hat: &NormalizedOperator, x: Var<'t>) -> Result<Var<'t>> {
    check_operator(a_hat, x.shape().0)?;
    let h = sparse_matmul(&a_hat.matrix, x.matmul(p.w1)?)?.relu()?;
    sparse_matmul(&a_hat.matrix, h.matmul(p.w2)?)
}

/// Forward pass without keeping a tape around.
pub fn gcn_apply(p: &GcnParams, a_hat: &NormalizedOperator, x: &Array2<f64>) -> Result<Array2<f64>> {
    check_operator(a_hat, x.nrows())?;
    if x.ncols() != p.input_dim() {
        return Err(Error::shape(
            "GCN input",
            format!("{} columns", p.input_dim()),
            format!("{} columns", x.ncols()),
        ));
    }
    let a = &a_hat.matrix;
    let h = a.matmul_dense(x.dot(&p.w1).view())?.mapv(|v| v.max(0.0));
    a.matmul_dense(h.dot(&p.w2).view())
}
