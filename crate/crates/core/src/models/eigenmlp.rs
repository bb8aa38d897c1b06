use ndarray::Array2;
use rand::Rng;

use crate::autodiff::{Gradients, Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::glorot;
use crate::spectral::EigenSystem;

/// Default number of Fourier frequencies used to encode eigenvalues.
pub const DEFAULT_PERIOD: usize = 16;

/// Structural encoder `Z = ψ(φ(U) + φ(−U)) · ρ(Λ)`.
///
/// `φ` maps a node's positional row (length `k`) through a bias-free linear
/// layer, ReLU, and a biased linear layer. `ψ` is linear + bias, ReLU,
/// linear + bias back to width `k`, so the product with the `k × d_emb`
/// eigenvalue encoding `ρ(Λ) = F(Λ)·W_ρ` conforms.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenMlpParams {
    pub phi1: Array2<f64>,
    pub phi2: Array2<f64>,
    pub phi2_b: Array2<f64>,
    pub psi1: Array2<f64>,
    pub psi1_b: Array2<f64>,
    pub psi2: Array2<f64>,
    pub psi2_b: Array2<f64>,
    pub w_rho: Array2<f64>,
    pub period: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct EigenMlpVars<'t> {
    pub phi1: Var<'t>,
    pub phi2: Var<'t>,
    pub phi2_b: Var<'t>,
    pub psi1: Var<'t>,
    pub psi1_b: Var<'t>,
    pub psi2: Var<'t>,
    pub psi2_b: Var<'t>,
    pub w_rho: Var<'t>,
    pub period: usize,
}

impl EigenMlpParams {
    /// `k` eigenpairs in, `embed_dim` columns out.
    pub fn init(k: usize, hidden_dim: usize, embed_dim: usize, period: usize, rng: &mut impl Rng) -> Self {
        Self {
            phi1: glorot(k, hidden_dim, rng),
            phi2: glorot(hidden_dim, hidden_dim, rng),
            phi2_b: Array2::zeros((1, hidden_dim)),
            psi1: glorot(hidden_dim, hidden_dim, rng),
            psi1_b: Array2::zeros((1, hidden_dim)),
            psi2: glorot(hidden_dim, k, rng),
            psi2_b: Array2::zeros((1, k)),
            w_rho: glorot(2 * period, embed_dim, rng),
            period,
        }
    }

    /// Number of eigenpairs the encoder consumes.
    pub fn k(&self) -> usize {
        self.phi1.nrows()
    }

    pub fn embed_dim(&self) -> usize {
        self.w_rho.ncols()
    }

    pub fn on_tape<'t>(&self, tape: &'t Tape) -> EigenMlpVars<'t> {
        EigenMlpVars {
            phi1: tape.leaf(self.phi1.clone()),
            phi2: tape.leaf(self.phi2.clone()),
            phi2_b: tape.leaf(self.phi2_b.clone()),
            psi1: tape.leaf(self.psi1.clone()),
            psi1_b: tape.leaf(self.psi1_b.clone()),
            psi2: tape.leaf(self.psi2.clone()),
            psi2_b: tape.leaf(self.psi2_b.clone()),
            w_rho: tape.leaf(self.w_rho.clone()),
            period: self.period,
        }
    }

    pub fn params_mut(&mut self) -> [&mut Array2<f64>; 8] {
        [
            &mut self.phi1,
            &mut self.phi2,
            &mut self.phi2_b,
            &mut self.psi1,
            &mut self.psi1_b,
            &mut self.psi2,
            &mut self.psi2_b,
            &mut self.w_rho,
        ]
    }

    pub fn params(&self) -> [&Array2<f64>; 8] {
        [
            &self.phi1,
            &self.phi2,
            &self.phi2_b,
            &self.psi1,
            &self.psi1_b,
            &self.psi2,
            &self.psi2_b,
            &self.w_rho,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        let h = self.phi1.ncols();
        let expected = [
            (k, h),
            (h, h),
            (1, h),
            (h, h),
            (1, h),
            (h, k),
            (1, k),
            (2 * self.period, self.embed_dim()),
        ];
        for (i, (p, want)) in self.params().iter().zip(expected).enumerate() {
            if p.dim() != want {
                return Err(Error::shape(
                    format!("EigenMLP parameter {i}"),
                    format!("{want:?}"),
                    format!("{:?}", p.dim()),
                ));
            }
        }
        if self.params().iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidValue("non-finite EigenMLP weight".into()));
        }
        Ok(())
    }
}

impl<'t> EigenMlpVars<'t> {
    pub fn grads(&self, grads: &Gradients) -> [Array2<f64>; 8] {
        [
            grads.get(self.phi1),
            grads.get(self.phi2),
            grads.get(self.phi2_b),
            grads.get(self.psi1),
            grads.get(self.psi1_b),
            grads.get(self.psi2),
            grads.get(self.psi2_b),
            grads.get(self.w_rho),
        ]
    }

    fn phi(&self, u: Var<'t>) -> Result<Var<'t>> {
        u.matmul(self.phi1)?.relu()?.matmul(self.phi2)?.add_row(self.phi2_b)
    }
}

/// `m × 2T` matrix whose row `i` is `[sin λᵢ, cos λᵢ, …, sin Tλᵢ, cos Tλᵢ]`.
pub fn fourier_basis(eigenvalues: &[f64], period: usize) -> Array2<f64> {
    Array2::from_shape_fn((eigenvalues.len(), 2 * period), |(i, j)| {
        let arg = (j / 2 + 1) as f64 * eigenvalues[i];
        if j % 2 == 0 {
            arg.sin()
        } else {
            arg.cos()
        }
    })
}

/// `ρ(Λ) = F(Λ)·W_ρ`.
pub fn fourier_features(eigenvalues: &[f64], period: usize, w_rho: &Array2<f64>) -> Result<Array2<f64>> {
    if w_rho.nrows() != 2 * period {
        return Err(Error::shape("Fourier weight rows", 2 * period, w_rho.nrows()));
    }
    Ok(fourier_basis(eigenvalues, period).dot(w_rho))
}

/// `ψ(φ(U) + φ(−U))` applied row by row.
pub fn sign_invariant_encode<'t>(p: &EigenMlpVars<'t>, u: Var<'t>) -> Result<Var<'t>> {
    let k = p.phi1.shape().0;
    if u.shape().1 != k {
        return Err(Error::shape("positional rows", k, u.shape().1));
    }
    let sym = p.phi(u)?.add(p.phi(u.neg()?)?)?;
    sym.matmul(p.psi1)?
        .add_row(p.psi1_b)?
        .relu()?
        .matmul(p.psi2)?
        .add_row(p.psi2_b)
}

/// Differentiable structural embedding for eigenpairs `(Λ, U)`.
pub fn eigenmlp_forward<'t>(p: &EigenMlpVars<'t>, eigenvalues: &[f64], u: Var<'t>) -> Result<Var<'t>> {
    let k = p.phi1.shape().0;
    if eigenvalues.len() != k {
        return Err(Error::shape("eigenvalue count", k, eigenvalues.len()));
    }
    let tape = u.tape();
    let basis = tape.leaf(fourier_basis(eigenvalues, p.period));
    let rho = basis.matmul(p.w_rho)?;
    sign_invariant_encode(p, u)?.matmul(rho)
}

/// Structural embeddings of every node of a decomposed graph.
pub fn eigenmlp_apply(p: &EigenMlpParams, eig: &EigenSystem) -> Result<Array2<f64>> {
    let tape = Tape::new();
    let vars = p.on_tape(&tape);
    let u = tape.leaf(eig.eigenvectors.clone());
    let z = eigenmlp_forward(&vars, &eig.eigenvalues, u)?;
    let out = z.value().clone();
    Ok(out)
}
