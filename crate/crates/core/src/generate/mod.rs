//! Synthesis of the condensed graph by inverting the trained relay models:
//! eigenvectors from the structural centroids, an adjacency matrix from
//! those eigenvectors, then node attributes from the semantic centroids.

mod store;

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use store::{load_condensed, save_condensed, ADJACENCY_MAGIC};

use crate::autodiff::{Adam, Tape, Var};
use crate::condense::{CondensationState, CondenseConfig};
use crate::error::{Error, Result};
use crate::graph::{normalize_matrix, CsrMatrix, NormKind};
use crate::linalg::{gaussian, orthogonality_residual, orthonormalize_columns};
use crate::models::{eigenmlp_forward, gcn_forward, EigenMlpParams, GcnParams};

/// Final learning rate as a fraction of the initial one.
const LR_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InversionConfig {
    pub steps: usize,
    pub lr: f64,
    /// Weight of the orthogonality penalty on the recovered eigenvectors.
    pub ortho_weight: f64,
    /// Adjacency entries below this are dropped.
    pub threshold: f64,
    pub seed: u64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            lr: 0.01,
            ortho_weight: 1.0,
            threshold: 0.01,
            seed: 0,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "inversion lr must be positive, got {}",
                self.lr
            )));
        }
        if !(self.threshold >= 0.0) || !(self.ortho_weight >= 0.0) {
            return Err(Error::InvalidConfig(
                "threshold and ortho_weight must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Learning-rate schedule of one Adam run: cosine decay from `lr` to
/// `lr · LR_FLOOR` over `steps`.
#[derive(Debug, Clone, Copy)]
struct Schedule {
    steps: usize,
    lr: f64,
}

impl Schedule {
    fn lr_at(&self, step: usize) -> f64 {
        let t = step as f64 / self.steps.max(1) as f64;
        let scale = LR_FLOOR + (1.0 - LR_FLOOR) * 0.5 * (1.0 + (std::f64::consts::PI * t).cos());
        self.lr * scale
    }
}

/// Recovered input and how well it reproduces the target.
#[derive(Debug, Clone, PartialEq)]
pub struct Inversion {
    pub value: Array2<f64>,
    /// Objective at `value`.
    pub loss: f64,
    /// Objective after every step.
    pub trace: Vec<f64>,
}

/// Gradient descent on `input` with a fresh tape per step, keeping the best
/// iterate seen.
fn minimise<F>(init: Array2<f64>, cfg: Schedule, what: &'static str, objective: F) -> Result<Inversion>
where
    F: for<'t> Fn(&'t Tape, Var<'t>) -> Result<Var<'t>>,
{
    let eval = |x: &Array2<f64>| -> Result<f64> {
        let tape = Tape::new();
        Ok(objective(&tape, tape.leaf(x.clone()))?.item())
    };
    let mut x = init;
    let mut best = (eval(&x)?, x.clone());
    let mut trace = Vec::with_capacity(cfg.steps);
    let mut opt = Adam::new(cfg.lr);
    for step in 0..cfg.steps {
        let tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let loss = objective(&tape, xv).map_err(|_| Error::InversionDiverged {
            step,
            what: what.into(),
        })?;
        let value = loss.item();
        if !value.is_finite() {
            return Err(Error::InversionDiverged {
                step,
                what: what.into(),
            });
        }
        if value < best.0 {
            best = (value, x.clone());
        }
        let grad = tape.backward(loss)?.get(xv);
        opt.lr = cfg.lr_at(step);
        opt.step(&mut [&mut x], &[grad]);
        trace.push(value);
    }
    if cfg.steps > 0 {
        let last = eval(&x).map_err(|_| Error::InversionDiverged {
            step: cfg.steps,
            what: what.into(),
        })?;
        if !last.is_finite() {
            return Err(Error::InversionDiverged {
                step: cfg.steps,
                what: what.into(),
            });
        }
        if last < best.0 {
            best = (last, x);
        }
    }
    Ok(Inversion {
        value: best.1,
        loss: best.0,
        trace,
    })
}

/// Orthonormalized seeded Gaussian `k × k` matrix.
pub fn orthonormal_init(k: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut u = gaussian(k, k, &mut rng);
        if orthonormalize_columns(&mut u) {
            return u;
        }
    }
}

/// `‖Z′ − g(Λ′, s·U′)‖_F + w·‖I − U′ᵀU′‖_F`, where `s` is `input_scale`.
pub fn eigenvector_objective<'t>(
    g: &EigenMlpParams,
    z_cent: &Array2<f64>,
    lambda: &[f64],
    input_scale: f64,
    ortho_weight: f64,
    u: Var<'t>,
) -> Result<Var<'t>> {
    let tape = u.tape();
    let z = eigenmlp_forward(&g.on_tape(tape), lambda, u.scale(input_scale)?)?;
    let fit = tape.leaf(z_cent.clone()).sub(z)?.frobenius()?;
    if ortho_weight == 0.0 {
        return Ok(fit);
    }
    let k = u.shape().1;
    let gram = u.transpose()?.matmul(u)?;
    let ortho = tape.leaf(Array2::eye(k)).sub(gram)?.frobenius()?;
    fit.add(ortho.scale(ortho_weight)?)
}

/// Finds eigenvectors `U′` whose structural embedding matches `Z′`.
///
/// Unit eigenvectors of an `N′`-node graph have entries about
/// `sqrt(N / N′)` times larger than those of the `N`-node graph the
/// structural model was trained on, so rows are fed to the model scaled by
/// `input_scale`, normally `sqrt(N′ / N)`.
pub fn invert_eigenvectors(
    g: &EigenMlpParams,
    z_cent: &Array2<f64>,
    lambda: &[f64],
    input_scale: f64,
    cfg: &InversionConfig,
) -> Result<Inversion> {
    cfg.validate()?;
    let k = g.k();
    if z_cent.dim() != (k, g.embed_dim()) || lambda.len() != k {
        return Err(Error::shape(
            "structural centroids",
            format!("{k}x{} with {k} eigenvalues", g.embed_dim()),
            format!("{:?} with {} eigenvalues", z_cent.dim(), lambda.len()),
        ));
    }
    let init = orthonormal_init(k, cfg.seed);
    let schedule = Schedule {
        steps: cfg.steps,
        lr: cfg.lr,
    };
    minimise(init, schedule, "eigenvectors", |_, u| {
        eigenvector_objective(g, z_cent, lambda, input_scale, cfg.ortho_weight, u)
    })
}

/// `I − U′ diag(Λ′) U′ᵀ` with no post-processing.
pub fn raw_adjacency(u: ArrayView2<'_, f64>, lambda: &[f64]) -> Array2<f64> {
    let k = u.nrows();
    let mut scaled = u.to_owned();
    for (mut col, &l) in scaled.columns_mut().into_iter().zip(lambda) {
        col *= l;
    }
    Array2::eye(k) - scaled.dot(&u.t())
}

/// Raw reconstruction made usable as a graph: symmetrized, zero diagonal,
/// negatives clipped and entries below `threshold` dropped.
pub fn reconstruct_adjacency(u: ArrayView2<'_, f64>, lambda: &[f64], threshold: f64) -> Array2<f64> {
    let raw = raw_adjacency(u, lambda);
    let mut a = (&raw + &raw.t()) * 0.5;
    for ((i, j), v) in a.indexed_iter_mut() {
        if i == j || *v < threshold || *v < 0.0 {
            *v = 0.0;
        }
    }
    a
}

/// `‖H′ − f(Â′, X′)‖_F`.
pub fn attribute_objective<'t>(
    f: &GcnParams,
    a_hat: &crate::graph::NormalizedOperator,
    h_cent: &Array2<f64>,
    x: Var<'t>,
) -> Result<Var<'t>> {
    let tape = x.tape();
    let h = gcn_forward(&f.on_tape(tape), a_hat, x)?;
    tape.leaf(h_cent.clone()).sub(h)?.frobenius()
}

/// Finds node attributes whose semantic embedding on `adjacency` matches
/// `H′`. The search starts from Gaussian noise scaled per column by
/// `feature_std`.
pub fn invert_attributes(
    f: &GcnParams,
    h_cent: &Array2<f64>,
    adjacency: &Array2<f64>,
    feature_std: &[f64],
    cfg: &InversionConfig,
) -> Result<Inversion> {
    cfg.validate()?;
    let k = adjacency.nrows();
    if h_cent.dim() != (k, f.embed_dim()) || feature_std.len() != f.input_dim() {
        return Err(Error::shape(
            "semantic centroids",
            format!("{k}x{} with {} feature scales", f.embed_dim(), f.input_dim()),
            format!("{:?} with {} feature scales", h_cent.dim(), feature_std.len()),
        ));
    }
    let a_hat = normalize_matrix(&CsrMatrix::from_dense(adjacency.view()), NormKind::GcnAdjacency);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut init = gaussian(k, f.input_dim(), &mut rng);
    for (mut col, &s) in init.columns_mut().into_iter().zip(feature_std) {
        col *= s;
    }
    let schedule = Schedule {
        steps: cfg.steps,
        lr: cfg.lr,
    };
    minimise(init, schedule, "attributes", |_, x| {
        attribute_objective(f, &a_hat, h_cent, x)
    })
}

/// How the structure of a condensed graph was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphSource {
    /// Eigenvector inversion and spectral reconstruction.
    Inversion,
    /// k-nearest-neighbour graph over the inverted attributes.
    Knn,
    /// Induced subgraph on a k-center coreset.
    KCenter,
    /// Induced subgraph on a uniformly random coreset.
    Random,
}

/// Diagnostics kept alongside a condensed graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: GraphSource,
    pub condense: Option<CondenseConfig>,
    pub inversion: Option<InversionConfig>,
    pub eigenvector_loss: Option<f64>,
    pub orthogonality_residual: Option<f64>,
    pub attribute_loss: Option<f64>,
    pub edges: usize,
}

/// A small weighted graph with node attributes and target embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedGraph {
    /// Symmetric, non-negative, zero diagonal.
    pub adjacency: Array2<f64>,
    pub features: Array2<f32>,
    /// Target embeddings `H′`.
    pub proxy_labels: Array2<f32>,
    pub provenance: Provenance,
}

impl CondensedGraph {
    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn num_edges(&self) -> usize {
        let mut count = 0;
        for i in 0..self.n() {
            for j in (i + 1)..self.n() {
                if self.adjacency[[i, j]] > 0.0 {
                    count += 1;
                }
            }
        }
        count
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.adjacency.ncols() != n || self.features.nrows() != n || self.proxy_labels.nrows() != n {
            return Err(Error::shape(
                "condensed graph parts",
                format!("{n} rows each"),
                format!(
                    "adjacency {:?}, features {:?}, proxy labels {:?}",
                    self.adjacency.dim(),
                    self.features.dim(),
                    self.proxy_labels.dim()
                ),
            ));
        }
        for ((i, j), &v) in self.adjacency.indexed_iter() {
            if !v.is_finite() || v < 0.0 || (i == j && v != 0.0) || v != self.adjacency[[j, i]] {
                return Err(Error::InvalidValue(format!(
                    "bad condensed adjacency entry ({i}, {j}) = {v}"
                )));
            }
        }
        if self
            .features
            .iter()
            .chain(self.proxy_labels.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidValue("non-finite condensed features".into()));
        }
        Ok(())
    }
}

/// Runs all three generation steps. `lambda` are the eigenvalues the
/// structural model was trained on.
pub fn generate(
    f: &GcnParams,
    g: &EigenMlpParams,
    state: &CondensationState,
    lambda: &[f64],
    feature_std: &[f64],
    condense: Option<CondenseConfig>,
    cfg: &InversionConfig,
) -> Result<CondensedGraph> {
    let scale = (state.z_cent.nrows() as f64 / state.y_h.len().max(1) as f64).sqrt();
    let u = invert_eigenvectors(g, &state.z_cent, lambda, scale, cfg)?;
    let adjacency = reconstruct_adjacency(u.value.view(), lambda, cfg.threshold);
    let mut cg = assemble(f, &state.h_cent, adjacency, feature_std, condense, cfg)?;
    cg.provenance.eigenvector_loss = Some(u.loss);
    cg.provenance.orthogonality_residual = Some(orthogonality_residual(u.value.view()));
    Ok(cg)
}

/// Attribute inversion on a given structure, then packaging. The result is
/// marked as coming from inversion; callers supplying their own structure
/// relabel the source.
pub fn assemble(
    f: &GcnParams,
    h_cent: &Array2<f64>,
    adjacency: Array2<f64>,
    feature_std: &[f64],
    condense: Option<CondenseConfig>,
    cfg: &InversionConfig,
) -> Result<CondensedGraph> {
    let x = invert_attributes(f, h_cent, &adjacency, feature_std, cfg)?;
    let mut cg = CondensedGraph {
        adjacency,
        features: x.value.mapv(|v| v as f32),
        proxy_labels: h_cent.mapv(|v| v as f32),
        provenance: Provenance {
            source: GraphSource::Inversion,
            condense,
            inversion: Some(cfg.clone()),
            eigenvector_loss: None,
            orthogonality_residual: None,
            attribute_loss: Some(x.loss),
            edges: 0,
        },
    };
    cg.provenance.edges = cg.num_edges();
    cg.validate()?;
    Ok(cg)
}

#[cfg(test)]
mod tests;
