//! End-to-end orchestration: decompose, condense, synthesize, evaluate,
//! plus the ablation variants and coreset baselines.

use serde::{Deserialize, Serialize};

use crate::condense::{
    alternating_optimize, init_relay_models, pretrain_semantic, semantic_only, CondensationState, CondenseConfig,
    PretrainReport,
};
use crate::error::{Error, Result};
use crate::eval::{coreset_graph, evaluate, kcenter_coreset, random_coreset, EvalConfig, EvalReport};
use crate::generate::{assemble, generate, CondensedGraph, GraphSource, InversionConfig};
use crate::graph::{knn_graph, normalize, LinkSplit, NormKind, SparseGraph};
use crate::linalg::column_std;
use crate::models::{gcn_apply, EigenMlpParams, GcnParams};
use crate::spectral::{band_split, compute_eigensystem, EigenSystem, DEFAULT_TOL};

/// Neighbours per node when a variant builds structure from attributes.
pub const KNN_NEIGHBOURS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Full,
    /// Structure from a kNN graph over the synthesized attributes.
    WKnn,
    /// No centroid separation term (`alpha = 0`).
    WoLcen,
    /// No shuffled-feature pretraining of the semantic model.
    WoInit,
    /// A single alternating iteration.
    WoIter,
    /// Semantic branch only; structure from a kNN graph.
    WoStr,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Full,
        Variant::WKnn,
        Variant::WoLcen,
        Variant::WoInit,
        Variant::WoIter,
        Variant::WoStr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::WKnn => "w-knn",
            Variant::WoLcen => "wo-lcen",
            Variant::WoInit => "wo-init",
            Variant::WoIter => "wo-iter",
            Variant::WoStr => "wo-str",
        }
    }

    /// Condensation settings this variant runs with.
    pub fn apply(self, cfg: &CondenseConfig) -> CondenseConfig {
        let mut cfg = cfg.clone();
        match self {
            Variant::WoLcen => cfg.alpha = 0.0,
            Variant::WoInit => cfg.pretrain = false,
            Variant::WoIter => cfg.k_iter = 1,
            Variant::Full | Variant::WKnn | Variant::WoStr => {}
        }
        cfg
    }

    pub fn uses_structure_branch(self) -> bool {
        self != Variant::WoStr
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s.to_ascii_lowercase())
            .ok_or_else(|| {
                let names: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
                Error::InvalidConfig(format!("unknown variant {s:?} (expected one of {})", names.join(", ")))
            })
    }
}

/// Everything needed to go from a graph to an evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub condense: CondenseConfig,
    #[serde(default)]
    pub inversion: InversionConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.condense.validate()?;
        self.inversion.validate()?;
        self.eval.validate()
    }
}

/// Relay models and centroids after training.
#[derive(Debug, Clone)]
pub struct Condensation {
    pub config: CondenseConfig,
    pub pretrain: Option<PretrainReport>,
    pub state: CondensationState,
    pub f: GcnParams,
    /// Absent when the structural branch was dropped.
    pub g: Option<EigenMlpParams>,
}

/// Band-split eigenpairs of the normalized Laplacian for `n_prime`
/// condensed nodes.
pub fn decompose(graph: &SparseGraph, n_prime: usize, seed: u64) -> Result<EigenSystem> {
    let (k1, k2) = band_split(n_prime);
    compute_eigensystem(&normalize(graph, NormKind::Laplacian), k1, k2, DEFAULT_TOL, seed)
}

/// Relay-model training for `variant`. `eig` is required unless the
/// variant drops the structural branch.
pub fn condense(
    graph: &SparseGraph,
    eig: Option<&EigenSystem>,
    cfg: &CondenseConfig,
    variant: Variant,
) -> Result<Condensation> {
    let cfg = variant.apply(cfg);
    cfg.validate()?;
    let (mut f, g) = init_relay_models(graph, &cfg);
    let mut pretrain = None;
    if cfg.pretrain {
        let (trained, report) = pretrain_semantic(f, graph, cfg.m_pre, cfg.lr_pre, cfg.seed)?;
        f = trained;
        pretrain = Some(report);
    }
    if !variant.uses_structure_branch() {
        let (state, f) = semantic_only(f, graph, &cfg)?;
        return Ok(Condensation {
            config: cfg,
            pretrain,
            state,
            f,
            g: None,
        });
    }
    let eig = eig.ok_or_else(|| Error::InvalidConfig(format!("variant {variant} needs the eigensystem")))?;
    let (state, f, g) = alternating_optimize(f, g, graph, eig, &cfg)?;
    Ok(Condensation {
        config: cfg,
        pretrain,
        state,
        f,
        g: Some(g),
    })
}

/// Symmetric 0/1 kNN adjacency over the condensed attributes.
fn knn_adjacency(cg: &CondensedGraph) -> Result<ndarray::Array2<f64>> {
    let k = KNN_NEIGHBOURS.min(cg.n().saturating_sub(1));
    if k == 0 {
        return Ok(ndarray::Array2::zeros((cg.n(), cg.n())));
    }
    Ok(knn_graph(cg.features.mapv(f64::from).view(), k)?.to_dense())
}

fn replace_structure(mut cg: CondensedGraph) -> Result<CondensedGraph> {
    cg.adjacency = knn_adjacency(&cg)?;
    cg.provenance.source = GraphSource::Knn;
    cg.provenance.edges = cg.num_edges();
    cg.validate()?;
    Ok(cg)
}

/// Condensed graph from trained relay models. `graph` supplies the feature
/// scale for the attribute initialization.
///
/// `w-knn` inverts the spectral structure as usual and then swaps in a kNN
/// graph over the attributes; `wo-str` inverts attributes on an edgeless
/// graph before building the kNN graph.
pub fn synthesize(
    graph: &SparseGraph,
    condensation: &Condensation,
    eig: Option<&EigenSystem>,
    variant: Variant,
    inversion: &InversionConfig,
) -> Result<CondensedGraph> {
    let feature_std = column_std(graph.features_f64().view());
    let cfg = Some(condensation.config.clone());
    let state = &condensation.state;
    match (&condensation.g, eig) {
        (Some(g), Some(eig)) if variant.uses_structure_branch() => {
            let cg = generate(
                &condensation.f,
                g,
                state,
                &eig.eigenvalues,
                &feature_std,
                cfg,
                inversion,
            )?;
            if variant == Variant::WKnn {
                replace_structure(cg)
            } else {
                Ok(cg)
            }
        }
        _ if !variant.uses_structure_branch() => {
            let k = state.h_cent.nrows();
            let cg = assemble(
                &condensation.f,
                &state.h_cent,
                ndarray::Array2::zeros((k, k)),
                &feature_std,
                cfg,
                inversion,
            )?;
            replace_structure(cg)
        }
        _ => Err(Error::InvalidConfig(format!(
            "variant {variant} needs the structural model and eigensystem"
        ))),
    }
}

/// Graph condensation is run on: the link split's message graph when link
/// prediction is evaluated, the full graph otherwise.
pub fn condensation_graph<'a>(graph: &'a SparseGraph, split: Option<&'a LinkSplit>) -> &'a SparseGraph {
    split.map_or(graph, |s| &s.message_graph)
}

/// Condense, synthesize and evaluate one variant.
pub fn run_ablation(
    variant: Variant,
    graph: &SparseGraph,
    split: Option<&LinkSplit>,
    cfg: &PipelineConfig,
) -> Result<(CondensedGraph, EvalReport)> {
    cfg.validate()?;
    let source = condensation_graph(graph, split);
    let eig = if variant.uses_structure_branch() {
        Some(decompose(source, cfg.condense.n_prime, cfg.condense.seed)?)
    } else {
        None
    };
    let condensation = condense(source, eig.as_ref(), &cfg.condense, variant)?;
    let cg = synthesize(source, &condensation, eig.as_ref(), variant, &cfg.inversion)?;
    let report = evaluate(&cg, graph, split, &cfg.eval)?;
    Ok((cg, report))
}

/// Coreset baseline of the same size as the condensed graph: an induced
/// subgraph whose target embeddings come from the pretrained semantic
/// model. k-center selection runs on those embeddings.
pub fn coreset_baseline(graph: &SparseGraph, cfg: &CondenseConfig, source: GraphSource) -> Result<CondensedGraph> {
    cfg.validate()?;
    let (mut f, _) = init_relay_models(graph, cfg);
    if cfg.pretrain {
        f = pretrain_semantic(f, graph, cfg.m_pre, cfg.lr_pre, cfg.seed)?.0;
    }
    let h = gcn_apply(&f, &normalize(graph, NormKind::GcnAdjacency), &graph.features_f64())?;
    let nodes = match source {
        GraphSource::Random => random_coreset(graph.n(), cfg.n_prime, cfg.seed)?,
        GraphSource::KCenter => kcenter_coreset(&h, cfg.n_prime, cfg.seed)?,
        other => {
            return Err(Error::InvalidConfig(format!("{other:?} is not a coreset method")));
        }
    };
    coreset_graph(graph, &nodes, &h, source)
}
