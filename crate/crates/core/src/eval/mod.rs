//! Downstream evaluation: fit a model to a condensed graph, freeze it as a
//! feature extractor on the original graph and score few-shot node
//! classification, link prediction and clustering.

mod coreset;
mod downstream;
mod heads;
mod metrics;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use coreset::{coreset_graph, kcenter_coreset, random_coreset};
pub use downstream::{apply, embed, train_downstream, Arch, DownstreamModel};
pub use heads::{eval_clustering, eval_lp, eval_nc_fewshot, FewShotSplit, HEAD_LR};
pub use metrics::{auc, nmi, TaskScore};

use crate::error::{Error, Result};
use crate::generate::CondensedGraph;
use crate::graph::{split_links, LinkSplit, SparseGraph};
use crate::models::HIDDEN_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Nc,
    Lp,
    Cl,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nc" => Ok(Task::Nc),
            "lp" => Ok(Task::Lp),
            "cl" => Ok(Task::Cl),
            other => Err(Error::InvalidConfig(format!(
                "unknown task {other:?} (expected nc, lp or cl)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub seeds: Vec<u64>,
    pub tasks: Vec<Task>,
    pub arch: Arch,
    pub hidden_dim: usize,
    /// Epochs of fitting the downstream model to the condensed graph.
    pub epochs: usize,
    pub lr: f64,
    pub head_epochs: usize,
    /// Seed of the link split, shared by every evaluation seed.
    pub split_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            seeds: (0..5).collect(),
            tasks: vec![Task::Nc, Task::Lp, Task::Cl],
            arch: Arch::Gcn,
            hidden_dim: HIDDEN_DIM,
            epochs: 200,
            lr: 0.01,
            head_epochs: 300,
            split_seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("at least one evaluation seed is required".into()));
        }
        if self.tasks.is_empty() {
            return Err(Error::InvalidConfig("no evaluation task selected".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || self.hidden_dim == 0 {
            return Err(Error::InvalidConfig(format!(
                "downstream lr {} / hidden width {}",
                self.lr, self.hidden_dim
            )));
        }
        Ok(())
    }

    pub fn wants(&self, task: Task) -> bool {
        self.tasks.contains(&task)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// 3-shot node classification accuracy.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nc: Option<TaskScore>,
    /// 5-shot node classification accuracy.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nc_5shot: Option<TaskScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lp: Option<TaskScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cl: Option<TaskScore>,
    pub config: EvalConfig,
}

#[derive(Debug, Default)]
struct SeedScores {
    nc3: Option<f64>,
    nc5: Option<f64>,
    lp: Option<f64>,
    cl: Option<f64>,
}

/// Embeddings of the full graph (for classification and clustering) and
/// of the link split's message graph (for link prediction).
pub struct Embeddings {
    pub full: Option<Array2<f64>>,
    pub message: Option<Array2<f64>>,
}

/// Scores embeddings produced per seed by `embedder`, which receives the
/// seed, the full graph and the split's message graph and returns the
/// embeddings the configured tasks need. A split is required only for
/// link prediction.
pub fn evaluate_with<F>(
    graph: &SparseGraph,
    split: Option<&LinkSplit>,
    cfg: &EvalConfig,
    embedder: F,
) -> Result<EvalReport>
where
    F: Fn(u64, &SparseGraph, Option<&SparseGraph>) -> Result<Embeddings> + Sync,
{
    cfg.validate()?;
    let split = match (cfg.wants(Task::Lp), split) {
        (true, None) => return Err(Error::InvalidConfig("link prediction needs a link split".into())),
        (true, s) => s,
        (false, _) => None,
    };
    let needs_labels = cfg.wants(Task::Nc) || cfg.wants(Task::Cl);
    let labels = if needs_labels {
        Some(
            graph
                .labels()
                .ok_or_else(|| Error::InvalidConfig("classification and clustering need node labels".into()))?,
        )
    } else {
        None
    };
    let classes = graph.num_classes();
    let per_seed: Vec<Result<SeedScores>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let emb = embedder(seed, graph, split.map(|s| &s.message_graph))?;
            let mut out = SeedScores::default();
            if let (Some(labels), Some(full)) = (labels, emb.full.as_ref()) {
                if cfg.wants(Task::Nc) {
                    out.nc3 = Some(eval_nc_fewshot(full, labels, classes, 3, cfg.head_epochs, seed)?);
                    out.nc5 = Some(eval_nc_fewshot(full, labels, classes, 5, cfg.head_epochs, seed)?);
                }
                if cfg.wants(Task::Cl) {
                    out.cl = Some(eval_clustering(full, labels, classes, seed)?);
                }
            }
            if let (Some(split), Some(message)) = (split, emb.message.as_ref()) {
                out.lp = Some(eval_lp(message, split, cfg.head_epochs, seed)?);
            }
            Ok(out)
        })
        .collect();
    let per_seed: Vec<SeedScores> = per_seed.into_iter().collect::<Result<_>>()?;
    let gather = |pick: fn(&SeedScores) -> Option<f64>| -> Option<TaskScore> {
        let values: Option<Vec<f64>> = per_seed.iter().map(pick).collect();
        values.map(TaskScore::from_values)
    };
    Ok(EvalReport {
        nc: gather(|s| s.nc3),
        nc_5shot: gather(|s| s.nc5),
        lp: gather(|s| s.lp),
        cl: gather(|s| s.cl),
        config: cfg.clone(),
    })
}

/// The standard protocol: per seed, fit a fresh downstream model to `cg`
/// and use it frozen on the original graph.
pub fn evaluate(
    cg: &CondensedGraph,
    graph: &SparseGraph,
    split: Option<&LinkSplit>,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    cg.validate()?;
    if cg.features.ncols() != graph.feature_dim() {
        return Err(Error::shape(
            "condensed feature width",
            graph.feature_dim(),
            cg.features.ncols(),
        ));
    }
    let wants_full = cfg.wants(Task::Nc) || cfg.wants(Task::Cl);
    evaluate_with(graph, split, cfg, |seed, full, message| {
        let (model, _) = train_downstream(cg, cfg.arch, cfg.hidden_dim, cfg.epochs, cfg.lr, seed)?;
        Ok(Embeddings {
            full: if wants_full { Some(embed(&model, full)?) } else { None },
            message: message.map(|m| embed(&model, m)).transpose()?,
        })
    })
}

/// Link split used by evaluation; condensation for link prediction runs on
/// its message graph.
pub fn eval_split(graph: &SparseGraph, cfg: &EvalConfig) -> Result<LinkSplit> {
    split_links(graph, cfg.split_seed)
}
