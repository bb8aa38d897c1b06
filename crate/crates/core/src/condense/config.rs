use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{DEFAULT_PERIOD, EMBED_DIM, HIDDEN_DIM};

/// Hyper-parameters of relay-model training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondenseConfig {
    /// Number of condensed nodes, clusters and eigenpairs.
    pub n_prime: usize,
    pub tau: f64,
    pub alpha: f64,
    pub m_pre: usize,
    pub m_train: usize,
    pub k_iter: usize,
    pub lr_pre: f64,
    pub lr_sem: f64,
    pub lr_str: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_hidden")]
    pub hidden_dim: usize,
    #[serde(default = "default_embed")]
    pub embed_dim: usize,
    #[serde(default = "default_period")]
    pub period: usize,
    /// Skip the shuffled-feature pretraining of the semantic model.
    #[serde(default = "default_true")]
    pub pretrain: bool,
}

fn default_hidden() -> usize {
    HIDDEN_DIM
}

fn default_embed() -> usize {
    EMBED_DIM
}

fn default_period() -> usize {
    DEFAULT_PERIOD
}

fn default_true() -> bool {
    true
}

/// Published per-dataset settings:
/// `(name, n_prime, m_pre, lr_pre, m_train, k_iter, lr_sem, lr_str, alpha, tau)`.
const PRESETS: [(&str, usize, usize, f64, usize, usize, f64, f64, f64, f64); 5] = [
    ("cora", 70, 200, 0.001, 20, 5, 0.0001, 0.001, 1000.0, 0.3),
    ("citeseer", 60, 200, 0.001, 20, 3, 0.0001, 0.001, 1000.0, 0.3),
    ("arxiv", 454, 200, 0.001, 50, 3, 0.0001, 0.1, 1000.0, 0.3),
    ("reddit", 153, 20, 0.0001, 40, 3, 0.001, 0.1, 10000.0, 0.3),
    ("products", 612, 200, 0.001, 10, 2, 0.0001, 0.001, 1000.0, 0.3),
];

impl CondenseConfig {
    /// Preset for a known dataset name (case-insensitive).
    pub fn preset(name: &str) -> Option<Self> {
        let name = name.to_ascii_lowercase();
        PRESETS.iter().find(|p| p.0 == name).map(
            |&(_, n_prime, m_pre, lr_pre, m_train, k_iter, lr_sem, lr_str, alpha, tau)| Self {
                n_prime,
                tau,
                alpha,
                m_pre,
                m_train,
                k_iter,
                lr_pre,
                lr_sem,
                lr_str,
                seed: 0,
                hidden_dim: HIDDEN_DIM,
                embed_dim: EMBED_DIM,
                period: DEFAULT_PERIOD,
                pretrain: true,
            },
        )
    }

    pub fn preset_names() -> impl Iterator<Item = &'static str> {
        PRESETS.iter().map(|p| p.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be non-negative, got {}", self.alpha));
        }
        if self.n_prime < 2 {
            return bad(format!("n_prime must be at least 2, got {}", self.n_prime));
        }
        if self.m_pre == 0 || self.m_train == 0 || self.k_iter == 0 {
            return bad("m_pre, m_train and k_iter must all be at least 1".into());
        }
        for (name, lr) in [
            ("lr_pre", self.lr_pre),
            ("lr_sem", self.lr_sem),
            ("lr_str", self.lr_str),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(format!("{name} must be positive, got {lr}"));
            }
        }
        if self.hidden_dim == 0 || self.embed_dim == 0 || self.period == 0 {
            return bad("model widths and period must be positive".into());
        }
        Ok(())
    }
}
