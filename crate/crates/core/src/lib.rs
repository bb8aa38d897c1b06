//! Self-supervised graph condensation with dual relay models.
//!
//! The pipeline decomposes the normalized Laplacian of a large graph, trains
//! a semantic GCN and a structural spectral encoder with a clustering-based
//! contrastive objective while exchanging cluster labels between the two,
//! then inverts both models to synthesize a small weighted graph with node
//! attributes and target embeddings. The [`eval`] module measures how well a
//! GCN trained on the small graph transfers to node classification, link
//! prediction and clustering on the original one.

pub mod autodiff;
pub mod condense;
pub mod error;
pub mod eval;
pub mod generate;
pub mod graph;
pub mod linalg;
pub mod models;
pub mod pipeline;
pub mod spectral;

pub use error::{Error, Result};
