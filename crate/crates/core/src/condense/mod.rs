//! Clustering-based contrastive training of the relay models.

mod config;
mod kmeans;
mod loss;
mod train;

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use config::CondenseConfig;
pub use kmeans::{
    assign_by_similarity, kmeans, kmeans_with_restarts, matching_rate, ClusterAssignment, KMEANS_MAX_ITERS,
    KMEANS_RESTARTS, KMEANS_TOL,
};
pub use loss::{centroid_separation_loss, contrastive_cluster_loss, joint_loss};
pub use train::{
    alternating_optimize, init_relay_models, pretrain_semantic, semantic_only, CondensationState, Phase, PhaseRecord,
    PretrainReport,
};

use crate::error::{Error, Result};

/// Writes one JSON object per phase, one per line.
pub fn write_training_log(path: &Path, log: &[PhaseRecord]) -> Result<()> {
    let mut out = fs::File::create(path)?;
    for rec in log {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    h_cent: Vec<Vec<f64>>,
    z_cent: Vec<Vec<f64>>,
    width: usize,
    y_h: Vec<usize>,
    y_z: Vec<usize>,
    matching_rate_history: Vec<f64>,
    log: Vec<PhaseRecord>,
    selected_iter: usize,
}

fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(path: &Path, rows: Vec<Vec<f64>>, width: usize) -> Result<Array2<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::format(path, "ragged centroid matrix"));
    }
    Ok(Array2::from_shape_vec((n, width), rows.into_iter().flatten().collect()).expect("checked widths"))
}

/// JSON dump of a training result. Floats round-trip exactly.
pub fn save_state(path: &Path, state: &CondensationState) -> Result<()> {
    let file = StateFile {
        h_cent: rows(&state.h_cent),
        z_cent: rows(&state.z_cent),
        width: state.h_cent.ncols(),
        y_h: state.y_h.clone(),
        y_z: state.y_z.clone(),
        matching_rate_history: state.matching_rate_history.clone(),
        log: state.log.clone(),
        selected_iter: state.selected_iter,
    };
    fs::write(path, serde_json::to_vec(&file)?)?;
    Ok(())
}

pub fn load_state(path: &Path) -> Result<CondensationState> {
    let bytes = fs::read(path)?;
    let file: StateFile = serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))?;
    Ok(CondensationState {
        h_cent: from_rows(path, file.h_cent, file.width)?,
        z_cent: from_rows(path, file.z_cent, file.width)?,
        y_h: file.y_h,
        y_z: file.y_z,
        matching_rate_history: file.matching_rate_history,
        log: file.log,
        selected_iter: file.selected_iter,
    })
}
