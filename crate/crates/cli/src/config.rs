//! JSON run configuration.
//!
//! ```json
//! {
//!   "dataset": { "files": { "name": "cora", "edges": "cora.edges", "features": "cora.ctgf", "labels": "cora.labels" } },
//!   "preset": "cora",
//!   "condense": { "k_iter": 3 },
//!   "inversion": { "threshold": 0.05 },
//!   "eval": { "seeds": [0, 1, 2], "tasks": ["nc", "cl"] },
//!   "variant": "full",
//!   "out": "runs/cora"
//! }
//! ```
//!
//! `dataset` is either `files` (paths relative to the config file) or
//! `sbm` (`blocks`, `p_in`, `p_out`, optional `noise` and `seed`).
//! `condense` keys override the preset; without a preset every condensation
//! key must be given. The preset defaults to the dataset name when that
//! names a bundled preset.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ctgc::condense::CondenseConfig;
use ctgc::eval::EvalConfig;
use ctgc::generate::InversionConfig;
use ctgc::graph::{generate_sbm_with_noise, load_graph, SparseGraph, SBM_NOISE_STD};
use ctgc::pipeline::{PipelineConfig, Variant};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Files(FileDataset),
    Sbm(SbmSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDataset {
    #[serde(default)]
    pub name: Option<String>,
    pub edges: PathBuf,
    pub features: PathBuf,
    #[serde(default)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    pub blocks: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_noise() -> f64 {
    SBM_NOISE_STD
}

impl Dataset {
    fn name(&self) -> Option<&str> {
        match self {
            Dataset::Files(f) => f.name.as_deref(),
            Dataset::Sbm(_) => None,
        }
    }

    fn resolve(&mut self, base: &Path) -> Result<()> {
        if let Dataset::Files(f) = self {
            for path in [Some(&mut f.edges), Some(&mut f.features), f.labels.as_mut()]
                .into_iter()
                .flatten()
            {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
                if !path.is_file() {
                    bail!("dataset file {} does not exist", path.display());
                }
            }
        }
        Ok(())
    }

    pub fn load(&self) -> Result<SparseGraph> {
        match self {
            Dataset::Files(f) => load_graph(&f.edges, &f.features, f.labels.as_deref())
                .with_context(|| format!("loading graph from {}", f.edges.display())),
            Dataset::Sbm(s) => Ok(generate_sbm_with_noise(&s.blocks, s.p_in, s.p_out, s.noise, s.seed)?),
        }
    }

    /// Content hash of the dataset: file bytes, or the generator settings.
    pub fn fingerprint(&self) -> Result<String> {
        let mut h = Sha256::new();
        match self {
            Dataset::Files(f) => {
                for path in [Some(&f.edges), Some(&f.features), f.labels.as_ref()]
                    .into_iter()
                    .flatten()
                {
                    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
                    h.update((bytes.len() as u64).to_le_bytes());
                    h.update(&bytes);
                }
            }
            Dataset::Sbm(s) => h.update(serde_json::to_vec(s)?),
        }
        Ok(hex::encode(h.finalize()))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dataset: Dataset,
    #[serde(default)]
    preset: Option<String>,
    #[serde(default)]
    condense: Option<Value>,
    #[serde(default)]
    inversion: InversionConfig,
    #[serde(default)]
    eval: EvalConfig,
    #[serde(default)]
    variant: Option<Variant>,
    #[serde(default)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Dataset,
    pub pipeline: PipelineConfig,
    pub variant: Variant,
    pub out: PathBuf,
}

/// Preset values with the object `overrides` merged on top.
fn resolve_condense(preset: Option<&str>, overrides: Option<Value>) -> Result<CondenseConfig> {
    let mut base = match preset {
        Some(name) => match CondenseConfig::preset(name) {
            Some(cfg) => serde_json::to_value(cfg)?,
            None => {
                let known: Vec<&str> = CondenseConfig::preset_names().collect();
                bail!("unknown preset {name:?} (known: {})", known.join(", "));
            }
        },
        None => Value::Object(Default::default()),
    };
    match overrides {
        Some(Value::Object(map)) => {
            let target = base.as_object_mut().expect("presets serialize to objects");
            target.extend(map);
        }
        Some(other) => bail!("`condense` must be an object, got {other}"),
        None => {}
    }
    serde_json::from_value(base).context(if preset.is_none() {
        "condensation settings (no preset matches this dataset, so all keys are required)"
    } else {
        "condensation settings"
    })
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base).with_context(|| format!("in config {}", path.display()))
    }

    /// Parses a config whose relative dataset paths are anchored at `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text)?;
        let mut dataset = raw.dataset;
        dataset.resolve(base)?;
        let preset = raw.preset.or_else(|| {
            dataset
                .name()
                .filter(|n| CondenseConfig::preset(n).is_some())
                .map(str::to_owned)
        });
        let condense = resolve_condense(preset.as_deref(), raw.condense)?;
        let cfg = Self {
            dataset,
            pipeline: PipelineConfig {
                condense,
                inversion: raw.inversion,
                eval: raw.eval,
            },
            variant: raw.variant.unwrap_or(Variant::Full),
            out: raw.out.unwrap_or_else(|| PathBuf::from("ctgc-out")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        Ok(())
    }
}
