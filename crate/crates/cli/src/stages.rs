//! Pipeline stages with artifacts under one output directory.
//!
//! ```text
//! out/
//!   eigensystem.ctge          decompose
//!   condense/                 semantic.ctgm, structural.ctgm, state.json,
//!                             pretrain.json, training_log.jsonl
//!   condensed/                generate (condensed graph directory)
//!   report.json               eval
//!   <stage>.key               content hash the stage's artifacts were built from
//! ```
//!
//! A stage is skipped when its key file matches the hash of its inputs and
//! upstream keys. Key files are written after the artifacts, so an
//! interrupted stage is redone on the next run.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use ctgc::condense::{load_state, save_state, write_training_log, CondenseConfig};
use ctgc::eval::{eval_split, evaluate, EvalReport, Task};
use ctgc::generate::{load_condensed, save_condensed, CondensedGraph, GraphSource};
use ctgc::graph::{LinkSplit, SparseGraph};
use ctgc::models::{load_eigenmlp, load_gcn, save_eigenmlp, save_gcn};
use ctgc::pipeline::{condensation_graph, condense, coreset_baseline, decompose, synthesize, Condensation};
use ctgc::spectral::{read_eigensystem, write_eigensystem, EigenSystem};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// Bumped when an artifact format changes so old caches are not reused.
const CACHE_VERSION: u32 = 1;

pub const EIGEN_FILE: &str = "eigensystem.ctge";
pub const CONDENSE_DIR: &str = "condense";
pub const CONDENSED_DIR: &str = "condensed";
pub const REPORT_FILE: &str = "report.json";
const FAILED_SUFFIX: &str = "FAILED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Decompose,
    Condense,
    Generate,
    Eval,
}

impl Stage {
    const ORDER: [Stage; 4] = [Stage::Decompose, Stage::Condense, Stage::Generate, Stage::Eval];

    fn name(self) -> &'static str {
        match self {
            Stage::Decompose => "decompose",
            Stage::Condense => "condense",
            Stage::Generate => "generate",
            Stage::Eval => "eval",
        }
    }
}

fn hash_of(value: &impl Serialize) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(value)?)))
}

pub struct Run {
    pub cfg: RunConfig,
    pub force: bool,
    graph: SparseGraph,
    split: Option<LinkSplit>,
    data_key: String,
}

impl Run {
    pub fn new(cfg: RunConfig, force: bool) -> Result<Self> {
        let graph = cfg.dataset.load()?;
        let eval = &cfg.pipeline.eval;
        let split = if eval.wants(Task::Lp) {
            Some(eval_split(&graph, eval).context("building the link split")?)
        } else {
            None
        };
        let data_key = cfg.dataset.fingerprint()?;
        fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
        Ok(Self {
            cfg,
            force,
            graph,
            split,
            data_key,
        })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn key_path(&self, stage: Stage) -> PathBuf {
        self.out(&format!("{}.key", stage.name()))
    }

    fn condense_config(&self) -> CondenseConfig {
        self.cfg.variant.apply(&self.cfg.pipeline.condense)
    }

    fn uses_eigensystem(&self) -> bool {
        self.cfg.variant.uses_structure_branch()
    }

    /// Graph the relay models train on.
    fn source(&self) -> &SparseGraph {
        condensation_graph(&self.graph, self.split.as_ref())
    }

    /// Hash of everything a stage's artifacts depend on.
    pub fn key(&self, stage: Stage) -> Result<String> {
        let c = &self.cfg.pipeline;
        let split_seed = self.split.as_ref().map(|_| c.eval.split_seed);
        let source = (CACHE_VERSION, &self.data_key, split_seed);
        match stage {
            Stage::Decompose => hash_of(&("decompose", source, c.condense.n_prime, c.condense.seed)),
            Stage::Condense => {
                let upstream = if self.uses_eigensystem() {
                    Some(self.key(Stage::Decompose)?)
                } else {
                    None
                };
                hash_of(&("condense", source, upstream, self.condense_config(), self.cfg.variant))
            }
            Stage::Generate => hash_of(&("generate", self.key(Stage::Condense)?, &c.inversion, self.cfg.variant)),
            Stage::Eval => hash_of(&("eval", self.key(Stage::Generate)?, &self.data_key, &c.eval)),
        }
    }

    /// Whether the artifacts of `stage` on disk were built from the current
    /// inputs.
    pub fn is_fresh(&self, stage: Stage) -> Result<bool> {
        match fs::read_to_string(self.key_path(stage)) {
            Ok(stored) => Ok(stored.trim() == self.key(stage)?),
            Err(_) => Ok(false),
        }
    }

    fn mark_done(&self, stage: Stage) -> Result<()> {
        fs::write(self.key_path(stage), self.key(stage)?)?;
        Ok(())
    }

    /// Drops the keys of `stage` and everything downstream of it.
    fn begin(&self, stage: Stage) -> Result<()> {
        for later in Stage::ORDER.iter().skip_while(|&&s| s != stage) {
            let _ = fs::remove_file(self.key_path(*later));
        }
        let _ = fs::remove_file(self.out(&format!("{}.{FAILED_SUFFIX}", stage.name())));
        eprintln!("[{}] running", stage.name());
        Ok(())
    }

    fn cached(&self, stage: Stage) -> Result<bool> {
        if !self.force && self.is_fresh(stage)? {
            eprintln!("[{}] up to date, reusing cached artifacts", stage.name());
            return Ok(true);
        }
        Ok(false)
    }

    fn require(&self, stage: Stage) -> Result<()> {
        if !self.is_fresh(stage)? {
            bail!(
                "{} outputs in {} are missing or stale; run `ctgc {}` first",
                stage.name(),
                self.cfg.out.display(),
                stage.name()
            );
        }
        Ok(())
    }

    pub fn decompose(&self) -> Result<()> {
        if self.cached(Stage::Decompose)? {
            return Ok(());
        }
        self.begin(Stage::Decompose)?;
        let t = Instant::now();
        let c = &self.cfg.pipeline.condense;
        let eig = decompose(self.source(), c.n_prime, c.seed).context("eigendecomposition")?;
        write_eigensystem(&self.out(EIGEN_FILE), &eig)?;
        eprintln!(
            "[decompose] {} eigenpairs ({} smallest, {} largest) in {:.1}s",
            eig.len(),
            eig.k1,
            eig.k2,
            t.elapsed().as_secs_f64()
        );
        self.mark_done(Stage::Decompose)
    }

    fn eigensystem(&self) -> Result<Option<EigenSystem>> {
        if !self.uses_eigensystem() {
            return Ok(None);
        }
        Ok(Some(read_eigensystem(&self.out(EIGEN_FILE))?))
    }

    pub fn condense(&self) -> Result<()> {
        if self.uses_eigensystem() {
            self.require(Stage::Decompose)?;
        }
        if self.cached(Stage::Condense)? {
            return Ok(());
        }
        self.begin(Stage::Condense)?;
        let t = Instant::now();
        let eig = self.eigensystem()?;
        let result = condense(
            self.source(),
            eig.as_ref(),
            &self.cfg.pipeline.condense,
            self.cfg.variant,
        )
        .context("relay-model training")?;
        let dir = self.out(CONDENSE_DIR);
        fs::create_dir_all(&dir)?;
        save_gcn(&dir.join("semantic.ctgm"), &result.f)?;
        match &result.g {
            Some(g) => save_eigenmlp(&dir.join("structural.ctgm"), g)?,
            None => {
                let _ = fs::remove_file(dir.join("structural.ctgm"));
            }
        }
        save_state(&dir.join("state.json"), &result.state)?;
        write_training_log(&dir.join("training_log.jsonl"), &result.state.log)?;
        fs::write(dir.join("pretrain.json"), serde_json::to_vec_pretty(&result.pretrain)?)?;
        let history: Vec<String> = result
            .state
            .matching_rate_history
            .iter()
            .map(|r| format!("{r:.3}"))
            .collect();
        eprintln!(
            "[condense] matching rate per iteration [{}], kept iteration {}, {:.1}s",
            history.join(", "),
            result.state.selected_iter,
            t.elapsed().as_secs_f64()
        );
        self.mark_done(Stage::Condense)
    }

    fn load_condensation(&self) -> Result<Condensation> {
        let dir = self.out(CONDENSE_DIR);
        let g = if self.uses_eigensystem() {
            Some(load_eigenmlp(&dir.join("structural.ctgm"))?)
        } else {
            None
        };
        Ok(Condensation {
            config: self.condense_config(),
            pretrain: serde_json::from_slice(&fs::read(dir.join("pretrain.json"))?)?,
            state: load_state(&dir.join("state.json"))?,
            f: load_gcn(&dir.join("semantic.ctgm"))?,
            g,
        })
    }

    pub fn generate(&self) -> Result<()> {
        self.require(Stage::Condense)?;
        if self.cached(Stage::Generate)? {
            return Ok(());
        }
        self.begin(Stage::Generate)?;
        let t = Instant::now();
        let condensation = self.load_condensation()?;
        let eig = self.eigensystem()?;
        let dir = self.out(CONDENSED_DIR);
        let cg = match synthesize(
            self.source(),
            &condensation,
            eig.as_ref(),
            self.cfg.variant,
            &self.cfg.pipeline.inversion,
        ) {
            Ok(cg) => cg,
            Err(e) => {
                let marker = self.out(&format!("generate.{FAILED_SUFFIX}"));
                fs::write(&marker, format!("{e}\n"))?;
                return Err(e).context(format!(
                    "graph generation failed; outputs in {} are incomplete (see {})",
                    dir.display(),
                    marker.display()
                ));
            }
        };
        if cg.num_edges() == 0 {
            eprintln!(
                "[generate] warning: condensed adjacency is empty (threshold {})",
                self.cfg.pipeline.inversion.threshold
            );
        }
        save_condensed(&cg, &dir)?;
        report_condensed("generate", &cg, t.elapsed().as_secs_f64());
        self.mark_done(Stage::Generate)
    }

    pub fn eval(&self) -> Result<EvalReport> {
        self.require(Stage::Generate)?;
        let path = self.out(REPORT_FILE);
        if self.cached(Stage::Eval)? {
            return Ok(serde_json::from_slice(&fs::read(&path)?)?);
        }
        self.begin(Stage::Eval)?;
        let cg = load_condensed(&self.out(CONDENSED_DIR))?;
        let report = self.eval_condensed(&cg)?;
        write_report(&path, &report)?;
        self.mark_done(Stage::Eval)?;
        Ok(report)
    }

    /// Scores any condensed graph against this run's dataset.
    pub fn eval_condensed(&self, cg: &CondensedGraph) -> Result<EvalReport> {
        let t = Instant::now();
        let report = evaluate(cg, &self.graph, self.split.as_ref(), &self.cfg.pipeline.eval).context("evaluation")?;
        eprintln!(
            "[eval] {} seeds in {:.1}s",
            self.cfg.pipeline.eval.seeds.len(),
            t.elapsed().as_secs_f64()
        );
        Ok(report)
    }

    pub fn pipeline(&self) -> Result<EvalReport> {
        if self.uses_eigensystem() {
            self.decompose()?;
        }
        self.condense()?;
        self.generate()?;
        self.eval()
    }

    /// Coreset of the condensed size, written to `baseline-<name>/` with its
    /// report next to it.
    pub fn baseline(&self, source: GraphSource, name: &str) -> Result<EvalReport> {
        let t = Instant::now();
        let cg = coreset_baseline(self.source(), &self.cfg.pipeline.condense, source).context("coreset selection")?;
        let dir = self.out(&format!("baseline-{name}"));
        save_condensed(&cg, &dir)?;
        report_condensed("baseline", &cg, t.elapsed().as_secs_f64());
        let report = self.eval_condensed(&cg)?;
        write_report(&dir.join(REPORT_FILE), &report)?;
        Ok(report)
    }
}

fn report_condensed(stage: &str, cg: &CondensedGraph, secs: f64) {
    eprintln!(
        "[{stage}] {} nodes, {} edges, {} features in {secs:.1}s",
        cg.n(),
        cg.num_edges(),
        cg.features.ncols()
    );
}

pub fn write_report(path: &Path, report: &EvalReport) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(report)?;
    bytes.push(b'\n');
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}
