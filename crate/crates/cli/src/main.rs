mod config;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ctgc::eval::Task;
use ctgc::generate::{load_condensed, GraphSource};
use ctgc::pipeline::Variant;

use crate::config::RunConfig;
use crate::stages::{write_report, Run};

#[derive(Parser)]
#[command(name = "ctgc", version, about = "Self-supervised graph condensation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the Laplacian eigenpairs the structural model encodes.
    Decompose(Opts),
    /// Pretrain and alternately train the relay models.
    Condense(Opts),
    /// Invert the trained models into a condensed graph.
    Generate(Opts),
    /// Score the condensed graph on the original one.
    Eval {
        #[command(flatten)]
        opts: Opts,
        /// Evaluate this condensed graph directory instead of the run's own.
        #[arg(long)]
        condensed: Option<PathBuf>,
    },
    /// Run every stage, reusing cached outputs.
    Pipeline(Opts),
    /// Evaluate a coreset of the condensed size.
    Baseline {
        #[command(flatten)]
        opts: Opts,
        #[arg(long, value_enum, default_value = "k-center")]
        method: Coreset,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Coreset {
    Random,
    KCenter,
}

#[derive(Args)]
struct Opts {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluation seed; repeat for several.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    #[arg(long)]
    k_iter: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    n_prime: Option<usize>,
    /// Adjacency threshold applied after reconstruction.
    #[arg(long)]
    threshold: Option<f64>,
    /// Evaluation tasks, comma separated: nc, lp, cl.
    #[arg(long, value_delimiter = ',')]
    tasks: Vec<Task>,
    #[arg(long)]
    variant: Option<Variant>,
    /// Recompute every stage even when cached outputs match.
    #[arg(long)]
    force: bool,
}

impl Opts {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::from_path(&self.config)?;
        let c = &mut cfg.pipeline.condense;
        if let Some(v) = self.k_iter {
            c.k_iter = v;
        }
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(v) = self.tau {
            c.tau = v;
        }
        if let Some(v) = self.n_prime {
            c.n_prime = v;
        }
        if let Some(v) = self.threshold {
            cfg.pipeline.inversion.threshold = v;
        }
        if !self.seeds.is_empty() {
            cfg.pipeline.eval.seeds = self.seeds.clone();
        }
        if !self.tasks.is_empty() {
            cfg.pipeline.eval.tasks = self.tasks.clone();
        }
        if let Some(v) = self.variant {
            cfg.variant = v;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn run(&self) -> Result<Run> {
        Run::new(self.load()?, self.force)
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn configure_threads() -> Result<()> {
    if let Ok(raw) = std::env::var("CTGC_THREADS") {
        let n: usize = raw
            .parse()
            .with_context(|| format!("CTGC_THREADS must be a positive integer, got {raw:?}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Decompose(opts) => opts.run()?.decompose(),
        Command::Condense(opts) => opts.run()?.condense(),
        Command::Generate(opts) => opts.run()?.generate(),
        Command::Eval { opts, condensed } => {
            let run = opts.run()?;
            let report = match condensed {
                Some(dir) => {
                    let cg = load_condensed(&dir).with_context(|| format!("loading {}", dir.display()))?;
                    let report = run.eval_condensed(&cg)?;
                    write_report(&run.cfg.out.join(stages::REPORT_FILE), &report)?;
                    report
                }
                None => run.eval()?,
            };
            print_json(&report)
        }
        Command::Pipeline(opts) => print_json(&opts.run()?.pipeline()?),
        Command::Baseline { opts, method } => {
            let (source, name) = match method {
                Coreset::Random => (GraphSource::Random, "random"),
                Coreset::KCenter => (GraphSource::KCenter, "k-center"),
            };
            print_json(&opts.run()?.baseline(source, name)?)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
