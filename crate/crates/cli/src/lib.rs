//! Command-line pipeline: train, align, evaluate and cluster from one
//! config file.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_align, cmd_all, cmd_cluster, cmd_evaluate, cmd_train, AlignmentFile};
pub use config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "unitlens", version, about = "Align concepts to the units of a character-level CNN")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory. Defaults to the config's `out_dir`, then $UNITLENS_OUT, then `out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; outputs do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Checkpoint to read instead of `<out>/model.ckpt`.
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,
    /// Top sentences per unit.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Aligned concepts per unit.
    #[arg(long, global = true)]
    pub m: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the classifier and write model.ckpt and train_log.csv.
    Train,
    /// Align concepts to units and write alignments.json and per-layer CSVs.
    Align {
        /// Only align units of this layer.
        #[arg(long)]
        layer: Option<usize>,
    },
    /// Compute selectivity, loss-delta, distribution and correlation reports.
    Evaluate {
        /// Skip loss deltas; allows unlabeled corpora.
        #[arg(long)]
        skip_del: bool,
    },
    /// Cluster aligned concepts and write dendrogram and co-alignment reports.
    Cluster,
    /// Train, align, evaluate and cluster.
    All {
        #[arg(long)]
        skip_del: bool,
    },
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let path = cli.global.config.clone().context("--config is required")?;
    let mut cfg = RunConfig::load(&path)?;
    let skip_del = matches!(cli.command, Command::Evaluate { skip_del: true } | Command::All { skip_del: true });
    cfg.apply(&Overrides {
        out: cli.global.out.clone(),
        seed: cli.global.seed,
        threads: cli.global.threads,
        k: cli.global.k,
        m: cli.global.m,
        skip_del,
    });
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("cannot start worker threads")?;
    let checkpoint = cli.global.checkpoint.as_deref();
    pool.install(|| match cli.command {
        Command::Train => cmd_train(&cfg),
        Command::Align { layer } => cmd_align(&cfg, checkpoint, layer),
        Command::Evaluate { .. } => cmd_evaluate(&cfg, checkpoint),
        Command::Cluster => cmd_cluster(&cfg),
        Command::All { .. } => cmd_all(&cfg),
    })
}
