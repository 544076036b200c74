//! Argument parsing and dispatch.

use crate::commands::{self, OracleRequest};
use crate::config::{split_assignment, ExperimentConfig};
use crate::error::{CliError, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "afsim", version, about = "Adversarial sensor-fusion car-following simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Settings shared by the simulation subcommands. Flags win over `--set`,
/// which wins over the config file.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Flat key=value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Attack scenario: none, beacon or all.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Steps per episode.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "runs/latest")]
    pub out: PathBuf,
    /// Override any config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        for o in &self.overrides {
            let (k, v) = split_assignment(o).ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {o:?}")))?;
            cfg.set(k, v)?;
        }
        if let Some(s) = &self.scenario {
            cfg.set("scenario", s)?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(e) = self.episodes {
            cfg.episodes = e;
        }
        if let Some(s) = self.steps {
            cfg.steps = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train both players by self-play.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Write the untrained checkpoint and stop.
        #[arg(long)]
        init_only: bool,
    },
    /// Greedy rollouts of a checkpoint, without learning.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Static inverse-variance fusion against a fixed attacker.
    Baseline {
        #[command(flatten)]
        run: RunArgs,
        /// worst, idle, or a checkpoint whose attacker network is replayed.
        #[arg(long)]
        attacker: Option<String>,
    },
    /// Solve the one-step stage game on the configured grids.
    Oracle {
        #[command(flatten)]
        run: RunArgs,
        /// Also solve exactly by support enumeration (at most 4x4).
        #[arg(long)]
        exact: bool,
        /// Solve the 2x2 matching-pennies test matrix instead.
        #[arg(long)]
        matching_pennies: bool,
        /// Comma-separated follower grid indices to keep.
        #[arg(long, value_delimiter = ',')]
        av_subset: Option<Vec<usize>>,
        /// Comma-separated attacker grid indices to keep.
        #[arg(long, value_delimiter = ',')]
        att_subset: Option<Vec<usize>>,
    },
    /// Render SVG charts of one trace, or overlays of two.
    Plot {
        #[arg(required = true, num_args = 1..=2)]
        traces: Vec<PathBuf>,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { run, init_only } => commands::train(&run.resolve()?, &run.out, init_only),
        Command::Eval { run, checkpoint } => commands::eval(&run.resolve()?, &checkpoint, &run.out),
        Command::Baseline { run, attacker } => {
            let mut cfg = run.resolve()?;
            if let Some(a) = attacker {
                cfg.set("baseline_attacker", &a)?;
            }
            commands::baseline(&cfg, &run.out)
        }
        Command::Oracle { run, exact, matching_pennies, av_subset, att_subset } => {
            let req = OracleRequest { exact, matching_pennies, av_subset, att_subset };
            commands::oracle(&run.resolve()?, &req, &run.out)
        }
        Command::Plot { traces, out } => crate::plot::plot(&traces, &out).map(|_| ()),
    }
}
