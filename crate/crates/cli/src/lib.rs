//! Command-line experiments over `pgg-core`: payoff clouds, region maps,
//! strategy checks, learning runs and collusion scans.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pgg_core::learning::Scenario;
use pgg_core::PublicGoodsGame;

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use config::{AverageRule, ExperimentConfig, Format, Method, StrategySpec};
pub use error::{CliError, Status, USAGE_EXIT};

#[derive(Debug, Parser)]
#[command(
    name = "pgg",
    version,
    about = "Repeated public goods game experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Opponent payoffs against a fixed focal strategy, over random opponents.
    PayoffCloud(CloudArgs),
    /// Regime of every (n, r) grid point.
    RegionMap(RegionArgs),
    /// Whether a strategy lies in the certified cooperation-enforcing region.
    Check(CheckArgs),
    /// Q-learning followers against committed leaders.
    Learn(LearnArgs),
    /// Gains of every alliance size and composition.
    Collusion(CollusionArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Number of players.
    #[arg(long)]
    pub n: Option<usize>,
    /// Multiplication factor of the public good.
    #[arg(long)]
    pub r: Option<f64>,
    /// Root seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (a directory for `learn`). Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl CommonArgs {
    fn flags(&self) -> ExperimentConfig {
        ExperimentConfig {
            n: self.n,
            r: self.r,
            seed: self.seed,
            out: self.out.clone(),
            format: self.format,
            ..Default::default()
        }
    }

    /// File values (if any) overlaid with `flags`.
    fn merge(&self, command: &str, flags: ExperimentConfig) -> Result<ExperimentConfig, CliError> {
        let base = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let merged = base.overlay(self.flags()).overlay(flags);
        merged.expect_experiment(command)?;
        Ok(merged)
    }
}

#[derive(Debug, Clone, Args)]
pub struct CloudArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Focal strategy at seat 0: a classic name or comma-separated components.
    #[arg(long)]
    pub strategy: Option<StrategySpec>,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Cesaro horizon.
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Clamp for the perturbed method.
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RegionArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub n_min: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub r_step: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub strategy: Option<StrategySpec>,
}

#[derive(Debug, Clone, Args)]
pub struct LearnArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub scenario: Option<Scenario>,
    /// Number of independent runs.
    #[arg(long)]
    pub seeds: Option<u64>,
    /// Stages per run.
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Leader strategy.
    #[arg(long)]
    pub strategy: Option<StrategySpec>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub epsilon_initial: Option<f64>,
    #[arg(long)]
    pub epsilon_decay: Option<f64>,
    #[arg(long)]
    pub epsilon_floor: Option<f64>,
    #[arg(long, value_enum)]
    pub average_rule: Option<AverageRule>,
    /// Distance from mutual cooperation that counts as converged.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Converged runs needed for success in scenarios A and C.
    #[arg(long)]
    pub min_converged: Option<u64>,
    /// Write every k-th stage to the trajectory files.
    #[arg(long)]
    pub record_every: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct CollusionArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

pub const DEFAULT_N: usize = 3;
pub const DEFAULT_R: f64 = 2.0;

fn game_of(cfg: &ExperimentConfig) -> Result<PublicGoodsGame, CliError> {
    Ok(PublicGoodsGame::new(
        cfg.n.unwrap_or(DEFAULT_N),
        cfg.r.unwrap_or(DEFAULT_R),
    )?)
}

pub fn run(cli: Cli) -> Result<Status, CliError> {
    match cli.command {
        Command::PayoffCloud(a) => {
            let cfg = a.common.merge(
                "payoff-cloud",
                ExperimentConfig {
                    strategy: a.strategy,
                    samples: a.samples,
                    method: a.method,
                    horizon: a.horizon,
                    delta: a.delta,
                    ..Default::default()
                },
            )?;
            commands::cloud::run(&cfg)
        }
        Command::RegionMap(a) => {
            let cfg = a.common.merge(
                "region-map",
                ExperimentConfig {
                    n_min: a.n_min,
                    n_max: a.n_max,
                    r_max: a.r_max,
                    r_step: a.r_step,
                    ..Default::default()
                },
            )?;
            commands::region::run(&cfg)
        }
        Command::Check(a) => {
            let cfg = a.common.merge(
                "check",
                ExperimentConfig {
                    strategy: a.strategy,
                    ..Default::default()
                },
            )?;
            commands::check::run(&cfg)
        }
        Command::Learn(a) => {
            let cfg = a.common.merge(
                "learn",
                ExperimentConfig {
                    scenario: a.scenario,
                    seeds: a.seeds,
                    horizon: a.horizon,
                    strategy: a.strategy,
                    alpha: a.alpha,
                    beta: a.beta,
                    average_rule: a.average_rule,
                    threshold: a.threshold,
                    min_converged: a.min_converged,
                    record_every: a.record_every,
                    ..Default::default()
                },
            )?;
            let eps = commands::learn::EpsilonFlags {
                initial: a.epsilon_initial,
                decay: a.epsilon_decay,
                floor: a.epsilon_floor,
            };
            commands::learn::run(&cfg, eps)
        }
        Command::Collusion(a) => {
            let cfg = a.common.merge("collusion", ExperimentConfig::default())?;
            commands::collusion::run(&cfg)
        }
    }
}
