//! Multi-seed learning runs with one trajectory file per seed and a summary.

use std::path::{Path, PathBuf};

use pgg_core::game::{MemoryOneStrategy, PublicGoodsGame};
use pgg_core::learning::{
    run_scenario, AverageRewardRule, EpsilonSchedule, LearnerConfig, Scenario, Trajectory,
};
use pgg_core::seed;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AverageRule, ExperimentConfig, Format, StrategySpec};
use crate::error::{CliError, Status};
use crate::output::{num, write_csv, write_json};

pub const DEFAULT_SEEDS: u64 = 10;
pub const DEFAULT_HORIZON: u64 = 100_000;
pub const DEFAULT_THRESHOLD: f64 = 0.05;
pub const SUMMARY_FILE: &str = "summary.json";

/// Per-field epsilon overrides from the command line.
#[derive(Debug, Clone, Copy, Default)]
pub struct EpsilonFlags {
    pub initial: Option<f64>,
    pub decay: Option<f64>,
    pub floor: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct LearnSettings {
    pub game: PublicGoodsGame,
    pub leader: MemoryOneStrategy,
    pub scenario: Scenario,
    pub seeds: u64,
    pub horizon: u64,
    pub learner: LearnerConfig,
    pub threshold: f64,
    pub min_converged: u64,
    pub record_every: u64,
    pub root_seed: u64,
}

impl LearnSettings {
    /// Collects every invalid field before failing.
    pub fn from_config(cfg: &ExperimentConfig, eps: EpsilonFlags) -> Result<Self, CliError> {
        let game = crate::game_of(cfg)?;
        let leader = cfg
            .strategy
            .clone()
            .unwrap_or(StrategySpec::Named("wsls".into()))
            .resolve(game.players())?;
        let mut schedule = EpsilonSchedule::default();
        if let Some(e) = &cfg.epsilon {
            schedule = EpsilonSchedule {
                initial: e.initial,
                decay: e.decay,
                floor: e.floor,
            };
        }
        schedule.initial = eps.initial.unwrap_or(schedule.initial);
        schedule.decay = eps.decay.unwrap_or(schedule.decay);
        schedule.floor = eps.floor.unwrap_or(schedule.floor);

        let defaults = LearnerConfig::default();
        let learner = LearnerConfig {
            alpha: cfg.alpha.unwrap_or(defaults.alpha),
            beta: cfg.beta.unwrap_or(defaults.beta),
            epsilon: schedule,
            seed: 0,
            average_rule: cfg
                .average_rule
                .map(AverageRewardRule::from)
                .unwrap_or(defaults.average_rule),
        };
        let seeds = cfg.seeds.unwrap_or(DEFAULT_SEEDS);
        let settings = Self {
            game,
            leader,
            scenario: cfg.scenario.unwrap_or(Scenario::A),
            seeds,
            horizon: cfg.horizon.unwrap_or(DEFAULT_HORIZON),
            learner,
            threshold: cfg.threshold.unwrap_or(DEFAULT_THRESHOLD),
            min_converged: cfg
                .min_converged
                .unwrap_or_else(|| (seeds * 8).div_ceil(10)),
            record_every: cfg.record_every.unwrap_or(1),
            root_seed: cfg.seed.unwrap_or(0),
        };
        settings.validate()?;
        Ok(settings)
    }

    fn validate(&self) -> Result<(), CliError> {
        let mut bad = Vec::new();
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        let prob = |x: f64| (0.0..=1.0).contains(&x);
        let l = &self.learner;
        if !unit(l.alpha) {
            bad.push(format!("alpha = {} must lie in (0, 1]", l.alpha));
        }
        if !unit(l.beta) {
            bad.push(format!("beta = {} must lie in (0, 1]", l.beta));
        }
        for (name, x) in [
            ("epsilon.initial", l.epsilon.initial),
            ("epsilon.decay", l.epsilon.decay),
            ("epsilon.floor", l.epsilon.floor),
        ] {
            if !prob(x) {
                bad.push(format!("{name} = {x} must lie in [0, 1]"));
            }
        }
        if self.seeds == 0 {
            bad.push("seeds must be at least 1".into());
        }
        if self.horizon == 0 {
            bad.push("horizon must be at least 1".into());
        }
        if self.record_every == 0 {
            bad.push("record_every must be at least 1".into());
        }
        if self.threshold.is_nan() || self.threshold <= 0.0 {
            bad.push(format!("threshold = {} must be positive", self.threshold));
        }
        if self.min_converged > self.seeds {
            bad.push(format!(
                "min_converged = {} exceeds seeds = {}",
                self.min_converged, self.seeds
            ));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(CliError::Usage(format!(
                "invalid learn configuration: {}",
                bad.join("; ")
            )))
        }
    }

    pub fn run_seed(&self, index: u64) -> Result<Trajectory, CliError> {
        let cfg = self.learner.with_seed(seed::split(self.root_seed, index));
        Ok(run_scenario(
            self.scenario,
            &self.game,
            &self.leader,
            &cfg,
            self.horizon,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub index: u64,
    pub seed: u64,
    pub final_averages: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnSummary {
    pub scenario: Scenario,
    pub n: usize,
    pub r: f64,
    pub leader: MemoryOneStrategy,
    pub horizon: u64,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: EpsilonSchedule,
    pub average_rule: AverageRule,
    pub target: f64,
    pub threshold: f64,
    pub runs: Vec<RunSummary>,
    pub converged: u64,
    /// Convergence is only asserted for scenarios A and C.
    pub asserted: bool,
    pub min_converged: u64,
    pub holds: bool,
}

pub fn trajectory_file(index: u64, format: Format) -> String {
    match format {
        Format::Csv => format!("trajectory-{index:03}.csv"),
        Format::Json => format!("trajectory-{index:03}.json"),
    }
}

#[derive(Serialize)]
struct Stage<'a> {
    t: usize,
    outcome: String,
    payoffs: &'a [f64],
    running: &'a [f64],
}

fn write_trajectory(
    path: &Path,
    tr: &Trajectory,
    every: u64,
    format: Format,
) -> Result<(), CliError> {
    let n = tr.players();
    let every = every as usize;
    let stages = (0..tr.len()).filter(|t| (t + 1) % every == 0 || t + 1 == tr.len());
    match format {
        Format::Csv => {
            let mut header = vec!["t".to_string(), "outcome".to_string()];
            header.extend((0..n).map(|i| format!("payoff{i}")));
            header.extend((0..n).map(|i| format!("avg{i}")));
            let rows = stages.map(|t| {
                let mut row = vec![(t + 1).to_string(), tr.outcome(t).to_string()];
                row.extend(tr.payoffs(t).iter().map(|&x| num(x)));
                row.extend(tr.running_averages(t).iter().map(|&x| num(x)));
                row
            });
            write_csv(Some(path), &header, rows)
        }
        Format::Json => {
            let records: Vec<Stage> = stages
                .map(|t| Stage {
                    t: t + 1,
                    outcome: tr.outcome(t).to_string(),
                    payoffs: tr.payoffs(t),
                    running: tr.running_averages(t),
                })
                .collect();
            write_json(Some(path), &records)
        }
    }
}

/// Runs every seed, writing trajectories into `dir` when given.
pub fn learn(
    settings: &LearnSettings,
    dir: Option<&Path>,
    format: Format,
) -> Result<LearnSummary, CliError> {
    let target = settings.game.mutual_cooperation_payoff();
    let runs = (0..settings.seeds)
        .into_par_iter()
        .map(|index| {
            let tr = settings.run_seed(index)?;
            if let Some(dir) = dir {
                let path: PathBuf = dir.join(trajectory_file(index, format));
                write_trajectory(&path, &tr, settings.record_every, format)?;
            }
            Ok(RunSummary {
                index,
                seed: seed::split(settings.root_seed, index),
                final_averages: tr.final_averages().to_vec(),
                converged: tr.converged(target, settings.threshold),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let converged = runs.iter().filter(|r| r.converged).count() as u64;
    let asserted = settings.scenario != Scenario::B;
    let l = &settings.learner;
    Ok(LearnSummary {
        scenario: settings.scenario,
        n: settings.game.players(),
        r: settings.game.factor(),
        leader: settings.leader.clone(),
        horizon: settings.horizon,
        alpha: l.alpha,
        beta: l.beta,
        epsilon: l.epsilon,
        average_rule: match l.average_rule {
            AverageRewardRule::Verbatim => AverageRule::Verbatim,
            AverageRewardRule::RunningMean => AverageRule::RunningMean,
        },
        target,
        threshold: settings.threshold,
        runs,
        converged,
        asserted,
        min_converged: settings.min_converged,
        holds: !asserted || converged >= settings.min_converged,
    })
}

pub fn run(cfg: &ExperimentConfig, eps: EpsilonFlags) -> Result<Status, CliError> {
    let settings = LearnSettings::from_config(cfg, eps)?;
    let dir = cfg
        .out
        .as_deref()
        .ok_or_else(|| CliError::Usage("learn needs --out <directory>".into()))?;
    std::fs::create_dir_all(dir)?;
    let summary = learn(&settings, Some(dir), cfg.format.unwrap_or(Format::Csv))?;
    write_json(Some(&dir.join(SUMMARY_FILE)), &summary)?;
    eprintln!(
        "scenario {}: {}/{} runs converged",
        summary.scenario, summary.converged, settings.seeds
    );
    Ok(Status::from_bool(summary.holds))
}
