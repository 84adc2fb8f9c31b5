//! Payoffs of random opponents facing a fixed focal strategy at seat 0.

use pgg_core::enforcement::check_enforcing;
use pgg_core::game::{ClassicStrategy, MemoryOneStrategy, PublicGoodsGame, StrategyProfile};
use pgg_core::markov::{expected_payoffs, profile_limit, LimitMethod, DEFAULT_CESARO_HORIZON};
use pgg_core::seed;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Format, Method, StrategySpec};
use crate::error::{CliError, Status};
use crate::output::{num, write_csv, write_json};

pub const DEFAULT_SAMPLES: u64 = 100_000;
pub const DEFAULT_DELTA: f64 = 1e-6;
/// Allowed excess of an opponent's payoff over mutual cooperation.
pub const BOUND_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CloudRecord {
    /// `focal` and `alld` for the injected profiles, the sample index otherwise.
    pub label: String,
    /// Strategies at seats `1..n`.
    pub opponents: Vec<MemoryOneStrategy>,
    pub payoffs: Vec<f64>,
    pub diagnostic: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CloudReport {
    pub n: usize,
    pub r: f64,
    pub focal: MemoryOneStrategy,
    pub method: Method,
    pub horizon: u64,
    pub seed: u64,
    pub samples: u64,
    /// `R_{c,n-1}`.
    pub bound: f64,
    pub max_opponent_payoff: f64,
    pub violations: u64,
    pub records: Vec<CloudRecord>,
}

#[derive(Debug, Clone)]
pub struct CloudSettings {
    pub game: PublicGoodsGame,
    pub focal: MemoryOneStrategy,
    pub samples: u64,
    pub method: Method,
    pub horizon: u64,
    pub delta: f64,
    pub seed: u64,
}

impl CloudSettings {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let game = crate::game_of(cfg)?;
        let focal = cfg
            .strategy
            .clone()
            .unwrap_or(StrategySpec::Named("wsls".into()))
            .resolve(game.players())?;
        let horizon = cfg.horizon.unwrap_or(DEFAULT_CESARO_HORIZON);
        if horizon == 0 {
            return Err(CliError::Usage("horizon must be at least 1".into()));
        }
        Ok(Self {
            game,
            focal,
            samples: cfg.samples.unwrap_or(DEFAULT_SAMPLES),
            method: cfg.method.unwrap_or(Method::Cesaro),
            horizon,
            delta: cfg.delta.unwrap_or(DEFAULT_DELTA),
            seed: cfg.seed.unwrap_or(0),
        })
    }

    fn limit_method(&self) -> LimitMethod {
        match self.method {
            Method::Cesaro => LimitMethod::Cesaro {
                horizon: self.horizon,
            },
            Method::Exact => LimitMethod::Exact,
            Method::Perturbed => LimitMethod::Perturbed { delta: self.delta },
            Method::Auto => LimitMethod::Auto {
                horizon: self.horizon,
            },
        }
    }
}

/// Opponent strategy with every component uniform on `[0, 1]` and an even
/// first move.
pub fn random_opponent<R: Rng>(n: usize, rng: &mut R) -> MemoryOneStrategy {
    let flat: Vec<f64> = (0..2 * n).map(|_| rng.gen::<f64>()).collect();
    MemoryOneStrategy::from_flat(&flat, 0.5).expect("uniform draws are probabilities")
}

fn evaluate(
    settings: &CloudSettings,
    label: String,
    opponents: Vec<MemoryOneStrategy>,
) -> Result<CloudRecord, CliError> {
    let mut seats = Vec::with_capacity(opponents.len() + 1);
    seats.push(settings.focal.clone());
    seats.extend(opponents.iter().cloned());
    let profile = StrategyProfile::new(seats)?;
    let v = profile_limit(&profile, settings.limit_method())?;
    Ok(CloudRecord {
        label,
        opponents,
        payoffs: expected_payoffs(&settings.game, &v)?,
        diagnostic: v.diagnostic(),
    })
}

/// Fails with a usage error when the focal strategy is not certified.
pub fn payoff_cloud(settings: &CloudSettings) -> Result<CloudReport, CliError> {
    let game = &settings.game;
    let n = game.players();
    let verdict = check_enforcing(game, &settings.focal)?;
    if !verdict.overall {
        let failed: Vec<_> = verdict.failed().map(|c| c.name.clone()).collect();
        return Err(CliError::Usage(format!(
            "focal strategy is not certified cooperation enforcing (applicable: {}, failed: {})",
            verdict.applicable,
            failed.join(", ")
        )));
    }

    let alld = ClassicStrategy::AllD.build(n)?;
    let mut records = vec![
        evaluate(
            settings,
            "focal".into(),
            vec![settings.focal.clone(); n - 1],
        )?,
        evaluate(settings, "alld".into(), vec![alld; n - 1])?,
    ];
    let sampled = (0..settings.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::child_rng(settings.seed, i);
            let opponents = (1..n).map(|_| random_opponent(n, &mut rng)).collect();
            evaluate(settings, i.to_string(), opponents)
        })
        .collect::<Result<Vec<_>, _>>()?;
    records.extend(sampled);

    let bound = game.mutual_cooperation_payoff();
    let (lo, hi) = game.payoff_range();
    let mut max_opponent = f64::NEG_INFINITY;
    let mut violations = 0;
    for rec in &records {
        let opp = rec.payoffs[1..]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        max_opponent = max_opponent.max(opp);
        let out_of_range = rec.payoffs.iter().any(|&x| x < lo - 1e-9 || x > hi + 1e-9);
        if opp > bound + BOUND_TOLERANCE || out_of_range {
            violations += 1;
        }
    }

    Ok(CloudReport {
        n,
        r: game.factor(),
        focal: settings.focal.clone(),
        method: settings.method,
        horizon: settings.horizon,
        seed: settings.seed,
        samples: settings.samples,
        bound,
        max_opponent_payoff: max_opponent,
        violations,
        records,
    })
}

pub fn csv_header(n: usize) -> Vec<String> {
    let mut h = vec!["label".to_string()];
    for j in 1..n {
        h.extend((0..n).map(|k| format!("p{j}_c{k}")));
        h.extend((0..n).map(|k| format!("p{j}_d{k}")));
        h.push(format!("p{j}_first"));
    }
    h.extend((0..n).map(|i| format!("pi{i}")));
    h.push("diagnostic".into());
    h
}

fn csv_row(rec: &CloudRecord) -> Vec<String> {
    let mut row = vec![rec.label.clone()];
    for p in &rec.opponents {
        row.extend(p.p_c().iter().chain(p.p_d()).map(|&x| num(x)));
        row.push(num(p.first_move()));
    }
    row.extend(rec.payoffs.iter().map(|&x| num(x)));
    row.push(rec.diagnostic.map(num).unwrap_or_default());
    row
}

pub fn run(cfg: &ExperimentConfig) -> Result<Status, CliError> {
    let settings = CloudSettings::from_config(cfg)?;
    let report = payoff_cloud(&settings)?;
    let out = cfg.out.as_deref();
    match cfg.format.unwrap_or(Format::Csv) {
        Format::Json => write_json(out, &report)?,
        Format::Csv => write_csv(
            out,
            &csv_header(report.n),
            report.records.iter().map(csv_row),
        )?,
    }
    eprintln!(
        "{} records, max opponent payoff {}, bound {}, violations {}",
        report.records.len(),
        report.max_opponent_payoff,
        report.bound,
        report.violations
    );
    Ok(Status::from_bool(report.violations == 0))
}
