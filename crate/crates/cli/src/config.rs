//! Experiment configuration: a JSON file merged under command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pgg_core::game::{classic_strategy, ClassicStrategy, MemoryOneStrategy};
use pgg_core::learning::{AverageRewardRule, Scenario};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// How the payoff cloud turns a profile into a limit distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Cesaro average from the first-move distribution.
    Cesaro,
    /// Stationary distribution; fails on reducible chains.
    Exact,
    /// Stationary distribution of the clamped chain.
    Perturbed,
    /// Exact when irreducible, Cesaro otherwise.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AverageRule {
    Verbatim,
    RunningMean,
}

impl From<AverageRule> for AverageRewardRule {
    fn from(rule: AverageRule) -> Self {
        match rule {
            AverageRule::Verbatim => AverageRewardRule::Verbatim,
            AverageRule::RunningMean => AverageRewardRule::RunningMean,
        }
    }
}

/// A strategy given by classic name or by its explicit components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StrategySpec {
    Named(String),
    Explicit(ExplicitStrategy),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitStrategy {
    pub p_c: Vec<f64>,
    pub p_d: Vec<f64>,
    #[serde(default = "one")]
    pub first_move: f64,
}

fn one() -> f64 {
    1.0
}

impl StrategySpec {
    pub fn resolve(&self, n: usize) -> Result<MemoryOneStrategy, CliError> {
        let p = match self {
            StrategySpec::Named(name) => classic_strategy(name, n)?,
            StrategySpec::Explicit(e) => {
                MemoryOneStrategy::new(e.p_c.clone(), e.p_d.clone(), e.first_move)?
            }
        };
        if p.players() != n {
            return Err(CliError::Usage(format!(
                "strategy has {} components per action but the game has {n} players",
                p.players()
            )));
        }
        Ok(p)
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategySpec::Named(name) => f.write_str(name),
            StrategySpec::Explicit(e) => {
                let parts: Vec<String> = e
                    .p_c
                    .iter()
                    .chain(&e.p_d)
                    .chain([&e.first_move])
                    .map(f64::to_string)
                    .collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

/// Accepts a classic name (`wsls`, `gt`, ...) or a comma-separated list of
/// `2n` components `p_c[0..n], p_d[0..n]`, optionally followed by the first
/// move.
impl FromStr for StrategySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if !s.contains(',') {
            s.parse::<ClassicStrategy>().map_err(|e| e.to_string())?;
            return Ok(StrategySpec::Named(s.to_string()));
        }
        let values = s
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format!("bad strategy component in `{s}`: {e}"))?;
        let (comps, first) = if values.len() % 2 == 1 {
            (&values[..values.len() - 1], values[values.len() - 1])
        } else {
            (&values[..], 1.0)
        };
        let half = comps.len() / 2;
        Ok(StrategySpec::Explicit(ExplicitStrategy {
            p_c: comps[..half].to_vec(),
            p_d: comps[half..].to_vec(),
            first_move: first,
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonConfig {
    pub initial: f64,
    pub decay: f64,
    pub floor: f64,
}

/// Everything a run can be configured with. Each command reads the fields it
/// needs; `experiment`, when present, must name the command being run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategySpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_min: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_step: Option<f64>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<EpsilonConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub average_rule: Option<AverageRule>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_converged: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_every: Option<u64>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),* $(,)?) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field; } )*
    };
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Values set in `top` replace those in `self`.
    pub fn overlay(mut self, top: ExperimentConfig) -> Self {
        overlay!(self, top;
            experiment, n, r, seed, out, format, strategy, samples, method, horizon, delta,
            n_min, n_max, r_max, r_step, scenario, seeds, alpha, beta, epsilon,
            average_rule, threshold, min_converged, record_every,
        );
        self
    }

    /// Rejects a file written for a different command.
    pub fn expect_experiment(&self, command: &str) -> Result<(), CliError> {
        match &self.experiment {
            Some(kind) if kind != command => Err(CliError::Usage(format!(
                "config is for `{kind}` but the command is `{command}`"
            ))),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_are_rejected() {
        let err = ExperimentConfig::from_json(r#"{"n": 3, "colour": 1}"#).unwrap_err();
        assert!(err.to_string().contains("colour"));
    }

    #[test]
    fn strategy_spec_accepts_names_and_vectors() {
        let named: StrategySpec = "WSLS".parse().unwrap();
        assert_eq!(
            named.resolve(3).unwrap(),
            classic_strategy("wsls", 3).unwrap()
        );
        let explicit: StrategySpec = "0,0,1,0,0,1".parse().unwrap();
        assert_eq!(
            explicit.resolve(3).unwrap(),
            classic_strategy("wsls", 3).unwrap()
        );
        let with_first: StrategySpec = "0,1,0,1,0.5".parse().unwrap();
        assert_eq!(with_first.resolve(2).unwrap().first_move(), 0.5);
        assert!("nonsense".parse::<StrategySpec>().is_err());
        assert!(explicit.resolve(4).is_err());
    }

    #[test]
    fn config_round_trips() {
        let text = r#"{"experiment":"learn","n":3,"r":2.0,"strategy":{"p_c":[0,0,1],"p_d":[0,0,1]},
            "scenario":"C","epsilon":{"initial":0.3,"decay":0.9999,"floor":0.001},
            "average_rule":"running-mean","format":"json"}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let again = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.scenario, Some(Scenario::C));
    }

    #[test]
    fn flags_win_over_file() {
        let file = ExperimentConfig {
            n: Some(4),
            r: Some(3.0),
            ..Default::default()
        };
        let flags = ExperimentConfig {
            r: Some(2.5),
            ..Default::default()
        };
        let merged = file.overlay(flags);
        assert_eq!((merged.n, merged.r), (Some(4), Some(2.5)));
    }
}
