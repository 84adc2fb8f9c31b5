use pgg_core::enforcement::{check_enforcing, necessary_conditions, EnforcementVerdict};
use pgg_core::game::MemoryOneStrategy;
use serde::Serialize;

use crate::config::{ExperimentConfig, Format};
use crate::error::{CliError, Status};
use crate::output::{num, write_csv, write_json};

#[derive(Debug, Serialize)]
pub struct CheckReport {
    pub strategy: MemoryOneStrategy,
    pub necessary: Vec<Necessary>,
    pub verdict: EnforcementVerdict,
}

#[derive(Debug, Serialize)]
pub struct Necessary {
    pub name: String,
    pub holds: bool,
}

pub fn check(cfg: &ExperimentConfig) -> Result<CheckReport, CliError> {
    let game = crate::game_of(cfg)?;
    let spec = cfg
        .strategy
        .clone()
        .ok_or_else(|| CliError::Usage("check needs --strategy".into()))?;
    let strategy = spec.resolve(game.players())?;
    let necessary = necessary_conditions(&game, &strategy)?
        .into_iter()
        .map(|c| Necessary {
            name: c.name.to_string(),
            holds: c.holds,
        })
        .collect();
    let verdict = check_enforcing(&game, &strategy)?;
    Ok(CheckReport {
        strategy,
        necessary,
        verdict,
    })
}

pub fn run(cfg: &ExperimentConfig) -> Result<Status, CliError> {
    let report = check(cfg)?;
    let out = cfg.out.as_deref();
    match cfg.format.unwrap_or(Format::Json) {
        Format::Json => write_json(out, &report)?,
        Format::Csv => {
            let header = ["constraint", "relation", "bound", "value", "satisfied"]
                .map(String::from)
                .to_vec();
            let v = &report.verdict;
            let rows = v
                .constraints
                .iter()
                .map(|c| {
                    let relation = match c.relation {
                        pgg_core::enforcement::Relation::Equal => "=",
                        pgg_core::enforcement::Relation::Below => "<",
                    };
                    vec![
                        c.name.clone(),
                        relation.to_string(),
                        num(c.bound),
                        num(c.value),
                        c.satisfied.to_string(),
                    ]
                })
                .chain([vec![
                    "applicable".into(),
                    "=".into(),
                    "true".into(),
                    v.applicable.to_string(),
                    v.applicable.to_string(),
                ]]);
            write_csv(out, &header, rows)?;
        }
    }
    if !report.verdict.overall {
        let failed: Vec<_> = report.verdict.failed().map(|c| c.name.as_str()).collect();
        if report.verdict.applicable {
            eprintln!("not certified: {}", failed.join(", "));
        } else {
            eprintln!("not applicable: r/n must exceed 1/2");
        }
    }
    Ok(Status::from_bool(report.verdict.overall))
}
