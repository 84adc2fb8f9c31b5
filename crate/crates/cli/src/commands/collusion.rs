use pgg_core::enforcement::{collusion_scan, CollusionScan};

use crate::config::{ExperimentConfig, Format};
use crate::error::{CliError, Status};
use crate::output::{num, write_csv, write_json};

pub fn scan(cfg: &ExperimentConfig) -> Result<CollusionScan, CliError> {
    Ok(collusion_scan(&crate::game_of(cfg)?))
}

pub fn run(cfg: &ExperimentConfig) -> Result<Status, CliError> {
    let scan = scan(cfg)?;
    let out = cfg.out.as_deref();
    match cfg.format.unwrap_or(Format::Json) {
        Format::Json => write_json(out, &scan)?,
        Format::Csv => {
            let header = ["m", "k", "collusive_avg", "gain"]
                .map(String::from)
                .to_vec();
            let rows = scan.reports.iter().map(|rep| {
                vec![
                    rep.m.to_string(),
                    rep.k.to_string(),
                    num(rep.collusive_avg),
                    num(rep.gain),
                ]
            });
            write_csv(out, &header, rows)?;
        }
    }
    if let Some(rep) = scan.reports.iter().find(|rep| rep.gain > 0.0) {
        eprintln!(
            "alliance of {} with {} cooperators gains {}",
            rep.m, rep.k, rep.gain
        );
    }
    Ok(Status::from_bool(scan.resistant))
}
