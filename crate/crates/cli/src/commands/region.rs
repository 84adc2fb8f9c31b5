use pgg_core::enforcement::{classify_region, smallest_profitable_alliance, Regime};
use serde::Serialize;

use crate::config::{ExperimentConfig, Format};
use crate::error::{CliError, Status};
use crate::output::{num, write_csv, write_json};

pub const DEFAULT_N_MIN: usize = 2;
pub const DEFAULT_N_MAX: usize = 10;
pub const DEFAULT_R_STEP: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionPoint {
    pub n: usize,
    pub r: f64,
    pub regime: Regime,
    /// Only reported where enforcing strategies cannot exist.
    pub smallest_profitable_alliance: Option<usize>,
}

fn round(x: f64) -> f64 {
    (x * 1e10).round() / 1e10
}

pub fn grid(cfg: &ExperimentConfig) -> Result<Vec<RegionPoint>, CliError> {
    let (n_min, n_max) = match cfg.n {
        Some(n) => (n, n),
        None => (
            cfg.n_min.unwrap_or(DEFAULT_N_MIN),
            cfg.n_max.unwrap_or(DEFAULT_N_MAX),
        ),
    };
    if n_min < 2 || n_min > n_max {
        return Err(CliError::Usage(format!(
            "player range {n_min}..={n_max} must be non-empty and start at 2 or more"
        )));
    }
    let rs: Vec<f64> = match cfg.r {
        Some(r) => vec![r],
        None => {
            let step = cfg.r_step.unwrap_or(DEFAULT_R_STEP);
            let r_max = cfg.r_max.unwrap_or(n_max as f64);
            if !(step > 0.0 && step.is_finite()) || !(r_max > 0.0 && r_max.is_finite()) {
                return Err(CliError::Usage(format!(
                    "r grid needs a positive step and maximum, got step {step}, max {r_max}"
                )));
            }
            let count = (r_max / step + 1e-9).floor() as u64;
            (1..=count).map(|i| round(i as f64 * step)).collect()
        }
    };
    let mut points = Vec::with_capacity((n_max - n_min + 1) * rs.len());
    for n in n_min..=n_max {
        for &r in &rs {
            let regime = classify_region(n, r);
            points.push(RegionPoint {
                n,
                r,
                regime,
                smallest_profitable_alliance: match regime {
                    Regime::EnforcingImpossible => smallest_profitable_alliance(n, r),
                    _ => None,
                },
            });
        }
    }
    Ok(points)
}

pub fn run(cfg: &ExperimentConfig) -> Result<Status, CliError> {
    let points = grid(cfg)?;
    let out = cfg.out.as_deref();
    match cfg.format.unwrap_or(Format::Csv) {
        Format::Json => write_json(out, &points)?,
        Format::Csv => {
            let header = ["n", "r", "regime", "smallest_profitable_alliance"]
                .map(String::from)
                .to_vec();
            let rows = points.iter().map(|p| {
                vec![
                    p.n.to_string(),
                    num(p.r),
                    p.regime.name().to_string(),
                    p.smallest_profitable_alliance
                        .map(|m| m.to_string())
                        .unwrap_or_default(),
                ]
            });
            write_csv(out, &header, rows)?;
        }
    }
    Ok(Status::Holds)
}
