//! Cooperation-enforcing strategies and collusion payoffs.
//!
//! A memory-one strategy is cooperation enforcing when no single opponent can
//! earn more than the full-cooperation payoff `R_{c,n-1}` against it, and can
//! only match it if everyone cooperates for good. [`check_enforcing`] certifies
//! a sufficient linear region for that property: open with cooperation, keep
//! cooperating after full cooperation, `p_{c,n-2} < 1`, and every `p_{d,k}`
//! below the bound returned by [`defection_bounds`].

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::game::{Action, MemoryOneStrategy, PublicGoodsGame};
use crate::markov::{MarginalDistribution, PairAction};
use crate::seed;

/// Strict inequalities must hold by more than this.
pub const STRICT_SLACK: f64 = 1e-12;

/// Distance the sampler keeps from every strict bound.
pub const SAMPLER_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Relation {
    #[cfg_attr(feature = "serde", serde(rename = "="))]
    Equal,
    #[cfg_attr(feature = "serde", serde(rename = "<"))]
    Below,
}

/// One line of an [`EnforcementVerdict`]: `value relation bound`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Constraint {
    pub name: String,
    pub relation: Relation,
    pub bound: f64,
    pub value: f64,
    pub satisfied: bool,
}

impl Constraint {
    fn equal(name: String, bound: f64, value: f64) -> Self {
        Self {
            name,
            relation: Relation::Equal,
            bound,
            value,
            satisfied: value == bound,
        }
    }

    fn below(name: String, bound: f64, value: f64) -> Self {
        Self {
            name,
            relation: Relation::Below,
            bound,
            value,
            satisfied: bound - value > STRICT_SLACK,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnforcementVerdict {
    pub n: usize,
    pub r: f64,
    /// `r / n > 1/2`.
    pub applicable: bool,
    pub constraints: Vec<Constraint>,
    /// Components left free by the region (`p_{c,k}` for `k <= n - 3`).
    pub unconstrained: Vec<String>,
    pub overall: bool,
}

impl EnforcementVerdict {
    pub fn failed(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter().filter(|c| !c.satisfied)
    }

    pub fn constraint(&self, name: &str) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NecessaryCondition {
    pub name: &'static str,
    pub holds: bool,
}

/// Name of the existence condition in [`necessary_conditions`].
pub const EXISTENCE_CONDITION: &str = "r/n > 1/2";

/// The two conditions every enforcing strategy must meet: `p_{c,n-2} < 1`
/// (otherwise a lone ALLD opponent among ALLC players profits) and `r/n > 1/2`.
pub fn necessary_conditions(
    game: &PublicGoodsGame,
    p: &MemoryOneStrategy,
) -> Result<Vec<NecessaryCondition>> {
    check_dimension(game, p)?;
    let n = game.players();
    Ok(vec![
        NecessaryCondition {
            name: "p_c[n-2] < 1",
            holds: p.p_c()[n - 2] < 1.0,
        },
        NecessaryCondition {
            name: EXISTENCE_CONDITION,
            holds: game.admits_enforcement(),
        },
    ])
}

fn check_dimension(game: &PublicGoodsGame, p: &MemoryOneStrategy) -> Result<()> {
    if p.players() != game.players() {
        return Err(Error::DimensionMismatch {
            expected: game.players(),
            found: p.players(),
        });
    }
    Ok(())
}

/// Upper bounds on `p_{d,0..n-1}` for a given `p_{c,n-2}`.
///
/// Entry `k < n - 1` is `(1 - p_{c,n-2})(R_{c,n-1} - R_{d,k}) / (R_{d,n-1} - R_{c,n-1})`;
/// the last entry uses `R_{c,n-2}` in place of `R_{d,k}`.
pub fn defection_bounds(game: &PublicGoodsGame, p_c_second: f64) -> Result<Vec<f64>> {
    if !game.admits_enforcement() {
        return Err(Error::Inapplicable {
            n: game.players(),
            r: game.factor(),
        });
    }
    if !(0.0..1.0).contains(&p_c_second) {
        return Err(Error::InvalidProbability {
            what: "p_c[n-2] (must be below 1)".into(),
            value: p_c_second,
        });
    }
    Ok(raw_bounds(game, p_c_second))
}

fn raw_bounds(game: &PublicGoodsGame, p_c_second: f64) -> Vec<f64> {
    let n = game.players();
    let mutual = game.mutual_cooperation_payoff();
    let temptation = game.payoff_unchecked(Action::Defect, n - 1) - mutual;
    let scale = (1.0 - p_c_second) / temptation;
    (0..n)
        .map(|k| {
            let reference = if k == n - 1 {
                game.payoff_unchecked(Action::Cooperate, n - 2)
            } else {
                game.payoff_unchecked(Action::Defect, k)
            };
            scale * (mutual - reference)
        })
        .collect()
}

/// Checks `p` against the sufficient region for cooperation enforcement.
///
/// When `r <= n/2` the verdict is inapplicable and `overall` is false; the
/// per-constraint lines are still filled in from the same formulas.
pub fn check_enforcing(
    game: &PublicGoodsGame,
    p: &MemoryOneStrategy,
) -> Result<EnforcementVerdict> {
    check_dimension(game, p)?;
    let n = game.players();
    let p_c_second = p.p_c()[n - 2];
    let bounds = raw_bounds(game, p_c_second.min(1.0));

    let mut constraints = Vec::with_capacity(n + 3);
    constraints.push(Constraint::equal("first_move".into(), 1.0, p.first_move()));
    constraints.push(Constraint::equal(
        format!("p_c[{}]", n - 1),
        1.0,
        p.p_c()[n - 1],
    ));
    constraints.push(Constraint::below(
        format!("p_c[{}]", n - 2),
        1.0,
        p_c_second,
    ));
    for (k, (&bound, &value)) in bounds.iter().zip(p.p_d()).enumerate() {
        constraints.push(Constraint::below(format!("p_d[{k}]"), bound, value));
    }
    let unconstrained = (0..n.saturating_sub(2))
        .map(|k| format!("p_c[{k}]"))
        .collect();

    let applicable = game.admits_enforcement();
    let overall = applicable && constraints.iter().all(|c| c.satisfied);
    Ok(EnforcementVerdict {
        n,
        r: game.factor(),
        applicable,
        constraints,
        unconstrained,
        overall,
    })
}

/// Coefficients `b` with `(1 - p_{c,n-2})(pi_j - R_{c,n-1}) = sum b . u` for
/// the marginal `u` of any limit distribution where `p` sits at the focal seat.
///
/// The `u_{cd,n-2}` coefficient is zero by construction and `u_{cc,n-2}`'s is
/// `(R_{d,n-1} - R_{c,n-1})(p_{c,n-1} - 1)`. Every other entry is negative inside the region
/// certified by [`check_enforcing`].
pub fn enforcement_coefficients(game: &PublicGoodsGame, p: &MemoryOneStrategy) -> Result<Vec<f64>> {
    check_dimension(game, p)?;
    let n = game.players();
    let mutual = game.mutual_cooperation_payoff();
    let temptation = game.payoff_unchecked(Action::Defect, n - 1) - mutual;
    let weight = 1.0 - p.p_c()[n - 2];
    let mut b = vec![0.0; 4 * (n - 1)];
    for pair in PairAction::ALL {
        for k in 0..n - 1 {
            let focal_sees = k + pair.opponent().is_cooperate() as usize;
            let opponent_sees = k + pair.focal().is_cooperate() as usize;
            let gap = game.payoff_unchecked(pair.opponent(), opponent_sees) - mutual;
            let drift = match pair.focal() {
                Action::Cooperate => p.p_c()[focal_sees] - 1.0,
                Action::Defect => p.p_d()[focal_sees],
            };
            b[MarginalDistribution::slot(n, pair, k)] = weight * gap + temptation * drift;
        }
    }
    Ok(b)
}

/// Draws a strategy from the certified region with a fixed seed.
pub fn sample_enforcing(game: &PublicGoodsGame, seed: u64) -> Result<MemoryOneStrategy> {
    sample_enforcing_with(game, &mut seed::rng(seed))
}

/// Draws a strategy from the certified region.
///
/// `p_{c,n-1} = 1` and the first move is cooperation; `p_{c,n-2}` is uniform
/// on `[0, 1 - margin]`, the free `p_{c,k}` are uniform on `[0, 1]`, and each
/// `p_{d,k}` is uniform on `[0, min(1, bound_k) - margin]`. A `p_{c,n-2}`
/// draw whose bounds fall within twice the margin of zero is redrawn.
pub fn sample_enforcing_with<R: rand::Rng + ?Sized>(
    game: &PublicGoodsGame,
    rng: &mut R,
) -> Result<MemoryOneStrategy> {
    let n = game.players();
    if !game.admits_enforcement() {
        return Err(Error::Inapplicable {
            n,
            r: game.factor(),
        });
    }
    let roomy = |bounds: &[f64]| bounds.iter().all(|&b| b > 2.0 * SAMPLER_MARGIN);
    if !roomy(&raw_bounds(game, 0.0)) {
        // r is so close to n/2 that the region is numerically empty.
        return Err(Error::Inapplicable {
            n,
            r: game.factor(),
        });
    }
    let (p_c_second, bounds) = loop {
        let x = rng.gen::<f64>() * (1.0 - SAMPLER_MARGIN);
        let bounds = raw_bounds(game, x);
        if roomy(&bounds) {
            break (x, bounds);
        }
    };
    let mut p_c: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    p_c[n - 2] = p_c_second;
    p_c[n - 1] = 1.0;
    let p_d = bounds
        .iter()
        .map(|&b| rng.gen::<f64>() * (b.min(1.0) - SAMPLER_MARGIN))
        .collect();
    MemoryOneStrategy::new(p_c, p_d, 1.0)
}

/// Average payoff of an alliance of `m` players, `k` of whom cooperate, while
/// the remaining `n - m` players cooperate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CollusionReport {
    pub m: usize,
    pub k: usize,
    pub collusive_avg: f64,
    /// `collusive_avg - R_{c,n-1} = (m - k)(n - m r) / (m n)`.
    pub gain: f64,
}

pub fn collusion_gain(game: &PublicGoodsGame, m: usize, k: usize) -> Result<CollusionReport> {
    let n = game.players();
    if m < 2 || m > n {
        return Err(Error::InvalidArgument(format!(
            "alliance size {m} must lie in 2..={n}"
        )));
    }
    if k > m {
        return Err(Error::OutOfRange {
            what: "cooperators inside the alliance",
            value: k,
            limit: m + 1,
        });
    }
    let outsiders = n - m;
    let mut total = 0.0;
    if k > 0 {
        total += k as f64 * game.payoff_unchecked(Action::Cooperate, k + outsiders - 1);
    }
    if k < m {
        total += (m - k) as f64 * game.payoff_unchecked(Action::Defect, k + outsiders);
    }
    let (mf, nf) = (m as f64, n as f64);
    Ok(CollusionReport {
        m,
        k,
        collusive_avg: total / mf,
        gain: (m - k) as f64 * (nf - mf * game.factor()) / (mf * nf),
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CollusionScan {
    pub n: usize,
    pub r: f64,
    /// One report per `2 <= m <= n`, `0 <= k < m`.
    pub reports: Vec<CollusionReport>,
    /// No alliance gains anything.
    pub resistant: bool,
    /// Smallest `m` with `r < n/m`, i.e. the smallest alliance that profits.
    pub smallest_profitable_alliance: Option<usize>,
}

pub fn collusion_scan(game: &PublicGoodsGame) -> CollusionScan {
    let n = game.players();
    let reports: Vec<_> = (2..=n)
        .flat_map(|m| (0..m).map(move |k| (m, k)))
        .map(|(m, k)| collusion_gain(game, m, k).expect("m and k are in range"))
        .collect();
    CollusionScan {
        n,
        r: game.factor(),
        resistant: reports.iter().all(|rep| rep.gain <= 0.0),
        reports,
        smallest_profitable_alliance: smallest_profitable_alliance(n, game.factor()),
    }
}

/// Smallest alliance size `m >= 2` with `r < n/m`.
pub fn smallest_profitable_alliance(n: usize, r: f64) -> Option<usize> {
    (2..=n).find(|&m| (m as f64) * r < n as f64)
}

/// Where `(n, r)` sits in the parameter plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Regime {
    /// `r <= 1` or `r >= n`.
    NoDilemma,
    /// `n/2 < r < n`.
    EnforcingExists,
    /// `1 < r <= n/2`.
    EnforcingImpossible,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::NoDilemma => "no-dilemma",
            Regime::EnforcingExists => "enforcing-exists",
            Regime::EnforcingImpossible => "enforcing-impossible",
        }
    }
}

pub fn classify_region(n: usize, r: f64) -> Regime {
    let nf = n as f64;
    if !(r > 1.0 && r < nf) {
        Regime::NoDilemma
    } else if 2.0 * r > nf {
        Regime::EnforcingExists
    } else {
        Regime::EnforcingImpossible
    }
}
