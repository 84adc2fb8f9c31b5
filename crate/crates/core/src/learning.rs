//! Tabular average-reward Q-learning against committed memory-one leaders.
//!
//! A learner observes the full previous outcome, picks an action
//! epsilon-greedily from `Q(o, .)`, and after the stage applies
//!
//! ```text
//! delta  = R - avg + max_a' Q(o', a') - Q(o, a)
//! Q(o,a) += alpha * delta
//! if Q(o,a) is a row maximum: avg = (1 - beta) avg + beta ((t - 1) avg + R) / t
//! ```
//!
//! An alliance is a single learner whose actions are the joint actions of its
//! members and whose reward is their mean stage payoff.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::enforcement::check_enforcing;
use crate::error::{Error, Result};
use crate::game::{MemoryOneStrategy, Outcome, PublicGoodsGame};
use crate::markov::lift_strategy;
use crate::seed;

/// Exploration rate `max(floor, initial * decay^(t-1))` at stage `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct EpsilonSchedule {
    pub initial: f64,
    pub decay: f64,
    pub floor: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            initial: 0.3,
            decay: 0.9999,
            floor: 0.001,
        }
    }
}

impl EpsilonSchedule {
    pub fn constant(epsilon: f64) -> Self {
        Self {
            initial: epsilon,
            decay: 1.0,
            floor: epsilon,
        }
    }

    fn next(&self, current: f64) -> f64 {
        (current * self.decay).max(self.floor)
    }
}

/// How the average-reward estimate moves when the greedy gate opens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum AverageRewardRule {
    /// `avg = (1 - beta) avg + beta ((t - 1) avg + R) / t`.
    #[default]
    Verbatim,
    /// `avg = ((t - 1) avg + R) / t`.
    RunningMean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LearnerConfig {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: EpsilonSchedule,
    pub seed: u64,
    pub average_rule: AverageRewardRule,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 0.01,
            epsilon: EpsilonSchedule::default(),
            seed: 0,
            average_rule: AverageRewardRule::Verbatim,
        }
    }
}

impl LearnerConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        let prob = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.alpha) {
            return Err(Error::InvalidArgument(alloc::format!(
                "alpha = {} must lie in (0, 1]",
                self.alpha
            )));
        }
        if !unit(self.beta) {
            return Err(Error::InvalidArgument(alloc::format!(
                "beta = {} must lie in (0, 1]",
                self.beta
            )));
        }
        let e = self.epsilon;
        if !(prob(e.initial) && prob(e.decay) && prob(e.floor)) {
            return Err(Error::InvalidArgument(alloc::format!(
                "epsilon schedule {e:?} must have every value in [0, 1]"
            )));
        }
        Ok(())
    }
}

/// `Q(o, a)` over all outcomes plus the average-reward estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    states: usize,
    actions: usize,
    values: Vec<f64>,
    avg_reward: f64,
}

impl QTable {
    /// All-zero table for `n` players and `actions` choices per state.
    pub fn new(n: usize, actions: usize) -> Self {
        let states = 1usize << n;
        Self {
            states,
            actions,
            values: vec![0.0; states * actions],
            avg_reward: 0.0,
        }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn get(&self, o: Outcome, action: usize) -> f64 {
        self.values[o.index() * self.actions + action]
    }

    pub fn set(&mut self, o: Outcome, action: usize, value: f64) {
        self.values[o.index() * self.actions + action] = value;
    }

    pub fn row(&self, o: Outcome) -> &[f64] {
        &self.values[o.index() * self.actions..(o.index() + 1) * self.actions]
    }

    pub fn avg_reward(&self) -> f64 {
        self.avg_reward
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn row_max(&self, o: Outcome) -> f64 {
        self.row(o)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Epsilon-greedy choice at state `o`; ties among maximizers are broken
/// uniformly at random.
pub fn select_action<R: Rng + ?Sized>(q: &QTable, o: Outcome, epsilon: f64, rng: &mut R) -> usize {
    if rng.gen::<f64>() < epsilon {
        return rng.gen_range(0..q.actions);
    }
    let row = q.row(o);
    let best = q.row_max(o);
    let ties = row.iter().filter(|&&x| x == best).count();
    let pick = if ties > 1 { rng.gen_range(0..ties) } else { 0 };
    row.iter()
        .enumerate()
        .filter(|(_, &x)| x == best)
        .nth(pick)
        .map(|(a, _)| a)
        .expect("a row always has a maximum")
}

/// One learning step after taking `action` in `prev` and landing in `next`
/// with `reward` at stage `t >= 1`. Returns the temporal difference.
pub fn learner_update(
    q: &mut QTable,
    prev: Outcome,
    action: usize,
    next: Outcome,
    reward: f64,
    t: u64,
    cfg: &LearnerConfig,
) -> f64 {
    debug_assert!(t >= 1);
    let current = q.get(prev, action);
    let delta = reward - q.avg_reward + q.row_max(next) - current;
    let updated = current + cfg.alpha * delta;
    q.set(prev, action, updated);
    // Gate compares against the row maximum after the update.
    if updated >= q.row_max(prev) {
        let tf = t as f64;
        let mean = ((tf - 1.0) * q.avg_reward + reward) / tf;
        q.avg_reward = match cfg.average_rule {
            AverageRewardRule::Verbatim => (1.0 - cfg.beta) * q.avg_reward + cfg.beta * mean,
            AverageRewardRule::RunningMean => mean,
        };
    }
    delta
}

/// Who sits where in a learning run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Scenario {
    /// Every seat but the last plays the leader strategy; the last seat learns.
    A,
    /// Seat 0 leads; every other seat is an independent learner.
    B,
    /// Seat 0 leads; all other seats form one learning alliance.
    C,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::A, Scenario::B, Scenario::C];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::A => "A",
            Scenario::B => "B",
            Scenario::C => "C",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Scenario::A),
            "B" | "b" => Ok(Scenario::B),
            "C" | "c" => Ok(Scenario::C),
            other => Err(Error::InvalidArgument(alloc::format!(
                "unknown scenario `{other}` (expected A, B or C)"
            ))),
        }
    }
}

/// Largest alliance whose joint action space is tabulated.
pub const MAX_ALLIANCE: usize = 10;

/// Per-stage outcomes, payoffs and running average payoffs of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    n: usize,
    outcomes: Vec<u32>,
    payoffs: Vec<f64>,
    running: Vec<f64>,
}

impl Trajectory {
    fn with_capacity(n: usize, stages: usize) -> Self {
        Self {
            n,
            outcomes: Vec::with_capacity(stages),
            payoffs: Vec::with_capacity(stages * n),
            running: Vec::with_capacity(stages * n),
        }
    }

    pub fn players(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// Outcome of stage `t` (0-based).
    pub fn outcome(&self, t: usize) -> Outcome {
        Outcome::new(self.outcomes[t], self.n).expect("recorded outcomes are valid")
    }

    pub fn payoffs(&self, t: usize) -> &[f64] {
        &self.payoffs[t * self.n..(t + 1) * self.n]
    }

    pub fn running_averages(&self, t: usize) -> &[f64] {
        &self.running[t * self.n..(t + 1) * self.n]
    }

    pub fn final_averages(&self) -> &[f64] {
        self.running_averages(self.len() - 1)
    }

    /// Every player's final running average is within `tol` of `target`.
    pub fn converged(&self, target: f64, tol: f64) -> bool {
        !self.is_empty()
            && self
                .final_averages()
                .iter()
                .all(|x| (x - target).abs() <= tol)
    }
}

enum Agent {
    Leader { seat: usize, lifted: Vec<f64> },
    Learner { seat: usize, q: QTable },
    Alliance { seats: Vec<usize>, q: QTable },
}

/// Plays `horizon` stages of `scenario` starting from `c^n`.
///
/// `leader` must pass [`check_enforcing`]. The run is a deterministic
/// function of its arguments.
pub fn run_scenario(
    scenario: Scenario,
    game: &PublicGoodsGame,
    leader: &MemoryOneStrategy,
    cfg: &LearnerConfig,
    horizon: u64,
) -> Result<Trajectory> {
    cfg.validate()?;
    let n = game.players();
    let verdict = check_enforcing(game, leader)?;
    if !verdict.overall {
        return Err(Error::InvalidArgument(alloc::format!(
            "leader strategy is not certified cooperation enforcing for n = {n}, r = {}",
            game.factor()
        )));
    }
    let leader_at = |seat: usize| -> Result<Agent> {
        Ok(Agent::Leader {
            seat,
            lifted: lift_strategy(leader, seat, n)?,
        })
    };
    let mut agents = Vec::with_capacity(n);
    match scenario {
        Scenario::A => {
            for seat in 0..n - 1 {
                agents.push(leader_at(seat)?);
            }
            agents.push(Agent::Learner {
                seat: n - 1,
                q: QTable::new(n, 2),
            });
        }
        Scenario::B => {
            agents.push(leader_at(0)?);
            for seat in 1..n {
                agents.push(Agent::Learner {
                    seat,
                    q: QTable::new(n, 2),
                });
            }
        }
        Scenario::C => {
            if n - 1 > MAX_ALLIANCE {
                return Err(Error::Capacity {
                    n: n - 1,
                    max: MAX_ALLIANCE,
                });
            }
            agents.push(leader_at(0)?);
            agents.push(Agent::Alliance {
                seats: (1..n).collect(),
                q: QTable::new(n, 1 << (n - 1)),
            });
        }
    }

    let mut rng = seed::rng(cfg.seed);
    let mut trajectory = Trajectory::with_capacity(n, horizon as usize);
    let mut totals = vec![0.0; n];
    let mut choices = vec![0usize; agents.len()];
    let mut prev = Outcome::all_cooperate(n)?;
    let mut epsilon = cfg.epsilon.initial;

    for t in 1..=horizon {
        let mut bits = 0u32;
        for (agent, choice) in agents.iter().zip(choices.iter_mut()) {
            match agent {
                Agent::Leader { seat, lifted } => {
                    if rng.gen::<f64>() < lifted[prev.index()] {
                        bits |= 1 << seat;
                    }
                }
                Agent::Learner { seat, q } => {
                    *choice = select_action(q, prev, epsilon, &mut rng);
                    bits |= (*choice as u32) << seat;
                }
                Agent::Alliance { seats, q } => {
                    *choice = select_action(q, prev, epsilon, &mut rng);
                    for (member, seat) in seats.iter().enumerate() {
                        bits |= ((*choice >> member & 1) as u32) << seat;
                    }
                }
            }
        }
        let next = Outcome::new(bits, n)?;
        let payoffs = game.outcome_payoffs(next)?;

        for (agent, &choice) in agents.iter_mut().zip(&choices) {
            match agent {
                Agent::Leader { .. } => {}
                Agent::Learner { seat, q } => {
                    learner_update(q, prev, choice, next, payoffs[*seat], t, cfg);
                }
                Agent::Alliance { seats, q } => {
                    let reward =
                        seats.iter().map(|&s| payoffs[s]).sum::<f64>() / seats.len() as f64;
                    learner_update(q, prev, choice, next, reward, t, cfg);
                }
            }
        }

        trajectory.outcomes.push(bits);
        for (total, &x) in totals.iter_mut().zip(&payoffs) {
            *total += x;
        }
        trajectory.payoffs.extend_from_slice(&payoffs);
        trajectory
            .running
            .extend(totals.iter().map(|s| s / t as f64));
        prev = next;
        epsilon = cfg.epsilon.next(epsilon);
    }
    Ok(trajectory)
}
