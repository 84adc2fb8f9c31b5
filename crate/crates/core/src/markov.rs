//! The joint Markov chain over stage outcomes induced by a profile of
//! memory-one strategies.
//!
//! States are [`Outcome`] indices (`0..2^n`). Rows of a [`TransitionMatrix`]
//! are conditional distributions of the next outcome given the current one.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::game::{Action, MemoryOneStrategy, Outcome, PublicGoodsGame, StrategyProfile};
use crate::seed;
use rand::Rng as _;

/// Largest player count for which a dense `2^n x 2^n` matrix is built.
pub const MAX_DENSE_PLAYERS: usize = 12;

/// Largest player count accepted by [`simulate_empirical`].
pub const MAX_SIMULATED_PLAYERS: usize = 20;

/// Horizon used for Cesaro averages when the caller does not pick one.
pub const DEFAULT_CESARO_HORIZON: u64 = 200_000;

/// Default tolerance for [`stationary_exact`].
pub const STATIONARY_TOLERANCE: f64 = 1e-12;

const MASS_TOLERANCE: f64 = 1e-10;

/// Probability that player `i` cooperates after each outcome, i.e. the `2n`
/// strategy spread over all `2^n` outcomes.
pub fn lift_strategy(p: &MemoryOneStrategy, i: usize, n: usize) -> Result<Vec<f64>> {
    if p.players() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: p.players(),
        });
    }
    if i >= n {
        return Err(Error::OutOfRange {
            what: "player index",
            value: i,
            limit: n,
        });
    }
    if n > MAX_SIMULATED_PLAYERS {
        return Err(Error::Capacity {
            n,
            max: MAX_SIMULATED_PLAYERS,
        });
    }
    let mask = 1u32 << i;
    Ok((0..1u32 << n)
        .map(|bits| {
            let own = Action::from_bit(bits & mask != 0);
            let k = (bits & !mask).count_ones() as usize;
            p.prob(own, k)
        })
        .collect())
}

/// Dense row-stochastic matrix over the `2^n` outcomes, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    states: usize,
    entries: Vec<f64>,
}

impl TransitionMatrix {
    /// Joint chain of `profile`: the entry for `(o, o')` is the product over
    /// players of their probability of taking the action they take in `o'`.
    pub fn build(profile: &StrategyProfile) -> Result<Self> {
        Self::build_clamped(profile, 0.0)
    }

    /// Same as [`build`](Self::build) with every conditional cooperation
    /// probability clamped into `[delta, 1 - delta]`, which makes the chain
    /// irreducible for any `delta > 0`.
    pub fn build_perturbed(profile: &StrategyProfile, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::InvalidArgument(alloc::format!(
                "perturbation {delta} must lie in (0, 0.5)"
            )));
        }
        Self::build_clamped(profile, delta)
    }

    fn build_clamped(profile: &StrategyProfile, delta: f64) -> Result<Self> {
        let n = profile.players();
        if n > MAX_DENSE_PLAYERS {
            return Err(Error::Capacity {
                n,
                max: MAX_DENSE_PLAYERS,
            });
        }
        let states = 1usize << n;
        let lifted = profile
            .strategies()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                lift_strategy(p, i, n).map(|v| {
                    v.into_iter()
                        .map(|q| q.clamp(delta, 1.0 - delta))
                        .collect::<Vec<_>>()
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let mut entries = Vec::with_capacity(states * states);
        let mut row = Vec::with_capacity(states);
        let mut next = Vec::with_capacity(states);
        for o in 0..states {
            // Tensor product of the per-player [defect, cooperate] laws, built
            // from the highest seat down so that seat 0 ends up in bit 0.
            row.clear();
            row.push(1.0);
            for player in lifted.iter().rev() {
                let q = player[o];
                next.clear();
                for &w in &row {
                    next.push(w * (1.0 - q));
                    next.push(w * q);
                }
                core::mem::swap(&mut row, &mut next);
            }
            entries.extend_from_slice(&row);
        }
        Ok(Self { n, states, entries })
    }

    /// Wraps explicit row-major entries, checking row-stochasticity.
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 || n > MAX_DENSE_PLAYERS {
            return Err(Error::Capacity {
                n,
                max: MAX_DENSE_PLAYERS,
            });
        }
        let states = 1usize << n;
        if entries.len() != states * states {
            return Err(Error::DimensionMismatch {
                expected: states * states,
                found: entries.len(),
            });
        }
        let m = Self { n, states, entries };
        if m.entries.iter().any(|&x| !(0.0..=1.0).contains(&x)) || m.max_row_error() > 1e-12 {
            return Err(Error::InvalidArgument(
                "transition matrix must be row-stochastic".into(),
            ));
        }
        Ok(m)
    }

    pub fn players(&self) -> usize {
        self.n
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.entries[from * self.states..(from + 1) * self.states]
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries[from * self.states + to]
    }

    /// Largest `|sum(row) - 1|`.
    pub fn max_row_error(&self) -> f64 {
        self.entries
            .chunks_exact(self.states)
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `v^T P`.
    pub fn step(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.states];
        for (from, &w) in v.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (acc, &p) in out.iter_mut().zip(self.row(from)) {
                *acc += w * p;
            }
        }
        out
    }

    /// `max |(v^T P - v^T)_o|`.
    pub fn stationarity_residual(&self, v: &[f64]) -> f64 {
        self.step(v)
            .iter()
            .zip(v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Whether every outcome can reach every other along positive entries.
    pub fn is_irreducible(&self) -> bool {
        let forward = self.reachable(|from, to| self.get(from, to) > 0.0);
        let backward = self.reachable(|from, to| self.get(to, from) > 0.0);
        forward && backward
    }

    fn reachable(&self, edge: impl Fn(usize, usize) -> bool) -> bool {
        let mut seen = vec![false; self.states];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(s) = stack.pop() {
            for (t, visited) in seen.iter_mut().enumerate() {
                if !*visited && edge(s, t) {
                    *visited = true;
                    stack.push(t);
                }
            }
        }
        seen.into_iter().all(|x| x)
    }
}

/// How a [`LimitDistribution`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum LimitKind {
    StationaryExact,
    Cesaro,
    Empirical,
}

/// Probability vector over the `2^n` outcomes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LimitDistribution {
    n: usize,
    v: Vec<f64>,
    kind: LimitKind,
    /// `||avg(T) - avg(T/2)||_1` for Cesaro averages.
    diagnostic: Option<f64>,
}

impl LimitDistribution {
    pub fn new(n: usize, v: Vec<f64>, kind: LimitKind) -> Result<Self> {
        if n == 0 || n > MAX_SIMULATED_PLAYERS {
            return Err(Error::Capacity {
                n,
                max: MAX_SIMULATED_PLAYERS,
            });
        }
        if v.len() != 1 << n {
            return Err(Error::DimensionMismatch {
                expected: 1 << n,
                found: v.len(),
            });
        }
        check_mass(&v)?;
        Ok(Self {
            n,
            v,
            kind,
            diagnostic: None,
        })
    }

    /// All mass on one outcome.
    pub fn point_mass(o: Outcome, kind: LimitKind) -> Result<Self> {
        let mut v = vec![0.0; 1 << o.players()];
        v[o.index()] = 1.0;
        Self::new(o.players(), v, kind)
    }

    pub fn players(&self) -> usize {
        self.n
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.v
    }

    pub fn prob(&self, o: Outcome) -> f64 {
        self.v[o.index()]
    }

    pub fn kind(&self) -> LimitKind {
        self.kind
    }

    pub fn diagnostic(&self) -> Option<f64> {
        self.diagnostic
    }

    pub fn l1_distance(&self, other: &LimitDistribution) -> f64 {
        l1(&self.v, &other.v)
    }

    /// Mass on `c^n`.
    pub fn full_cooperation(&self) -> f64 {
        self.v[self.v.len() - 1]
    }
}

fn check_mass(v: &[f64]) -> Result<()> {
    if v.iter().any(|x| x.is_nan() || *x < 0.0) {
        return Err(Error::InvalidArgument(
            "distribution has a negative or NaN entry".into(),
        ));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::InvalidArgument(alloc::format!(
            "distribution sums to {total}, not 1"
        )));
    }
    Ok(())
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Distribution of the first stage when every player opens independently
/// with their `first_move` probability.
pub fn initial_distribution(profile: &StrategyProfile) -> Vec<f64> {
    let mut v = vec![1.0];
    for p in profile.strategies().iter().rev() {
        let q = p.first_move();
        v = v.iter().flat_map(|&w| [w * (1.0 - q), w * q]).collect();
    }
    v
}

/// Unique stationary distribution of an irreducible chain.
///
/// Solves `(P^T - I) v = 0` with the last equation replaced by `sum(v) = 1`
/// and falls back to power iteration on the lazy chain `(P + I) / 2` when the
/// direct solve misses `tol`.
pub fn stationary_exact(p: &TransitionMatrix, tol: f64) -> Result<LimitDistribution> {
    if !p.is_irreducible() {
        return Err(Error::NotErgodic);
    }
    let s = p.states();
    let mut v = solve_stationary(p).unwrap_or_else(|| vec![1.0 / s as f64; s]);
    normalize(&mut v);
    let mut residual = p.stationarity_residual(&v);
    if residual.is_nan() || residual >= tol {
        for _ in 0..1_000_000 {
            let next = p.step(&v);
            for (x, y) in v.iter_mut().zip(next) {
                *x = 0.5 * (*x + y);
            }
            normalize(&mut v);
            residual = p.stationarity_residual(&v);
            if residual < tol {
                break;
            }
        }
    }
    if residual.is_nan() || residual >= tol {
        return Err(Error::NoConvergence { tol, residual });
    }
    LimitDistribution::new(p.players(), v, LimitKind::StationaryExact)
}

fn normalize(v: &mut [f64]) {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    }
}

/// Gaussian elimination with partial pivoting. `None` if singular.
fn solve_stationary(p: &TransitionMatrix) -> Option<Vec<f64>> {
    let s = p.states();
    // a[r][c] = P[c][r] - [r == c]; last row becomes the normalization.
    let mut a = vec![0.0; s * s];
    for r in 0..s {
        for c in 0..s {
            a[r * s + c] = p.get(c, r) - if r == c { 1.0 } else { 0.0 };
        }
    }
    for c in 0..s {
        a[(s - 1) * s + c] = 1.0;
    }
    let mut b = vec![0.0; s];
    b[s - 1] = 1.0;

    for col in 0..s {
        let pivot = (col..s).max_by(|&x, &y| {
            a[x * s + col]
                .abs()
                .partial_cmp(&a[y * s + col].abs())
                .unwrap_or(core::cmp::Ordering::Equal)
        })?;
        if a[pivot * s + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for c in 0..s {
                a.swap(pivot * s + c, col * s + c);
            }
            b.swap(pivot, col);
        }
        let d = a[col * s + col];
        for r in col + 1..s {
            let f = a[r * s + col] / d;
            if f == 0.0 {
                continue;
            }
            for c in col..s {
                a[r * s + c] -= f * a[col * s + c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; s];
    for r in (0..s).rev() {
        let tail: f64 = (r + 1..s).map(|c| a[r * s + c] * x[c]).sum();
        x[r] = (b[r] - tail) / a[r * s + r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Cesaro average `(1/T) sum_{t=1..T} initial^T P^t`.
///
/// The result carries the diagnostic `||avg(T) - avg(floor(T/2))||_1`
/// (absent for `T = 1`).
pub fn limit_cesaro(
    p: &TransitionMatrix,
    initial: &[f64],
    horizon: u64,
) -> Result<LimitDistribution> {
    if horizon == 0 {
        return Err(Error::InvalidArgument(
            "Cesaro horizon must be at least 1".into(),
        ));
    }
    if initial.len() != p.states() {
        return Err(Error::DimensionMismatch {
            expected: p.states(),
            found: initial.len(),
        });
    }
    check_mass(initial)?;

    let half = horizon / 2;
    let (full, half_avg) = if doubling_is_cheaper(p.states(), horizon) {
        let full = cesaro_by_doubling(p, initial, horizon);
        let half_avg = (half > 0).then(|| cesaro_by_doubling(p, initial, half));
        (full, half_avg)
    } else {
        cesaro_by_stepping(p, initial, horizon)
    };
    let mut v = full;
    normalize(&mut v);
    let mut dist = LimitDistribution::new(p.players(), v, LimitKind::Cesaro)?;
    dist.diagnostic = half_avg.map(|h| l1(&dist.v, &h));
    Ok(dist)
}

fn doubling_is_cheaper(states: usize, horizon: u64) -> bool {
    let log = 64 - horizon.leading_zeros() as u64;
    4 * log * states as u64 <= horizon
}

fn cesaro_by_stepping(
    p: &TransitionMatrix,
    initial: &[f64],
    horizon: u64,
) -> (Vec<f64>, Option<Vec<f64>>) {
    let half = horizon / 2;
    let mut v = initial.to_vec();
    let mut acc = vec![0.0; p.states()];
    let mut half_avg = None;
    for t in 1..=horizon {
        v = p.step(&v);
        for (a, x) in acc.iter_mut().zip(&v) {
            *a += x;
        }
        if t == half {
            half_avg = Some(acc.iter().map(|a| a / half as f64).collect());
        }
    }
    let avg = acc.iter().map(|a| a / horizon as f64).collect();
    (avg, half_avg)
}

fn cesaro_by_doubling(p: &TransitionMatrix, initial: &[f64], horizon: u64) -> Vec<f64> {
    let s = p.states();
    let (_, sum) = power_sum(p.entries(), s, horizon);
    let mut out = vec![0.0; s];
    for (from, &w) in initial.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (acc, &x) in out.iter_mut().zip(&sum[from * s..(from + 1) * s]) {
            *acc += w * x;
        }
    }
    out.iter().map(|x| x / horizon as f64).collect()
}

/// Returns `(P^t, sum_{k=1..t} P^k)` for `t >= 1`.
fn power_sum(p: &[f64], s: usize, t: u64) -> (Vec<f64>, Vec<f64>) {
    if t == 1 {
        return (p.to_vec(), p.to_vec());
    }
    if t.is_multiple_of(2) {
        let (pow, sum) = power_sum(p, s, t / 2);
        let shifted = matmul(&pow, &sum, s);
        let sum = sum.iter().zip(&shifted).map(|(a, b)| a + b).collect();
        (matmul(&pow, &pow, s), sum)
    } else {
        let (pow, mut sum) = power_sum(p, s, t - 1);
        let pow = matmul(&pow, p, s);
        sum.iter_mut().zip(&pow).for_each(|(a, b)| *a += b);
        (pow, sum)
    }
}

fn matmul(a: &[f64], b: &[f64], s: usize) -> Vec<f64> {
    let mut out = vec![0.0; s * s];
    for i in 0..s {
        for k in 0..s {
            let x = a[i * s + k];
            if x == 0.0 {
                continue;
            }
            let row = &b[k * s..(k + 1) * s];
            for (o, &y) in out[i * s..(i + 1) * s].iter_mut().zip(row) {
                *o += x * y;
            }
        }
    }
    out
}

/// How to turn a profile into a limit distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum LimitMethod {
    /// Stationary distribution; the chain must be irreducible.
    Exact,
    /// Cesaro average from the first-move distribution.
    Cesaro { horizon: u64 },
    /// Stationary distribution of the chain with probabilities clamped to
    /// `[delta, 1 - delta]`.
    Perturbed { delta: f64 },
    /// `Exact` when the chain is irreducible, `Cesaro` otherwise.
    Auto { horizon: u64 },
}

impl Default for LimitMethod {
    fn default() -> Self {
        LimitMethod::Cesaro {
            horizon: DEFAULT_CESARO_HORIZON,
        }
    }
}

/// Limit distribution of `profile` by `method`.
pub fn profile_limit(profile: &StrategyProfile, method: LimitMethod) -> Result<LimitDistribution> {
    match method {
        LimitMethod::Exact => {
            stationary_exact(&TransitionMatrix::build(profile)?, STATIONARY_TOLERANCE)
        }
        LimitMethod::Cesaro { horizon } => {
            let p = TransitionMatrix::build(profile)?;
            limit_cesaro(&p, &initial_distribution(profile), horizon)
        }
        LimitMethod::Perturbed { delta } => stationary_exact(
            &TransitionMatrix::build_perturbed(profile, delta)?,
            STATIONARY_TOLERANCE,
        ),
        LimitMethod::Auto { horizon } => {
            let p = TransitionMatrix::build(profile)?;
            if p.is_irreducible() {
                stationary_exact(&p, STATIONARY_TOLERANCE)
            } else {
                limit_cesaro(&p, &initial_distribution(profile), horizon)
            }
        }
    }
}

/// Empirical outcome frequencies over `horizon` simulated stages. The first
/// stage is drawn from each player's `first_move`.
pub fn simulate_empirical(
    profile: &StrategyProfile,
    horizon: u64,
    seed: u64,
) -> Result<LimitDistribution> {
    if horizon == 0 {
        return Err(Error::InvalidArgument(
            "simulation horizon must be at least 1".into(),
        ));
    }
    let n = profile.players();
    let lifted = profile
        .strategies()
        .iter()
        .enumerate()
        .map(|(i, p)| lift_strategy(p, i, n))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = seed::rng(seed);
    let mut counts = vec![0u64; 1 << n];
    let mut prev: Option<usize> = None;
    for _ in 0..horizon {
        let mut bits = 0usize;
        for (i, strategy) in profile.strategies().iter().enumerate() {
            let q = match prev {
                None => strategy.first_move(),
                Some(o) => lifted[i][o],
            };
            if rng.gen::<f64>() < q {
                bits |= 1 << i;
            }
        }
        counts[bits] += 1;
        prev = Some(bits);
    }
    let v = counts.iter().map(|&c| c as f64 / horizon as f64).collect();
    LimitDistribution::new(n, v, LimitKind::Empirical)
}

/// `pi_i = sum_o v_o * payoff_i(o)` for every player.
pub fn expected_payoffs(game: &PublicGoodsGame, v: &LimitDistribution) -> Result<Vec<f64>> {
    let n = game.players();
    if v.players() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: v.players(),
        });
    }
    let mut out = vec![0.0; n];
    for (bits, &w) in v.probabilities().iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let payoffs = game.outcome_payoffs(Outcome::new(bits as u32, n)?)?;
        for (acc, x) in out.iter_mut().zip(payoffs) {
            *acc += w * x;
        }
    }
    Ok(out)
}

/// Joint action of a focal player `i` and an opponent `j`, written `a_i a_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum PairAction {
    Cc,
    Cd,
    Dc,
    Dd,
}

impl PairAction {
    pub const ALL: [PairAction; 4] = [
        PairAction::Cc,
        PairAction::Cd,
        PairAction::Dc,
        PairAction::Dd,
    ];

    pub fn new(a_i: Action, a_j: Action) -> Self {
        match (a_i, a_j) {
            (Action::Cooperate, Action::Cooperate) => PairAction::Cc,
            (Action::Cooperate, Action::Defect) => PairAction::Cd,
            (Action::Defect, Action::Cooperate) => PairAction::Dc,
            (Action::Defect, Action::Defect) => PairAction::Dd,
        }
    }

    pub fn focal(self) -> Action {
        match self {
            PairAction::Cc | PairAction::Cd => Action::Cooperate,
            PairAction::Dc | PairAction::Dd => Action::Defect,
        }
    }

    pub fn opponent(self) -> Action {
        match self {
            PairAction::Cc | PairAction::Dc => Action::Cooperate,
            PairAction::Cd | PairAction::Dd => Action::Defect,
        }
    }

    fn ordinal(self) -> usize {
        self as usize
    }
}

/// Limit distribution marginalized onto `(a_i a_j, k)` where `k` counts the
/// cooperators among the other `n - 2` players.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MarginalDistribution {
    n: usize,
    i: usize,
    j: usize,
    u: Vec<f64>,
}

impl MarginalDistribution {
    /// Position of `(pair, k)` in the flat `4 (n - 1)` layout.
    pub fn slot(n: usize, pair: PairAction, k: usize) -> usize {
        pair.ordinal() * (n - 1) + k
    }

    /// Builds a marginal from explicit entries in [`slot`](Self::slot) order.
    pub fn from_entries(n: usize, i: usize, j: usize, u: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewPlayers(n));
        }
        if i == j || i >= n || j >= n {
            return Err(Error::InvalidArgument(alloc::format!(
                "marginal needs two distinct seats below {n}, got {i} and {j}"
            )));
        }
        if u.len() != 4 * (n - 1) {
            return Err(Error::DimensionMismatch {
                expected: 4 * (n - 1),
                found: u.len(),
            });
        }
        check_mass(&u)?;
        Ok(Self { n, i, j, u })
    }

    /// Point mass on `(pair, k)`.
    pub fn point_mass(n: usize, i: usize, j: usize, pair: PairAction, k: usize) -> Result<Self> {
        if k + 1 >= n {
            return Err(Error::OutOfRange {
                what: "other cooperators",
                value: k,
                limit: n - 1,
            });
        }
        let mut u = vec![0.0; 4 * (n - 1)];
        u[Self::slot(n, pair, k)] = 1.0;
        Self::from_entries(n, i, j, u)
    }

    pub fn players(&self) -> usize {
        self.n
    }

    pub fn focal(&self) -> usize {
        self.i
    }

    pub fn opponent(&self) -> usize {
        self.j
    }

    pub fn entries(&self) -> &[f64] {
        &self.u
    }

    /// `u_{pair,k}`; zero when `k` is outside `0..=n-2`.
    pub fn get(&self, pair: PairAction, k: isize) -> f64 {
        if k < 0 || k as usize >= self.n - 1 {
            0.0
        } else {
            self.u[Self::slot(self.n, pair, k as usize)]
        }
    }

    pub fn total(&self) -> f64 {
        self.u.iter().sum()
    }
}

/// Collapses `v` onto the pair `(i, j)`.
pub fn marginalize(v: &LimitDistribution, i: usize, j: usize) -> Result<MarginalDistribution> {
    let n = v.players();
    if i == j {
        return Err(Error::InvalidArgument(alloc::format!(
            "marginal needs two distinct seats, got {i} twice"
        )));
    }
    if n < 2 {
        return Err(Error::TooFewPlayers(n));
    }
    for seat in [i, j] {
        if seat >= n {
            return Err(Error::OutOfRange {
                what: "player index",
                value: seat,
                limit: n,
            });
        }
    }
    let pair_mask = (1u32 << i) | (1u32 << j);
    let mut u = vec![0.0; 4 * (n - 1)];
    for (bits, &w) in v.probabilities().iter().enumerate() {
        let bits = bits as u32;
        let pair = PairAction::new(
            Action::from_bit(bits >> i & 1 == 1),
            Action::from_bit(bits >> j & 1 == 1),
        );
        let k = (bits & !pair_mask).count_ones() as usize;
        u[MarginalDistribution::slot(n, pair, k)] += w;
    }
    Ok(MarginalDistribution { n, i, j, u })
}

/// `(p - p^R) . v` for the strategy `p` sitting at seat `i`. Vanishes for
/// every limit distribution of a profile that contains `p` at that seat.
pub fn akin_residual(p: &MemoryOneStrategy, i: usize, v: &LimitDistribution) -> Result<f64> {
    let n = v.players();
    let lifted = lift_strategy(p, i, n)?;
    Ok(lifted
        .iter()
        .zip(v.probabilities())
        .enumerate()
        .map(|(bits, (&q, &w))| {
            let repeat = (bits >> i & 1) as f64;
            (q - repeat) * w
        })
        .sum())
}

/// `pi_j - R_{c,n-1}` from the marginal, with terms grouped by `j`'s own
/// stage payoff: `(R_{c,k} - R)(u_{cc,k-1} + u_{dc,k}) + (R_{d,k} - R)(u_{cd,k-1} + u_{dd,k})`.
pub fn payoff_gap(game: &PublicGoodsGame, u: &MarginalDistribution) -> Result<f64> {
    let n = game.players();
    if u.players() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: u.players(),
        });
    }
    let mutual = game.mutual_cooperation_payoff();
    let gap = (0..n as isize)
        .map(|k| {
            let rc = game.payoff_unchecked(Action::Cooperate, k as usize) - mutual;
            let rd = game.payoff_unchecked(Action::Defect, k as usize) - mutual;
            rc * (u.get(PairAction::Cc, k - 1) + u.get(PairAction::Dc, k))
                + rd * (u.get(PairAction::Cd, k - 1) + u.get(PairAction::Dd, k))
        })
        .sum();
    Ok(gap)
}

/// Both sides of the Akin identity written over the marginal of `(i, j)`:
/// `(1 - p_{c,n-2}) u_{cd,n-2}` on the left, and on the right
/// `sum_k (p_{c,k} - 1)(u_{cc,k-1} + u_{cd,k}) + p_{d,k}(u_{dc,k-1} + u_{dd,k})`
/// with the `u_{cd,n-2}` term moved across.
pub fn akin_marginal_sides(p: &MemoryOneStrategy, u: &MarginalDistribution) -> Result<(f64, f64)> {
    let n = u.players();
    if p.players() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: p.players(),
        });
    }
    let top = n as isize - 2;
    let lhs = (1.0 - p.p_c()[n - 2]) * u.get(PairAction::Cd, top);
    let rhs = (0..n as isize)
        .map(|k| {
            let pc = p.p_c()[k as usize];
            let pd = p.p_d()[k as usize];
            let cd = if k == top {
                0.0
            } else {
                u.get(PairAction::Cd, k)
            };
            (pc - 1.0) * (u.get(PairAction::Cc, k - 1) + cd)
                + pd * (u.get(PairAction::Dc, k - 1) + u.get(PairAction::Dd, k))
        })
        .sum();
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{classic_strategy, ClassicStrategy};

    fn profile_of(names: &[&str]) -> StrategyProfile {
        let n = names.len();
        StrategyProfile::new(
            names
                .iter()
                .map(|s| classic_strategy(s, n).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn delta(o: &str) -> LimitDistribution {
        LimitDistribution::point_mass(o.parse().unwrap(), LimitKind::Empirical).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    #[test]
    fn lift_examples() {
        let alld = classic_strategy("alld", 2).unwrap();
        assert_eq!(lift_strategy(&alld, 0, 2).unwrap(), vec![0.0; 4]);

        let wsls = classic_strategy("wsls", 3).unwrap();
        let lifted = lift_strategy(&wsls, 0, 3).unwrap();
        let ccc: Outcome = "ccc".parse().unwrap();
        let cdd: Outcome = "cdd".parse().unwrap();
        assert_eq!(lifted[ccc.index()], 1.0);
        assert_eq!(lifted[cdd.index()], 0.0);

        let repeat = classic_strategy("repeat", 3).unwrap();
        for i in 0..3 {
            let lifted = lift_strategy(&repeat, i, 3).unwrap();
            for (bits, q) in lifted.iter().enumerate() {
                assert_eq!(*q, (bits >> i & 1) as f64);
            }
        }
        assert!(lift_strategy(&repeat, 3, 3).is_err());
        assert!(lift_strategy(&repeat, 0, 4).is_err());
    }

    #[test]
    fn transition_examples() {
        let p = TransitionMatrix::build(&profile_of(&["alld", "alld"])).unwrap();
        for o in 0..4 {
            assert_eq!(p.row(o), &[1.0, 0.0, 0.0, 0.0]);
        }

        let p = TransitionMatrix::build(&profile_of(&["repeat", "repeat"])).unwrap();
        for o in 0..4 {
            for t in 0..4 {
                assert_eq!(p.get(o, t), if o == t { 1.0 } else { 0.0 });
            }
        }

        let p = TransitionMatrix::build(&profile_of(&["wsls", "wsls", "wsls"])).unwrap();
        assert_eq!(p.get(7, 7), 1.0);
        assert!(p.max_row_error() < 1e-12);
        assert!(!p.is_irreducible());
    }

    #[test]
    fn transition_capacity() {
        let s = ClassicStrategy::AllC.build(MAX_DENSE_PLAYERS + 1).unwrap();
        let profile = StrategyProfile::uniform(s).unwrap();
        assert!(matches!(
            TransitionMatrix::build(&profile),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn stationary_uniform_for_coin_flippers() {
        let half = MemoryOneStrategy::new(vec![0.5; 3], vec![0.5; 3], 0.5).unwrap();
        let p = TransitionMatrix::build(&StrategyProfile::uniform(half).unwrap()).unwrap();
        let v = stationary_exact(&p, STATIONARY_TOLERANCE).unwrap();
        assert!(v.probabilities().iter().all(|&x| close(x, 0.125, 1e-12)));
        assert_eq!(v.kind(), LimitKind::StationaryExact);
    }

    #[test]
    fn stationary_rejects_reducible_chains() {
        let p = TransitionMatrix::build(&profile_of(&["wsls", "wsls", "wsls"])).unwrap();
        assert_eq!(stationary_exact(&p, 1e-12), Err(Error::NotErgodic));
    }

    #[test]
    fn perturbed_alld_concentrates_on_mutual_defection() {
        let p = TransitionMatrix::build_perturbed(&profile_of(&["alld", "alld"]), 1e-6).unwrap();
        let v = stationary_exact(&p, STATIONARY_TOLERANCE).unwrap();
        assert!(v.probabilities()[0] >= 1.0 - 1e-4);
    }

    #[test]
    fn periodic_chain_has_a_stationary_distribution() {
        let p = TransitionMatrix::from_entries(1, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(p.is_irreducible());
        let v = stationary_exact(&p, 1e-12).unwrap();
        assert_eq!(v.probabilities(), &[0.5, 0.5]);
        assert!(TransitionMatrix::from_entries(1, vec![0.5, 0.4, 1.0, 0.0]).is_err());
    }

    #[test]
    fn cesaro_examples() {
        let p = TransitionMatrix::build(&profile_of(&["repeat", "repeat", "repeat"])).unwrap();
        let mut init = vec![0.0; 8];
        init[5] = 1.0;
        for t in [1, 7, 1000] {
            let v = limit_cesaro(&p, &init, t).unwrap();
            assert_eq!(v.probabilities(), init.as_slice());
        }

        let p = TransitionMatrix::build(&profile_of(&["wsls", "wsls", "wsls"])).unwrap();
        let ccc = delta("ccc");
        let v = limit_cesaro(&p, ccc.probabilities(), 5000).unwrap();
        assert!(close(v.full_cooperation(), 1.0, 1e-12));

        let p = TransitionMatrix::build(&profile_of(&["gt", "gt", "gt"])).unwrap();
        let v = limit_cesaro(&p, delta("dcc").probabilities(), 100_000).unwrap();
        assert!(v.probabilities()[0] > 1.0 - 1e-4);
        assert_eq!(v.kind(), LimitKind::Cesaro);
        assert!(v.diagnostic().unwrap() < 1e-4);
    }

    #[test]
    fn cesaro_routes_agree() {
        let s = MemoryOneStrategy::from_flat(&[0.9, 0.2, 0.7, 0.1, 0.6, 0.3], 0.5).unwrap();
        let t = MemoryOneStrategy::from_flat(&[1.0, 0.0, 1.0, 0.0, 0.0, 1.0], 1.0).unwrap();
        let profile = StrategyProfile::new(vec![s.clone(), t, s]).unwrap();
        let p = TransitionMatrix::build(&profile).unwrap();
        let init = initial_distribution(&profile);
        for horizon in [1, 2, 3, 17, 64, 1001] {
            let a = cesaro_by_doubling(&p, &init, horizon);
            let (b, _) = cesaro_by_stepping(&p, &init, horizon);
            assert!(l1(&a, &b) < 1e-12, "T = {horizon}");
        }
    }

    #[test]
    fn cesaro_validates_input() {
        let p = TransitionMatrix::build(&profile_of(&["alld", "alld"])).unwrap();
        assert!(limit_cesaro(&p, &[1.0, 0.0, 0.0, 0.0], 0).is_err());
        assert!(limit_cesaro(&p, &[0.5, 0.0, 0.0, 0.0], 10).is_err());
        assert!(limit_cesaro(&p, &[1.0, 0.0], 10).is_err());
    }

    #[test]
    fn simulation_examples() {
        let v = simulate_empirical(&profile_of(&["allc", "allc", "allc"]), 1000, 1).unwrap();
        assert_eq!(v.full_cooperation(), 1.0);
        let v = simulate_empirical(&profile_of(&["alld", "alld", "alld"]), 1000, 1).unwrap();
        assert_eq!(v.probabilities()[0], 1.0);
        let a = simulate_empirical(&profile_of(&["wsls", "allc", "repeat"]), 500, 9).unwrap();
        let b = simulate_empirical(&profile_of(&["wsls", "allc", "repeat"]), 500, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn initial_distribution_is_product_of_first_moves() {
        let a = MemoryOneStrategy::new(vec![0.0; 2], vec![0.0; 2], 0.25).unwrap();
        let b = MemoryOneStrategy::new(vec![0.0; 2], vec![0.0; 2], 0.5).unwrap();
        let v = initial_distribution(&StrategyProfile::new(vec![a, b]).unwrap());
        // bits: 0 = dd, 1 = player 0 cooperates, 2 = player 1 cooperates.
        let want = [0.75 * 0.5, 0.25 * 0.5, 0.75 * 0.5, 0.25 * 0.5];
        for (x, y) in v.iter().zip(want) {
            assert!(close(*x, y, 1e-15));
        }
    }

    #[test]
    fn expected_payoff_examples() {
        let g = PublicGoodsGame::new(3, 2.0).unwrap();
        let pi = expected_payoffs(&g, &delta("ccc")).unwrap();
        assert!(pi.iter().all(|&x| close(x, 1.0, 1e-12)));
        assert_eq!(expected_payoffs(&g, &delta("ddd")).unwrap(), vec![0.0; 3]);
        let pi = expected_payoffs(&g, &delta("dcc")).unwrap();
        for (x, y) in pi.iter().zip([4.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]) {
            assert!(close(*x, y, 1e-12));
        }
        assert!(expected_payoffs(&g, &delta("cc")).is_err());
    }

    #[test]
    fn marginal_examples() {
        let u = marginalize(&delta("cccc"), 0, 1).unwrap();
        assert_eq!(u.get(PairAction::Cc, 2), 1.0);
        assert_eq!(u.total(), 1.0);
        let u = marginalize(&delta("dddd"), 2, 3).unwrap();
        assert_eq!(u.get(PairAction::Dd, 0), 1.0);
        let u = marginalize(&delta("dcc"), 0, 1).unwrap();
        assert_eq!(u.get(PairAction::Dc, 1), 1.0);
        assert!(marginalize(&delta("dcc"), 1, 1).is_err());
        assert!(marginalize(&delta("dcc"), 0, 3).is_err());
    }

    #[test]
    fn akin_residual_examples() {
        let repeat = classic_strategy("repeat", 3).unwrap();
        for o in ["ccc", "dcd", "ddd"] {
            assert_eq!(akin_residual(&repeat, 1, &delta(o)).unwrap(), 0.0);
        }
        let alld = classic_strategy("alld", 3).unwrap();
        assert_eq!(akin_residual(&alld, 0, &delta("ddd")).unwrap(), 0.0);
    }

    #[test]
    fn payoff_gap_examples() {
        let g = PublicGoodsGame::new(3, 2.0).unwrap();
        let at = |pair, k| MarginalDistribution::point_mass(3, 0, 1, pair, k).unwrap();
        assert_eq!(payoff_gap(&g, &at(PairAction::Cc, 1)).unwrap(), 0.0);
        assert!(close(
            payoff_gap(&g, &at(PairAction::Dc, 1)).unwrap(),
            -2.0 / 3.0,
            1e-12
        ));
        assert!(close(
            payoff_gap(&g, &at(PairAction::Dd, 0)).unwrap(),
            -1.0,
            1e-12
        ));
        let g4 = PublicGoodsGame::new(4, 2.5).unwrap();
        assert!(payoff_gap(&g4, &at(PairAction::Dd, 0)).is_err());
    }
}
