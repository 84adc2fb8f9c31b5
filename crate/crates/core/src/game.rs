//! The stage game: actions, outcomes, payoffs and memory-one strategies.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

/// Largest player count an [`Outcome`] can encode.
pub const MAX_OUTCOME_PLAYERS: usize = 31;

/// A single player's move in one stage. `Defect < Cooperate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Action {
    Defect,
    Cooperate,
}

impl Action {
    pub fn is_cooperate(self) -> bool {
        self == Action::Cooperate
    }

    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Action::Cooperate
        } else {
            Action::Defect
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Action::Cooperate => 'c',
            Action::Defect => 'd',
        }
    }
}

/// Joint action profile of one stage.
///
/// Player `i` occupies bit `i` (player 0 is the least significant bit) and a
/// set bit means that player cooperated. The textual form lists players in
/// seat order, so `"dcc"` is player 0 defecting against two cooperators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Outcome {
    bits: u32,
    n: usize,
}

impl Outcome {
    pub fn new(bits: u32, n: usize) -> Result<Self> {
        if n == 0 || n > MAX_OUTCOME_PLAYERS {
            return Err(Error::OutOfRange {
                what: "player count",
                value: n,
                limit: MAX_OUTCOME_PLAYERS + 1,
            });
        }
        let states = 1usize << n;
        if bits as usize >= states {
            return Err(Error::OutOfRange {
                what: "outcome bits",
                value: bits as usize,
                limit: states,
            });
        }
        Ok(Self { bits, n })
    }

    pub fn from_actions(actions: &[Action]) -> Result<Self> {
        let bits = actions
            .iter()
            .enumerate()
            .fold(0u32, |acc, (i, a)| acc | ((a.is_cooperate() as u32) << i));
        Self::new(bits, actions.len())
    }

    /// `c^n`.
    pub fn all_cooperate(n: usize) -> Result<Self> {
        Self::new(((1u64 << n) - 1) as u32, n)
    }

    /// `d^n`.
    pub fn all_defect(n: usize) -> Result<Self> {
        Self::new(0, n)
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    pub fn index(self) -> usize {
        self.bits as usize
    }

    pub fn players(self) -> usize {
        self.n
    }

    pub fn action(self, i: usize) -> Result<Action> {
        self.check_player(i)?;
        Ok(Action::from_bit(self.bits >> i & 1 == 1))
    }

    pub fn cooperators(self) -> usize {
        self.bits.count_ones() as usize
    }

    /// Number of players other than `i` who cooperated.
    pub fn opponent_cooperators(self, i: usize) -> Result<usize> {
        self.check_player(i)?;
        Ok((self.bits & !(1u32 << i)).count_ones() as usize)
    }

    pub fn actions(self) -> impl Iterator<Item = Action> {
        (0..self.n).map(move |i| Action::from_bit(self.bits >> i & 1 == 1))
    }

    fn check_player(self, i: usize) -> Result<()> {
        if i >= self.n {
            return Err(Error::OutOfRange {
                what: "player index",
                value: i,
                limit: self.n,
            });
        }
        Ok(())
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in self.actions() {
            write!(f, "{}", a.symbol())?;
        }
        Ok(())
    }
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let actions = s
            .chars()
            .map(|ch| match ch {
                'c' | 'C' => Ok(Action::Cooperate),
                'd' | 'D' => Ok(Action::Defect),
                other => Err(Error::InvalidArgument(format!(
                    "outcome symbol `{other}` is neither `c` nor `d`"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_actions(&actions)
    }
}

/// The linear public goods game with unit endowment.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PublicGoodsGame {
    n: usize,
    r: f64,
}

impl PublicGoodsGame {
    /// Contribution of a cooperator. Fixed at one.
    pub const ENDOWMENT: f64 = 1.0;

    /// Requires `n >= 2` and `1 < r < n`.
    pub fn new(n: usize, r: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewPlayers(n));
        }
        if n > MAX_OUTCOME_PLAYERS {
            return Err(Error::OutOfRange {
                what: "player count",
                value: n,
                limit: MAX_OUTCOME_PLAYERS + 1,
            });
        }
        if !(r > 1.0 && r < n as f64) {
            return Err(Error::NotADilemma { n, r });
        }
        Ok(Self { n, r })
    }

    pub fn players(&self) -> usize {
        self.n
    }

    pub fn factor(&self) -> f64 {
        self.r
    }

    /// Marginal per-capita rate of return `r / n`.
    pub fn mpcr(&self) -> f64 {
        self.r / self.n as f64
    }

    /// `R_{a,k}`: payoff for playing `action` against `k` cooperating opponents.
    pub fn stage_payoff(&self, action: Action, k: usize) -> Result<f64> {
        if k >= self.n {
            return Err(Error::OutOfRange {
                what: "cooperating opponents",
                value: k,
                limit: self.n,
            });
        }
        Ok(self.payoff_unchecked(action, k))
    }

    pub(crate) fn payoff_unchecked(&self, action: Action, k: usize) -> f64 {
        let n = self.n as f64;
        match action {
            Action::Cooperate => self.r * (k as f64 + 1.0) / n - Self::ENDOWMENT,
            Action::Defect => self.r * k as f64 / n,
        }
    }

    /// `R_{c,n-1}`, the payoff of full cooperation.
    pub fn mutual_cooperation_payoff(&self) -> f64 {
        self.payoff_unchecked(Action::Cooperate, self.n - 1)
    }

    /// Smallest and largest stage payoffs, `R_{c,0}` and `R_{d,n-1}`.
    pub fn payoff_range(&self) -> (f64, f64) {
        (
            self.payoff_unchecked(Action::Cooperate, 0),
            self.payoff_unchecked(Action::Defect, self.n - 1),
        )
    }

    /// Stage payoff of every player for outcome `o`.
    pub fn outcome_payoffs(&self, o: Outcome) -> Result<Vec<f64>> {
        if o.players() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: o.players(),
            });
        }
        let total = o.cooperators();
        Ok(o.actions()
            .map(|a| {
                let k = total - a.is_cooperate() as usize;
                self.payoff_unchecked(a, k)
            })
            .collect())
    }

    /// Is `r / n > 1/2`? Cooperation-enforcing strategies can only exist then.
    pub fn admits_enforcement(&self) -> bool {
        2.0 * self.r > self.n as f64
    }
}

/// Memory-one strategy in the symmetric `(own action, cooperating opponents)`
/// form: `p_c[k]` and `p_d[k]` are the cooperation probabilities after the
/// player cooperated (resp. defected) while `k` opponents cooperated.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MemoryOneStrategy {
    p_c: Vec<f64>,
    p_d: Vec<f64>,
    first_move: f64,
}

fn check_probability(what: impl FnOnce() -> String, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidProbability {
            what: what(),
            value,
        })
    }
}

impl MemoryOneStrategy {
    pub fn new(p_c: Vec<f64>, p_d: Vec<f64>, first_move: f64) -> Result<Self> {
        if p_c.len() != p_d.len() {
            return Err(Error::DimensionMismatch {
                expected: p_c.len(),
                found: p_d.len(),
            });
        }
        if p_c.len() < 2 {
            return Err(Error::TooFewPlayers(p_c.len()));
        }
        for (k, &p) in p_c.iter().enumerate() {
            check_probability(|| format!("p_c[{k}]"), p)?;
        }
        for (k, &p) in p_d.iter().enumerate() {
            check_probability(|| format!("p_d[{k}]"), p)?;
        }
        check_probability(|| String::from("first_move"), first_move)?;
        Ok(Self {
            p_c,
            p_d,
            first_move,
        })
    }

    /// Builds a strategy from the flat `(p_c,0..p_c,n-1, p_d,0..p_d,n-1)` layout.
    pub fn from_flat(components: &[f64], first_move: f64) -> Result<Self> {
        if !components.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "a memory-one strategy needs an even number of components, got {}",
                components.len()
            )));
        }
        let (p_c, p_d) = components.split_at(components.len() / 2);
        Self::new(p_c.to_vec(), p_d.to_vec(), first_move)
    }

    pub fn players(&self) -> usize {
        self.p_c.len()
    }

    pub fn p_c(&self) -> &[f64] {
        &self.p_c
    }

    pub fn p_d(&self) -> &[f64] {
        &self.p_d
    }

    pub fn first_move(&self) -> f64 {
        self.first_move
    }

    pub fn with_first_move(mut self, first_move: f64) -> Result<Self> {
        check_probability(|| String::from("first_move"), first_move)?;
        self.first_move = first_move;
        Ok(self)
    }

    /// Cooperation probability after `(own, k)`. Panics if `k >= n`.
    pub fn prob(&self, own: Action, k: usize) -> f64 {
        match own {
            Action::Cooperate => self.p_c[k],
            Action::Defect => self.p_d[k],
        }
    }

    /// The `2n` components in flat order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = self.p_c.clone();
        out.extend_from_slice(&self.p_d);
        out
    }

    /// True when every conditional probability lies strictly inside (0, 1).
    pub fn is_fully_mixed(&self) -> bool {
        self.p_c
            .iter()
            .chain(&self.p_d)
            .all(|&p| p > 0.0 && p < 1.0)
    }
}

/// Named strategies expressible in the `2n` form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ClassicStrategy {
    AllC,
    AllD,
    Repeat,
    GrimTrigger,
    Wsls,
}

impl ClassicStrategy {
    pub const ALL: [ClassicStrategy; 5] = [
        ClassicStrategy::AllC,
        ClassicStrategy::AllD,
        ClassicStrategy::Repeat,
        ClassicStrategy::GrimTrigger,
        ClassicStrategy::Wsls,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassicStrategy::AllC => "allc",
            ClassicStrategy::AllD => "alld",
            ClassicStrategy::Repeat => "repeat",
            ClassicStrategy::GrimTrigger => "gt",
            ClassicStrategy::Wsls => "wsls",
        }
    }

    /// The strategy for an `n`-player game.
    ///
    /// Grim Trigger keeps cooperating only after full cooperation; WSLS also
    /// returns to cooperation after a lone defection against `n - 1`
    /// cooperators. Both open with cooperation, as does Repeat; ALLD opens
    /// with defection.
    pub fn build(self, n: usize) -> Result<MemoryOneStrategy> {
        if n < 2 {
            return Err(Error::TooFewPlayers(n));
        }
        let zeros = vec![0.0; n];
        let ones = vec![1.0; n];
        let top = |mut v: Vec<f64>| {
            v[n - 1] = 1.0;
            v
        };
        let (p_c, p_d, first) = match self {
            ClassicStrategy::AllC => (ones.clone(), ones, 1.0),
            ClassicStrategy::AllD => (zeros.clone(), zeros, 0.0),
            ClassicStrategy::Repeat => (ones, zeros, 1.0),
            ClassicStrategy::GrimTrigger => (top(zeros.clone()), zeros, 1.0),
            ClassicStrategy::Wsls => (top(zeros.clone()), top(zeros), 1.0),
        };
        MemoryOneStrategy::new(p_c, p_d, first)
    }
}

impl fmt::Display for ClassicStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassicStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        match key.as_str() {
            "allc" => Ok(ClassicStrategy::AllC),
            "alld" => Ok(ClassicStrategy::AllD),
            "repeat" => Ok(ClassicStrategy::Repeat),
            "gt" | "grimtrigger" | "grim" => Ok(ClassicStrategy::GrimTrigger),
            "wsls" | "winstayloseshift" => Ok(ClassicStrategy::Wsls),
            _ => Err(Error::UnknownStrategy(String::from(s))),
        }
    }
}

/// Looks a classic strategy up by name and builds it for `n` players.
pub fn classic_strategy(name: &str, n: usize) -> Result<MemoryOneStrategy> {
    name.parse::<ClassicStrategy>()?.build(n)
}

/// One memory-one strategy per seat.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StrategyProfile {
    strategies: Vec<MemoryOneStrategy>,
}

impl StrategyProfile {
    pub fn new(strategies: Vec<MemoryOneStrategy>) -> Result<Self> {
        let n = strategies.len();
        if n < 2 {
            return Err(Error::TooFewPlayers(n));
        }
        if n > MAX_OUTCOME_PLAYERS {
            return Err(Error::OutOfRange {
                what: "player count",
                value: n,
                limit: MAX_OUTCOME_PLAYERS + 1,
            });
        }
        if let Some(bad) = strategies.iter().find(|s| s.players() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.players(),
            });
        }
        Ok(Self { strategies })
    }

    /// Every seat plays the same strategy.
    pub fn uniform(strategy: MemoryOneStrategy) -> Result<Self> {
        let n = strategy.players();
        Self::new(vec![strategy; n])
    }

    pub fn players(&self) -> usize {
        self.strategies.len()
    }

    pub fn strategies(&self) -> &[MemoryOneStrategy] {
        &self.strategies
    }

    pub fn seat(&self, i: usize) -> &MemoryOneStrategy {
        &self.strategies[i]
    }
}
