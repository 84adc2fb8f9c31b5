//! Exact analysis of memory-one strategies in the repeated n-player public
//! goods game.
//!
//! The crate is `no_std` and only needs `alloc`. It covers:
//!
//! * [`game`]: outcome encoding, stage payoffs and memory-one strategies.
//! * [`markov`]: the joint Markov chain of a strategy profile, its limit
//!   distributions, pairwise marginals and the Akin identity.
//! * [`enforcement`]: the sufficient region for cooperation-enforcing
//!   strategies, a sampler over it, and collusion payoffs.
//! * [`learning`]: tabular average-reward Q-learning followers playing
//!   against committed leaders.
//!
//! IO, configuration and parallel sweeps live in the `pgg-cli` crate.
#![no_std]
#![deny(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod enforcement;
pub mod error;
pub mod game;
pub mod learning;
pub mod markov;
pub mod seed;

pub use error::{Error, Result};
pub use game::{
    Action, ClassicStrategy, MemoryOneStrategy, Outcome, PublicGoodsGame, StrategyProfile,
};
