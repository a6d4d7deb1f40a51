//! Exact, desk-scale universal agents.
//!
//! The crate is organised bottom-up:
//!
//! - [`interaction`]: alphabets, percepts, histories and horizon policies.
//! - [`vm`]: a step-budgeted chronological bytecode machine whose prefix-free
//!   programs act both as environments and as policies.
//! - [`model`]: chronological (semi)measures, tabular and program-induced,
//!   and the length-weighted mixture over a program pool.
//! - [`planner`]: expectimax over complete interaction histories.
//! - [`domains`]: sequence prediction, strategic games, function minimisation,
//!   supervised examples, and small demonstration environments.
//! - [`aixitl`]: the time/length bounded best-vote agent.
//! - [`eval`]: losses, bound reports, Pareto and intelligence-order verdicts.
//!
//! All probabilities and rewards are exact rationals ([`Rational`]).

pub mod aixitl;
pub mod domains;
pub mod error;
pub mod eval;
pub mod interaction;
pub mod model;
pub mod planner;
pub mod rational;
pub mod vm;

pub use error::{Error, Result};
pub use interaction::{ActionSymbol, History, HorizonPolicy, Percept, PerceptSpace, Policy};
pub use rational::Rational;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
