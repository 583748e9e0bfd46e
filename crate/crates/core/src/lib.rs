//! Stable lotteries over committees.
//!
//! Voters hold ordinal preferences over committees, either through an
//! approval set (more approved members is better) or a full ranking of the
//! candidates (a better favourite member is better). A size-`K` committee is
//! *blocked* by a coalition that strictly prefers some committee `S'` and
//! holds at least `n·|S'|/K` of the voting weight. Blocking-free committees
//! may not exist, but lotteries over committees whose expected capture stays
//! below the budget always do.
//!
//! The crate provides:
//!
//! * [`model`]: instances, preferences, committees, lotteries and the
//!   capture-count primitives.
//! * [`rounding`]: probability matching against an attacker lottery and
//!   dependent rounding to size-`K` committees.
//! * [`solver`]: the multiplicative-weights loop that produces certified
//!   ε-approximately `L`-stable lotteries.
//! * [`rules`]: proportional approval voting and the deterministic `K = 3`
//!   stable-committee construction.
//! * [`verify`]: exhaustive blocking search and exact Poisson-binomial checks
//!   of the tail bounds the rounding relies on.
//! * [`gen`]: instance generators.
//! * [`io`]: JSON instance and lottery files.

pub mod combos;
pub mod error;
pub mod gen;
pub mod io;
pub mod model;
pub mod rng;
pub mod rounding;
pub mod rules;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use model::{
    capture_count, expected_capture, payoff, violation_ratio, AttackLottery, CandidateId,
    Committee, Instance, Lottery, Preference, StabilityReport, Voter,
};
