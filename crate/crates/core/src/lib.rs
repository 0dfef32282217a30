//! Expected utility over Born-rule probabilities for Ellsberg and Machina
//! decision problems.
//!
//! - [`hilbert`]: finite-dimensional complex Hilbert space primitives.
//! - [`scenarios`]: payoff tables, probability constraints and the bundled
//!   urn problems.
//! - [`classical`]: single-probability expected utility and exact pattern
//!   feasibility.
//! - [`quantum`]: admissible states and state-dependent expected utility.
//! - [`solver`]: search for state pairs hitting target preference weights.
//! - [`stats`]: experiment statistics from choice counts.
//! - [`cli`]: the `qambig` command-line front end.

pub mod classical;
pub mod cli;
pub mod hilbert;
pub mod quantum;
pub mod report;
pub mod scenarios;
pub mod solver;
pub mod stats;
