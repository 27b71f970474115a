//! Distributed neuro-adaptive leader tracking with prescribed transient and
//! steady-state bounds for networks of uncertain high-order agents.
//!
//! ```no_run
//! let scenario = ppsync::scenario::builtin_scenario("problem1").unwrap();
//! let outcome = ppsync::sim::run_experiment(&scenario).unwrap();
//! assert!(outcome.passed());
//! ```

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod controller;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod jet;
pub mod lyapunov;
pub mod nn;
pub mod ppf;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result, ValidationIssue};
