//! Learning from dependent data: stationary mixing processes, a
//! Bernstein-type tail inequality with per-class constants, clipped
//! regularized learners, and the oracle-inequality calculus that turns the
//! tail inequality into excess-risk bounds and learning rates.
//!
//! The crate is organized bottom-up:
//!
//! - [`processes`]: synthetic stationary processes for each dependence class
//!   (i.i.d., AR(1), finite-state Markov chains, chaotic maps), with exact
//!   stationary laws and mixing-coefficient calculators.
//! - [`mixing`]: effective sample sizes, the per-class constants of the tail
//!   inequality, the bound itself in both threshold and confidence forms,
//!   and a Monte Carlo verifier.
//! - [`losses`]: clipped rescaled least-squares and pinball losses with
//!   closed-form conditional risks, Bayes quantities, and variance bounds.
//! - [`linalg`]: dense and banded symmetric positive-definite solvers.
//! - [`learners`]: regularized kernel least squares, kernel quantile
//!   regression with a certified optimization gap, and finite-set empirical
//!   risk minimization.
//! - [`bounds`]: covering-number models, the implicit radius of the
//!   excess-risk bound, and rate exponents with their parameter schedules.
//! - [`harness`]: deterministic parallel experiments tying it all together,
//!   with serializable configs and reports.

pub mod bounds;
pub mod error;
pub mod harness;
pub mod learners;
pub mod linalg;
pub mod losses;
pub mod mixing;
pub mod processes;
pub mod stats;

pub use error::{Error, Result};
