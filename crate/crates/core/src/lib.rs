//! Quantifies the error made when a conditional statistical-parity gap is
//! measured through a noisy proxy of the stratifying covariate.
//!
//! The crate is organised around four pieces:
//!
//! * [`model`]: exact joint distributions over `(l, v, vhat, y)`, the
//!   per-group reduced parameterisation and the true/proxy gap computation.
//! * [`bounds`]: structure parameters and the error bounds they imply, plus
//!   conditional-independence diagnostics on full joints.
//! * [`simulation`]: seeded Monte Carlo studies over confusion-cell priors.
//! * [`empirical`]: record-level ingestion, plug-in estimates and bootstrap
//!   intervals.
//!
//! Parallel execution is provided by rayon behind the default `parallel`
//! feature. Every parallel loop is indexed by trial number and derives its
//! random stream from `(seed, index)` alone, so results do not depend on the
//! number of workers.

pub mod bounds;
pub mod empirical;
mod error;
pub mod exec;
pub mod model;
pub mod rng;
pub mod simulation;
pub mod stats;

pub use error::{Error, Result};
