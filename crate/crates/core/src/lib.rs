//! Bayesian evidence estimation and posterior sampling by subset simulation.
//!
//! The evidence `z = ∫ L(θ) π(θ) dθ` is rewritten as the integral of the
//! failure-probability function `p_f(l) = P[L(θ) > l]` and accumulated level
//! by level with adaptive conditional-sampling MCMC.

pub mod benchmarks;
pub mod bus;
pub mod config;
pub mod cs_mh;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod fe;
pub mod math;
pub mod model;
pub mod resampling;
pub mod rng;

pub use config::RunConfig;
pub use engine::{run, LevelRecord, SusRun, Termination};
pub use error::{Error, Result};
pub use model::{BayesProblem, LogLikelihood, PriorSpec};
