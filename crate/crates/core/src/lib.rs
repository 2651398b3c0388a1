//! Simulation and analysis of symmetric `N`-player stochastic differential
//! games with mean-field interaction, and of their mean field game limit.
//!
//! Everything numeric is generic over [`scalar::Real`] (`f32` or `f64`). The
//! aliases below fix the scalar to `f64`, which is what the studies use.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod benchmarks;
pub mod dynamics;
pub mod error;
pub mod measures;
pub mod mfg_solver;
pub mod nash;
pub mod relaxed_controls;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type DiscreteMeasureF64 = measures::DiscreteMeasure<f64>;
pub type MeasureFlowF64 = measures::MeasureFlow<f64>;
pub type ModelSpecF64 = dynamics::ModelSpec<f64>;
pub type PathBundleF64 = dynamics::PathBundle<f64>;
pub type StrategyProfileF64 = dynamics::StrategyProfile<f64>;
pub type MfgSolutionF64 = mfg_solver::MfgSolution<f64>;

pub type DiscreteMeasureF32 = measures::DiscreteMeasure<f32>;
pub type MeasureFlowF32 = measures::MeasureFlow<f32>;
pub type ModelSpecF32 = dynamics::ModelSpec<f32>;
