//! Frozen-flow optimal control on finite action grids and the mean field
//! fixed point.

mod dp;
mod feedback;
mod fixed_point;
mod grids;
mod monotonicity;
mod quadrature;

pub use dp::{backward_dp, DpConfig, DpSolution, FeedbackPolicy, ValueGrid};
pub use feedback::{noise_feedback_strategy, NoiseFeedbackStrategy, Rollout};
pub use fixed_point::{solve_mfg, IterationRecord, MfgParams, MfgSolution};
pub use grids::{build_control_grid, lattice_spacing, ControlGrid, StateGrid};
pub use monotonicity::{value_monotonicity_study, MonotonicityRow, MonotonicityTable, MONOTONICITY_TOLERANCE};
pub use quadrature::{gauss_hermite_normal, stage_quadrature, NoiseRule, StageQuadrature};


