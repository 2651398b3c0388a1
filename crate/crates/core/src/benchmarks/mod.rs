//! Model instances with independent checks: a scalar linear-quadratic game
//! with a Riccati oracle, a compact-action bounded model, and an
//! Ornstein–Uhlenbeck special case.

mod bounded;
mod lq;

pub use bounded::{bounded_initial_points, bounded_model};
pub use lq::{lq_initial_measure, lq_model, lq_oracle, ou_model, LqCoefficients, LqOracle, LqParams};
