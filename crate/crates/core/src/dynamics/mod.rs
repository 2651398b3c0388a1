//! Model specification, assumption checks, Euler–Maruyama simulation of the
//! `N`-player system and of the frozen-flow control problem, and second-moment
//! certificates.

mod assumptions;
mod model;
mod moments;
mod noise;
mod simulate;
mod strategy;

pub use assumptions::{validate_assumptions, AssumptionCheck, AssumptionReport};
pub use model::{ActionSet, ClosedSet, Coefficients, FnCoefficients, ModelSpec};
pub use moments::{moment_certificate, moment_certificate_pooled, moment_constant, BoundCheck, MomentCertificate};
pub use noise::NoisePath;
pub use simulate::{player_theta, simulate_frozen_flow, simulate_n_player, FrozenControl, PathBundle};
pub use strategy::{
    ConstantStrategy, Controller, FnStrategy, Information, Observation, Strategy, StrategyProfile, StrategyRef,
};
