//! Cost evaluation, deviation gaps, occupation measures and couplings for
//! `N`-player games.

mod costs;
mod coupling;
mod deviation;
mod occupation;
mod profile;

pub use costs::{evaluate_costs, player_costs, CostReport};
pub use coupling::{optimal_coupling, Coupling};
pub use deviation::{
    best_response_candidate, deviation_gap, deviation_model, others_flow, CandidateGap, DeviationReport,
};
pub use occupation::{
    condition_statistics, default_alpha, occupation_measure, tightness_diagnostic, tightness_diagnostic_with_alpha,
    ConditionReport, OccupationMeasure, Triple,
};
pub use profile::iid_profile;
