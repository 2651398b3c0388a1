use crate::dynamics::{StrategyProfile, StrategyRef};
use crate::scalar::Real;

/// `N` copies of `psi`. Each copy is driven by its own player's initial
/// state, randomization and noise, so the triples are i.i.d. whenever the
/// initial states are.
pub fn iid_profile<T: Real>(psi: StrategyRef<T>, n: usize) -> StrategyProfile<T> {
    StrategyProfile::new(vec![psi; n])
}
