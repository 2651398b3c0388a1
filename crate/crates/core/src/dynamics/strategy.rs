use std::sync::Arc;

use crate::error::Result;
use crate::scalar::Real;

/// Information a strategy may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Information {
    /// Own initial state, own randomization variable and own noise only.
    Narrow,
    /// Additionally the current states of all players.
    Full,
}

/// What player `player` sees at grid time `t_step`.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a, T> {
    pub player: usize,
    pub step: usize,
    pub t: T,
    pub dt: T,
    pub xi: &'a [T],
    pub theta: T,
    /// Own increments `ΔW_0, …, ΔW_{step−1}`, row-major.
    pub noise: &'a [T],
    pub noise_dim: usize,
    /// Current states of all players, row-major `N × d`. `None` for narrow
    /// strategies.
    pub states: Option<&'a [T]>,
}

/// Per-player, per-run decision state of a strategy.
pub trait Controller<T> {
    /// Writes the action for the observed step. Called once per step, in order.
    fn act(&mut self, obs: &Observation<'_, T>, action: &mut [T]) -> Result<()>;
}

/// A causal strategy. Each run asks it for a fresh [`Controller`] per player.
pub trait Strategy<T: Real>: Send + Sync {
    fn information(&self) -> Information {
        Information::Narrow
    }

    fn controller(&self) -> Box<dyn Controller<T> + Send + '_>;

    fn label(&self) -> String;
}

/// Shared strategy handle.
pub type StrategyRef<T> = Arc<dyn Strategy<T>>;

/// Strategy vector `(u_1, …, u_N)`.
#[derive(Clone)]
pub struct StrategyProfile<T> {
    strategies: Vec<StrategyRef<T>>,
}

impl<T: Real> StrategyProfile<T> {
    pub fn new(strategies: Vec<StrategyRef<T>>) -> Self {
        Self { strategies }
    }

    pub fn len(&self) -> usize {
        self.strategies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }

    pub fn get(&self, i: usize) -> &StrategyRef<T> {
        &self.strategies[i]
    }

    pub fn strategies(&self) -> &[StrategyRef<T>] {
        &self.strategies
    }

    pub fn is_narrow(&self, i: usize) -> bool {
        self.strategies[i].information() == Information::Narrow
    }

    /// `[u^{−i}, v]`: the profile with player `i`'s strategy replaced.
    pub fn with_replaced(&self, i: usize, v: StrategyRef<T>) -> Self {
        let mut strategies = self.strategies.clone();
        strategies[i] = v;
        Self { strategies }
    }
}

impl<T> std::fmt::Debug for StrategyProfile<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StrategyProfile")
            .field("len", &self.strategies.len())
            .finish()
    }
}

/// `u ≡ γ`.
#[derive(Debug, Clone)]
pub struct ConstantStrategy<T> {
    pub gamma: Vec<T>,
}

impl<T: Real> ConstantStrategy<T> {
    pub fn new(gamma: Vec<T>) -> Self {
        Self { gamma }
    }
}

struct ConstantController<'a, T>(&'a [T]);

impl<T: Real> Controller<T> for ConstantController<'_, T> {
    fn act(&mut self, _: &Observation<'_, T>, action: &mut [T]) -> Result<()> {
        action.copy_from_slice(self.0);
        Ok(())
    }
}

impl<T: Real> Strategy<T> for ConstantStrategy<T> {
    fn controller(&self) -> Box<dyn Controller<T> + Send + '_> {
        Box::new(ConstantController(&self.gamma))
    }

    fn label(&self) -> String {
        let parts: Vec<String> = self.gamma.iter().map(|g| g.to_string()).collect();
        format!("constant({})", parts.join(";"))
    }
}

type Rule<T> = dyn Fn(&Observation<'_, T>, &mut [T]) + Send + Sync;

/// Memoryless strategy given by a closure of the observation.
pub struct FnStrategy<T> {
    label: String,
    information: Information,
    rule: Box<Rule<T>>,
}

impl<T: Real> FnStrategy<T> {
    /// The closure only sees own information.
    pub fn narrow(
        label: impl Into<String>,
        rule: impl Fn(&Observation<'_, T>, &mut [T]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            information: Information::Narrow,
            rule: Box::new(rule),
        }
    }

    /// The closure also sees the current state of every player.
    pub fn full(
        label: impl Into<String>,
        rule: impl Fn(&Observation<'_, T>, &mut [T]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            information: Information::Full,
            rule: Box::new(rule),
        }
    }
}

struct FnController<'a, T>(&'a Rule<T>);

impl<T: Real> Controller<T> for FnController<'_, T> {
    fn act(&mut self, obs: &Observation<'_, T>, action: &mut [T]) -> Result<()> {
        (self.0)(obs, action);
        Ok(())
    }
}

impl<T: Real> Strategy<T> for FnStrategy<T> {
    fn information(&self) -> Information {
        self.information
    }

    fn controller(&self) -> Box<dyn Controller<T> + Send + '_> {
        Box::new(FnController(&*self.rule))
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}
