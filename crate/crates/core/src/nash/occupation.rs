use crate::dynamics::{NoisePath, PathBundle};
use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::relaxed_controls::{lift, RelaxedControlPath};
use crate::scalar::{norm, Real};

use super::costs::CostReport;

/// One player's `(state path, relaxed control, noise path)`.
#[derive(Debug, Clone)]
pub struct Triple<T> {
    /// `X(t_0..=t_J)` row-major.
    pub state: Vec<T>,
    pub control: RelaxedControlPath<T>,
    pub noise: NoisePath<T>,
}

/// Uniform empirical measure over the players' triples.
#[derive(Debug, Clone)]
pub struct OccupationMeasure<T> {
    pub d: usize,
    pub steps: usize,
    pub horizon: T,
    pub triples: Vec<Triple<T>>,
}

impl<T: Real> OccupationMeasure<T> {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn weight(&self) -> T {
        T::one() / T::of_usize(self.len())
    }

    pub fn dt(&self) -> T {
        self.horizon / T::of_usize(self.steps)
    }

    /// Push-forward through the state at grid index `j`.
    pub fn state_marginal(&self, j: usize) -> Result<DiscreteMeasure<T>> {
        let d = self.d;
        let pts = self.triples.iter().flat_map(|t| t.state[j * d..(j + 1) * d].to_vec()).collect();
        DiscreteMeasure::uniform(d, pts)
    }
}

/// `Q^N`: the bundle's triples with step controls lifted to relaxed ones.
pub fn occupation_measure<T: Real>(bundle: &PathBundle<T>) -> OccupationMeasure<T> {
    let triples = (0..bundle.n_players())
        .map(|i| Triple {
            state: bundle.states[i].clone(),
            control: lift(&bundle.controls[i]),
            noise: bundle.noise[i].clone(),
        })
        .collect();
    OccupationMeasure {
        d: bundle.d,
        steps: bundle.steps,
        horizon: bundle.horizon,
        triples,
    }
}

/// Default Hölder exponent `δ₀ / (2(8 + δ₀))` of the modulus term.
pub fn default_alpha<T: Real>(delta0: T) -> T {
    delta0 / (T::of(2.0) * (T::of(8.0) + delta0))
}

/// Modulus of continuity `w(h_m) = max_{|j − l| ≤ m} |p_j − p_l|` for
/// `m = 1..=lags`.
fn modulus<T: Real>(path: &[T], dim: usize, lags: usize) -> Vec<T> {
    let points = path.len() / dim;
    let mut out = Vec::with_capacity(lags);
    let mut running = T::zero();
    for m in 1..=lags {
        let exact = (0..points.saturating_sub(m))
            .map(|j| {
                let a = &path[j * dim..(j + 1) * dim];
                let b = &path[(j + m) * dim..(j + m + 1) * dim];
                crate::scalar::sq_dist(a, b).sqrt()
            })
            .fold(T::zero(), T::max);
        running = running.max(exact);
        out.push(running);
    }
    out
}

/// Tightness functional `g(Q)` with the default exponent.
pub fn tightness_diagnostic<T: Real>(q: &OccupationMeasure<T>, delta0: T) -> Result<T> {
    tightness_diagnostic_with_alpha(q, delta0, default_alpha(delta0))
}

/// `g(Q) = (1/N) Σ_i [ ‖X_i‖_∞^{2+δ₀} + |W_i(0)| + ∫|γ|^{2+δ₀} r_i(dγ, dt)
/// + max_h h^{−α}(w_{X_i}(h) + w_{W_i}(h)) ]` with `h` ranging over the grid
/// multiples of `Δt` up to `min(1, T)`.
pub fn tightness_diagnostic_with_alpha<T: Real>(q: &OccupationMeasure<T>, delta0: T, alpha: T) -> Result<T> {
    let cap = T::one().min(q.horizon);
    if !(delta0 > T::zero() && delta0 <= cap) {
        return Err(Error::InvalidParameter(format!("delta0 = {delta0} outside (0, min(1, T)]")));
    }
    if q.is_empty() {
        return Err(Error::EmptySample);
    }
    let p = T::of(2.0) + delta0;
    let dt = q.dt();
    let lags = ((cap / dt) + T::of(1e-9)).floor().as_f64().max(1.0) as usize;
    let lags = lags.min(q.steps);
    let total = q
        .triples
        .iter()
        .map(|tr| {
            let sup = tr
                .state
                .chunks_exact(q.d)
                .map(norm)
                .fold(T::zero(), T::max)
                .powf(p);
            let w = tr.noise.cumulative();
            let w0 = norm(&w[..tr.noise.dim()]);
            let control = tr.control.moment(p);
            let wx = modulus(&tr.state, q.d, lags);
            let ww = modulus(&w, tr.noise.dim(), lags);
            let holder = (0..lags)
                .map(|m| (wx[m] + ww[m]) / (dt * T::of_usize(m + 1)).powf(alpha))
                .fold(T::zero(), T::max);
            sup + w0 + control + holder
        })
        .sum::<T>();
    Ok(total / T::of_usize(q.len()))
}

/// Moment statistic of condition (T) and the cost-symmetry quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    /// `(1/N) Σ_i (|ξ_i|^{2+δ₀} + ∫|u_i|^{2+δ₀} dt)`.
    pub moment_statistic: f64,
    pub designated: Option<usize>,
    pub designated_cost: Option<f64>,
    pub mean_cost: Option<f64>,
    pub spread: Option<f64>,
}

pub fn condition_statistics<T: Real>(bundle: &PathBundle<T>, delta0: T, costs: Option<&CostReport>) -> ConditionReport {
    let p = T::of(2.0) + delta0;
    let n = bundle.n_players();
    let stat = (0..n)
        .map(|i| {
            let u = &bundle.controls[i];
            let xi = norm(&bundle.xi[i]).powf(p);
            let control = (0..u.slots()).map(|j| norm(u.slot(j)).powf(p)).sum::<T>() * u.dt();
            xi + control
        })
        .sum::<T>()
        / T::of_usize(n.max(1));
    ConditionReport {
        moment_statistic: stat.as_f64(),
        designated: costs.map(|c| c.designated),
        designated_cost: costs.map(|c| c.means[c.designated]),
        mean_cost: costs.map(|c| c.mean_cost),
        spread: costs.map(|c| c.spread),
    }
}
