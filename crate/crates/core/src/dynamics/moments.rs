use super::model::ModelSpec;
use super::simulate::PathBundle;
use crate::scalar::{sq_norm, Real};

/// `12(T∨1)(T+1)(K∨1)² exp(24(T+1)K²T)`.
pub fn moment_constant(horizon: f64, growth: f64) -> f64 {
    let t = horizon;
    let k = growth;
    12.0 * t.max(1.0) * (t + 1.0) * k.max(1.0).powi(2) * (24.0 * (t + 1.0) * k * k * t).exp()
}

/// Left- and right-hand side of one second-moment bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

impl BoundCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            passed: lhs <= rhs,
        }
    }

    /// `rhs − lhs`.
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// Monte Carlo evaluation of both second-moment bounds on simulated bundles.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentCertificate {
    pub constant: f64,
    /// Per player `sup_j E|X_i(t_j)|²` against
    /// `C(1 + E|ξ_i|² + E∫(d₂(μ^N, δ₀)² + |u_i|²))`.
    pub individual: Vec<BoundCheck>,
    /// `sup_j E[(1/N)Σ|X_j(t_j)|²]` against `C(1 + (1/N)Σ E[|ξ_j|² + ∫|u_j|²])`.
    pub population: BoundCheck,
}

impl MomentCertificate {
    pub fn passed(&self) -> bool {
        self.population.passed && self.individual.iter().all(|c| c.passed)
    }

    /// Largest `lhs / rhs` over the individual bounds.
    pub fn worst_individual_ratio(&self) -> f64 {
        self.individual
            .iter()
            .map(|c| if c.rhs > 0.0 { c.lhs / c.rhs } else { 0.0 })
            .fold(0.0, f64::max)
    }
}

/// Both bounds estimated from a single bundle.
pub fn moment_certificate<T: Real>(bundle: &PathBundle<T>, model: &ModelSpec<T>) -> MomentCertificate {
    moment_certificate_pooled(std::slice::from_ref(bundle), model)
}

/// Both bounds with expectations estimated by averaging over repetitions.
pub fn moment_certificate_pooled<T: Real>(bundles: &[PathBundle<T>], model: &ModelSpec<T>) -> MomentCertificate {
    let constant = moment_constant(model.horizon.as_f64(), model.growth.as_f64());
    let reps = bundles.len().max(1) as f64;
    let Some(first) = bundles.first() else {
        return MomentCertificate {
            constant,
            individual: Vec::new(),
            population: BoundCheck::new(0.0, constant),
        };
    };
    let n = first.n_players();
    let steps = first.steps;
    let dt = first.dt().as_f64();

    let mut mean_sq = vec![vec![0.0f64; steps + 1]; n];
    let mut xi_sq = vec![0.0f64; n];
    let mut energy = vec![0.0f64; n];
    let mut pop_sq = vec![0.0f64; steps + 1];
    let mut flow_integral = 0.0f64;
    for b in bundles {
        for i in 0..n {
            for (j, acc) in mean_sq[i].iter_mut().enumerate() {
                *acc += sq_norm(b.state(i, j)).as_f64() / reps;
            }
            xi_sq[i] += sq_norm(&b.xi[i]).as_f64() / reps;
            energy[i] += b.controls[i].energy().as_f64() / reps;
        }
        for (j, acc) in pop_sq.iter_mut().enumerate() {
            *acc += b.flow.at(j).second_moment().as_f64() / reps;
        }
        // left-point rule on the control slots
        flow_integral += (0..steps)
            .map(|j| b.flow.at(j).second_moment().as_f64())
            .sum::<f64>()
            * dt
            / reps;
    }

    let individual = (0..n)
        .map(|i| {
            let lhs = mean_sq[i].iter().copied().fold(0.0, f64::max);
            let rhs = constant * (1.0 + xi_sq[i] + flow_integral + energy[i]);
            BoundCheck::new(lhs, rhs)
        })
        .collect();
    let pop_lhs = pop_sq.iter().copied().fold(0.0, f64::max);
    let pop_rhs = constant
        * (1.0 + (0..n).map(|i| xi_sq[i] + energy[i]).sum::<f64>() / n as f64);
    MomentCertificate {
        constant,
        individual,
        population: BoundCheck::new(pop_lhs, pop_rhs),
    }
}
