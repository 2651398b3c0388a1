use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use super::dp::{backward_dp, DpConfig, FeedbackPolicy, ValueGrid};
use super::feedback::{noise_feedback_strategy, NoiseFeedbackStrategy};
use super::grids::{build_control_grid, ControlGrid, StateGrid};
use crate::dynamics::{ModelSpec, NoisePath, PathBundle};
use crate::error::{Error, Result};
use crate::measures::{empirical_measure, flow_distance, uniform_grid, DiscreteMeasure, MeasureFlow};
use crate::relaxed_controls::StepControl;
use crate::rng::{substream, Purpose};
use crate::scalar::Real;

/// Knobs of the damped Picard iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct MfgParams<T> {
    pub particles: usize,
    /// Weight `λ ∈ (0, 1]` of the new empirical flow in each update.
    pub damping: f64,
    pub max_iters: usize,
    pub tol: f64,
    /// Truncation radius `M` of the action set.
    pub radius: T,
    /// State box and dyadic level `k`.
    pub state_grid: StateGrid<T>,
    pub dp: DpConfig,
    pub seed: u64,
    /// Pair particle `i` with `P − 1 − i` through negated noise.
    pub antithetic: bool,
}

impl<T: Real> MfgParams<T> {
    pub fn new(state_grid: StateGrid<T>, radius: T, particles: usize, seed: u64) -> Self {
        Self {
            particles,
            damping: 0.5,
            max_iters: 30,
            tol: 1e-2,
            radius,
            state_grid,
            dp: DpConfig::default(),
            seed,
            antithetic: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::InvalidParameter("particles must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter(format!("damping {} outside (0, 1]", self.damping)));
        }
        if self.max_iters == 0 || !(self.tol >= 0.0) {
            return Err(Error::InvalidParameter("max_iters must be positive and tol nonnegative".into()));
        }
        if !(self.radius > T::zero()) || self.state_grid.level == 0 {
            return Err(Error::InvalidParameter("radius and level must be positive".into()));
        }
        Ok(())
    }
}

/// Diagnostics of one Picard iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// `d(𝔪_{l+1}, 𝔪_l)` in the sup-over-time `W2` flow distance.
    pub residual: f64,
    /// Average of `V[0]` over the atoms of the initial law.
    pub value_mean: f64,
    /// Monte Carlo cost of the iteration's policy against `𝔪_l`.
    pub policy_cost: f64,
    pub gap: f64,
    pub gap_std_error: f64,
    pub boundary_hit_fraction: f64,
}

impl IterationRecord {
    /// One JSON object without trailing newline.
    pub fn to_json(&self) -> String {
        format!(
            "{{\"iter\":{},\"residual\":{:e},\"value_mean\":{:e},\"policy_cost\":{:e},\"gap\":{:e},\"gap_std_error\":{:e},\"boundary_hit_fraction\":{:e}}}",
            self.iter,
            self.residual,
            self.value_mean,
            self.policy_cost,
            self.gap,
            self.gap_std_error,
            self.boundary_hit_fraction
        )
    }
}

/// Output of [`solve_mfg`].
#[derive(Debug, Clone)]
pub struct MfgSolution<T: Real> {
    /// Empirical flow of the final particle pass.
    pub flow: MeasureFlow<T>,
    /// Flow iterate the final policy was computed against.
    pub input_flow: MeasureFlow<T>,
    pub policy: FeedbackPolicy,
    pub value: ValueGrid<T>,
    pub control_grid: ControlGrid<T>,
    pub state_grid: StateGrid<T>,
    pub strategy: NoiseFeedbackStrategy<T>,
    pub particles: PathBundle<T>,
    pub residual: f64,
    pub optimality_gap: f64,
    pub gap_std_error: f64,
    pub converged: bool,
    pub iterations: Vec<IterationRecord>,
}

impl<T: Real> MfgSolution<T> {
    /// Writes one JSON line per iteration.
    pub fn write_iterations<W: Write>(&self, mut out: W) -> Result<()> {
        for rec in &self.iterations {
            writeln!(out, "{}", rec.to_json())?;
        }
        Ok(())
    }
}

/// Mean and standard error of per-particle costs, treating antithetic pairs as
/// one sample.
pub(crate) fn mean_and_error(costs: &[f64], antithetic: bool) -> (f64, f64) {
    let n = costs.len();
    let samples: Vec<f64> = if antithetic && n >= 2 {
        let half = n / 2;
        let mut s: Vec<f64> = (0..half).map(|i| 0.5 * (costs[i] + costs[n - 1 - i])).collect();
        if n % 2 == 1 {
            s.push(costs[half]);
        }
        s
    } else {
        costs.to_vec()
    };
    let m = samples.len() as f64;
    let mean = costs.iter().sum::<f64>() / n as f64;
    if samples.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let sm = samples.iter().sum::<f64>() / m;
    let var = samples.iter().map(|c| (c - sm).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Particle initial states and noise shared by every iteration.
pub(crate) struct ParticleSet<T> {
    pub x0: Vec<Vec<T>>,
    pub noise: Vec<NoisePath<T>>,
}

pub(crate) fn particle_set<T: Real>(
    init: &DiscreteMeasure<T>,
    count: usize,
    seed: u64,
    horizon: T,
    steps: usize,
    noise_dim: usize,
    antithetic: bool,
) -> ParticleSet<T> {
    let x0 = init.quantile_sample(count);
    let own = |i: usize| NoisePath::sample(seed, Purpose::ParticleNoise, i as u64, horizon, steps, noise_dim);
    let noise = (0..count)
        .map(|i| {
            let partner = count - 1 - i;
            if antithetic && partner < i {
                own(partner).negated()
            } else {
                own(i)
            }
        })
        .collect();
    ParticleSet { x0, noise }
}

/// `V[0]` averaged over the atoms of `init`.
pub(crate) fn mean_initial_value<T: Real>(value: &ValueGrid<T>, sgrid: &StateGrid<T>, init: &DiscreteMeasure<T>) -> f64 {
    init.iter()
        .map(|(x, w)| (w * value.interpolate(sgrid, 0, x)).as_f64())
        .sum()
}

struct Pass<T> {
    paths: Vec<Vec<T>>,
    actions: Vec<Vec<usize>>,
    costs: Vec<f64>,
}

fn push_particles<T: Real>(psi: &NoiseFeedbackStrategy<T>, particles: &ParticleSet<T>) -> Result<Pass<T>> {
    let out: Vec<Result<_>> = particles
        .x0
        .par_iter()
        .zip(&particles.noise)
        .enumerate()
        .map(|(i, (x0, w))| {
            psi.rollout(x0, w.increments()).map_err(|e| match e {
                Error::NonFiniteState { step, .. } => Error::NonFiniteState { player: i, step },
                e => e,
            })
        })
        .collect();
    let mut pass = Pass {
        paths: Vec::with_capacity(out.len()),
        actions: Vec::with_capacity(out.len()),
        costs: Vec::with_capacity(out.len()),
    };
    for r in out {
        let r = r?;
        pass.paths.push(r.path);
        pass.actions.push(r.actions);
        pass.costs.push(r.cost.as_f64());
    }
    Ok(pass)
}

fn empirical_flow<T: Real>(paths: &[Vec<T>], d: usize, horizon: T, steps: usize) -> Result<MeasureFlow<T>> {
    let measures = (0..=steps)
        .map(|j| {
            let pts: Vec<Vec<T>> = paths.iter().map(|p| p[j * d..(j + 1) * d].to_vec()).collect();
            empirical_measure(&pts)
        })
        .collect::<Result<Vec<_>>>()?;
    MeasureFlow::new(uniform_grid(horizon, steps), measures)
}

/// Solves the mean field game by damped Picard iteration on the flow.
///
/// Each pass solves the frozen-flow problem by [`backward_dp`], pushes `P`
/// particles started at quantiles of `init` through the resulting `ψ` with
/// noise held fixed across passes, and mixes the empirical flow into the
/// iterate with weight `λ`, thinning each time slice back to `P` atoms by
/// stratified resampling. Stops once the flow moves by at most `tol`.
pub fn solve_mfg<T: Real>(model: &ModelSpec<T>, init: &DiscreteMeasure<T>, params: &MfgParams<T>) -> Result<MfgSolution<T>> {
    params.validate()?;
    if init.dim() != model.d {
        return Err(Error::DimensionMismatch {
            expected: model.d,
            found: init.dim(),
        });
    }
    let sgrid = &params.state_grid;
    let k = sgrid.level;
    let cgrid = build_control_grid(model, params.radius, k)?;
    let steps = sgrid.slots() * params.dp.substeps_per_slot();
    let horizon = model.horizon;
    let particles = particle_set(init, params.particles, params.seed, horizon, steps, model.d1, params.antithetic);
    let lambda = T::of(params.damping);
    let thin_slice = |m: &DiscreteMeasure<T>, iter: usize, j: usize| {
        let mut rng = substream(params.seed, Purpose::Thinning, (iter * (steps + 1) + j) as u64);
        m.thin(params.particles, |_| T::of(rng.random::<f64>()))
    };
    let start = thin_slice(init, 0, 0);
    let mut flow = MeasureFlow::constant(horizon, steps, start)?;
    let mut records = Vec::new();
    let mut iter = 0;
    loop {
        let dp = backward_dp(model, &flow, &cgrid, sgrid, &params.dp)?;
        let psi = noise_feedback_strategy(model, &flow, &cgrid, sgrid, &dp)?;
        let pass = push_particles(&psi, &particles)?;
        let nu = empirical_flow(&pass.paths, model.d, horizon, steps)?;
        let next = MeasureFlow::new(
            flow.time_grid().to_vec(),
            flow.measures()
                .iter()
                .zip(nu.measures())
                .enumerate()
                .map(|(j, (m, n))| Ok(thin_slice(&m.mixture(n, lambda)?, iter + 1, j)))
                .collect::<Result<Vec<_>>>()?,
        )?;
        let residual = flow_distance(&next, &flow)?.as_f64();
        if !residual.is_finite() {
            return Err(Error::Divergence(iter));
        }
        let value_mean = mean_initial_value(&dp.value, sgrid, init);
        let (policy_cost, se) = mean_and_error(&pass.costs, params.antithetic);
        records.push(IterationRecord {
            iter,
            residual,
            value_mean,
            policy_cost,
            gap: policy_cost - value_mean,
            gap_std_error: se,
            boundary_hit_fraction: dp.boundary_hit_fraction,
        });
        iter += 1;
        let converged = residual <= params.tol;
        if converged || iter >= params.max_iters {
            let controls = pass
                .actions
                .iter()
                .map(|a| {
                    let values = a.iter().flat_map(|&i| cgrid.atom(i).to_vec()).collect();
                    StepControl::new(horizon, cgrid.dim, values)
                })
                .collect::<Result<Vec<_>>>()?;
            let bundle = PathBundle {
                seed: params.seed,
                horizon,
                steps,
                d: model.d,
                states: pass.paths,
                controls,
                noise: particles.noise,
                xi: particles.x0,
                theta: vec![T::zero(); params.particles],
                flow: nu.clone(),
            };
            return Ok(MfgSolution {
                flow: nu,
                input_flow: flow,
                policy: dp.policy,
                value: dp.value,
                control_grid: cgrid,
                state_grid: sgrid.clone(),
                strategy: psi,
                particles: bundle,
                residual,
                optimality_gap: policy_cost - value_mean,
                gap_std_error: se,
                converged,
                iterations: records,
            });
        }
        flow = next;
    }
}
