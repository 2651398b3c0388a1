use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use super::model::ModelSpec;
use super::noise::NoisePath;
use super::strategy::{Information, Observation, StrategyProfile};
use crate::error::{Error, Result};
use crate::measures::{uniform_grid, DiscreteMeasure, MeasureFlow};
use crate::relaxed_controls::{lift, RelaxedControlPath, StepControl};
use crate::rng::{substream, Purpose};
use crate::scalar::Real;

/// Everything produced by one `N`-player run.
#[derive(Debug, Clone)]
pub struct PathBundle<T> {
    pub seed: u64,
    pub horizon: T,
    pub steps: usize,
    pub d: usize,
    /// Per player, states `X_i(t_0..=t_J)` row-major.
    pub states: Vec<Vec<T>>,
    pub controls: Vec<StepControl<T>>,
    pub noise: Vec<NoisePath<T>>,
    pub xi: Vec<Vec<T>>,
    pub theta: Vec<T>,
    /// Empirical flow `μ^N(t_j)`.
    pub flow: MeasureFlow<T>,
}

impl<T: Real> PathBundle<T> {
    pub fn n_players(&self) -> usize {
        self.states.len()
    }

    pub fn dt(&self) -> T {
        self.horizon / T::of_usize(self.steps)
    }

    pub fn time_grid(&self) -> &[T] {
        self.flow.time_grid()
    }

    pub fn state(&self, i: usize, j: usize) -> &[T] {
        &self.states[i][j * self.d..(j + 1) * self.d]
    }

    /// All player states at grid index `j`, as separate points.
    pub fn states_at(&self, j: usize) -> Vec<Vec<T>> {
        (0..self.n_players())
            .map(|i| self.state(i, j).to_vec())
            .collect()
    }

    /// Writes one row per `(player, j)`: `player,j,t,x..,g..,w..`. The control
    /// columns of the terminal row repeat the last slot.
    pub fn write_paths_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d2 = self.controls.first().map_or(0, |c| c.dim());
        let d1 = self.noise.first().map_or(0, |n| n.dim());
        let mut header = vec!["player".to_string(), "j".into(), "t".into()];
        header.extend((1..=self.d).map(|i| format!("x{i}")));
        header.extend((1..=d2).map(|i| format!("g{i}")));
        header.extend((1..=d1).map(|i| format!("w{i}")));
        w.write_record(&header)?;
        let grid = self.time_grid();
        for i in 0..self.n_players() {
            let cumulative = self.noise[i].cumulative();
            for (j, t) in grid.iter().enumerate() {
                let slot = j.min(self.steps - 1);
                let mut row = vec![i.to_string(), j.to_string(), t.to_string()];
                row.extend(self.state(i, j).iter().map(|v| v.to_string()));
                row.extend(self.controls[i].slot(slot).iter().map(|v| v.to_string()));
                row.extend(cumulative[j * d1..(j + 1) * d1].iter().map(|v| v.to_string()));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Uniform randomization variable `ϑ_i` of player `i`.
pub fn player_theta(seed: u64, i: usize) -> f64 {
    substream(seed, Purpose::Theta, i as u64).random()
}

/// Euler–Maruyama simulation of the `N`-player system.
///
/// At each step the empirical measure of the current states is formed first,
/// then every player moves against that snapshot. Player `i`'s noise comes from
/// its own substream of `seed`, so changing another player's strategy leaves
/// it untouched.
pub fn simulate_n_player<T: Real>(
    model: &ModelSpec<T>,
    profile: &StrategyProfile<T>,
    initials: &[Vec<T>],
    seed: u64,
    steps: usize,
) -> Result<PathBundle<T>> {
    let n = profile.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if initials.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: initials.len(),
        });
    }
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be positive".into()));
    }
    let (d, d1, d2) = (model.d, model.d1, model.d2);
    if let Some(x) = initials.iter().find(|x| x.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x.len(),
        });
    }
    let grid = uniform_grid(model.horizon, steps);
    let dt = model.horizon / T::of_usize(steps);
    let noise: Vec<NoisePath<T>> = (0..n)
        .into_par_iter()
        .map(|i| NoisePath::for_player(seed, i, model.horizon, steps, d1))
        .collect();
    let theta: Vec<T> = (0..n).map(|i| T::of(player_theta(seed, i))).collect();
    let full: Vec<bool> = profile
        .strategies()
        .iter()
        .map(|s| s.information() == Information::Full)
        .collect();
    let mut controllers: Vec<_> = profile.strategies().iter().map(|s| s.controller()).collect();

    let mut current: Vec<T> = initials.concat();
    let mut states: Vec<Vec<T>> = initials
        .iter()
        .map(|x| {
            let mut v = Vec::with_capacity((steps + 1) * d);
            v.extend_from_slice(x);
            v
        })
        .collect();
    let mut actions: Vec<Vec<T>> = vec![Vec::with_capacity(steps * d2); n];
    let mut measures = Vec::with_capacity(steps + 1);

    for j in 0..steps {
        let mu = DiscreteMeasure::uniform(d, current.clone())?;
        let t = grid[j];
        let snapshot = &current;
        let moves: Vec<Result<(Vec<T>, Vec<T>)>> = controllers
            .par_iter_mut()
            .enumerate()
            .map(|(i, ctrl)| {
                let obs = Observation {
                    player: i,
                    step: j,
                    t,
                    dt,
                    xi: &initials[i],
                    theta: theta[i],
                    noise: &noise[i].increments()[..j * d1],
                    noise_dim: d1,
                    states: full[i].then_some(snapshot.as_slice()),
                };
                let mut gamma = vec![T::zero(); d2];
                ctrl.act(&obs, &mut gamma)?;
                if !model.action_set.contains(&gamma) {
                    return Err(Error::ActionOutsideSet { player: i, step: j });
                }
                let mut x = snapshot[i * d..(i + 1) * d].to_vec();
                let mut scratch = vec![T::zero(); model.scratch_len()];
                model.euler_step(t, &mut x, &mu, &gamma, dt, noise[i].increment(j), &mut scratch);
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteState {
                        player: i,
                        step: j + 1,
                    });
                }
                Ok((x, gamma))
            })
            .collect();
        for (i, m) in moves.into_iter().enumerate() {
            let (x, gamma) = m?;
            current[i * d..(i + 1) * d].copy_from_slice(&x);
            states[i].extend_from_slice(&x);
            actions[i].extend_from_slice(&gamma);
        }
        measures.push(mu);
    }
    measures.push(DiscreteMeasure::uniform(d, current)?);

    let controls = actions
        .into_iter()
        .map(|a| StepControl::new(model.horizon, d2, a))
        .collect::<Result<_>>()?;
    Ok(PathBundle {
        seed,
        horizon: model.horizon,
        steps,
        d,
        states,
        controls,
        noise,
        xi: initials.to_vec(),
        theta,
        flow: MeasureFlow::new(grid, measures)?,
    })
}

/// Control input for [`simulate_frozen_flow`].
#[derive(Debug, Clone, Copy)]
pub enum FrozenControl<'a, T> {
    Step(&'a StepControl<T>),
    Relaxed(&'a RelaxedControlPath<T>),
}

impl<'a, T> From<&'a StepControl<T>> for FrozenControl<'a, T> {
    fn from(u: &'a StepControl<T>) -> Self {
        FrozenControl::Step(u)
    }
}

impl<'a, T> From<&'a RelaxedControlPath<T>> for FrozenControl<'a, T> {
    fn from(r: &'a RelaxedControlPath<T>) -> Self {
        FrozenControl::Relaxed(r)
    }
}

/// Single-agent Euler scheme with the population law frozen to `flow`.
///
/// With a relaxed control the drift is averaged over the slot measure.
/// Returns `X(t_0..=t_J)` row-major.
pub fn simulate_frozen_flow<T: Real>(
    model: &ModelSpec<T>,
    flow: &MeasureFlow<T>,
    control: FrozenControl<'_, T>,
    x0: &[T],
    noise: &NoisePath<T>,
) -> Result<Vec<T>> {
    let steps = noise.steps();
    let d = model.d;
    if x0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x0.len(),
        });
    }
    if flow.len() != steps + 1 {
        return Err(Error::GridMismatch(format!(
            "flow has {} points, noise has {} steps",
            flow.len(),
            steps
        )));
    }
    let tol = T::of(1e-9) * model.horizon.max(T::one());
    let grid = noise.time_grid();
    if grid
        .iter()
        .zip(flow.time_grid())
        .any(|(a, b)| (*a - *b).abs() > tol)
    {
        return Err(Error::GridMismatch("flow and noise grids differ".into()));
    }
    let lifted;
    let relaxed = match control {
        FrozenControl::Step(u) => {
            lifted = lift(u);
            &lifted
        }
        FrozenControl::Relaxed(r) => r,
    };
    if relaxed.n_slots() != steps {
        return Err(Error::GridMismatch(format!(
            "control has {} slots, noise has {} steps",
            relaxed.n_slots(),
            steps
        )));
    }
    let dt = noise.dt();
    let mut x = x0.to_vec();
    let mut path = Vec::with_capacity((steps + 1) * d);
    path.extend_from_slice(&x);
    let mut b = vec![T::zero(); d];
    let mut drift = vec![T::zero(); d];
    let mut sigma = vec![T::zero(); d * model.d1];
    for j in 0..steps {
        let nu = flow.at(j);
        let t = grid[j];
        drift.iter_mut().for_each(|v| *v = T::zero());
        for (gamma, w) in relaxed.slot(j).iter() {
            model.drift(t, &x, nu, gamma, &mut b);
            for (acc, &bv) in drift.iter_mut().zip(&b) {
                *acc += w * bv;
            }
        }
        model.diffusion(t, &x, nu, &mut sigma);
        let dw = noise.increment(j);
        for r in 0..d {
            let noise_term: T = (0..model.d1).map(|c| sigma[r * model.d1 + c] * dw[c]).sum();
            x[r] += drift[r] * dt + noise_term;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState {
                player: 0,
                step: j + 1,
            });
        }
        path.extend_from_slice(&x);
    }
    Ok(path)
}
