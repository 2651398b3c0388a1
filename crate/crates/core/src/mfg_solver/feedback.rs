use std::sync::Arc;

use super::dp::{DpSolution, FeedbackPolicy, StageMap};
use super::grids::{ControlGrid, StateGrid};
use crate::dynamics::{Controller, ModelSpec, NoisePath, Observation, Strategy};
use crate::error::{Error, Result};
use crate::measures::MeasureFlow;
use crate::relaxed_controls::StepControl;
use crate::scalar::Real;

struct Inner<T: Real> {
    model: ModelSpec<T>,
    flow: MeasureFlow<T>,
    cgrid: ControlGrid<T>,
    sgrid: StateGrid<T>,
    policy: FeedbackPolicy,
    /// Euler substeps per slot, `S` times the stages per slot.
    per_slot: usize,
    stride: usize,
    /// Stages per slot and the running-cost step of one stage.
    stages: usize,
    tau: T,
}

/// The noise-feedback strategy `ψ(t, x0, W)` built from a grid feedback.
///
/// On slot `j` the state recursion `x_{j+1} = Φ(j, x_j, v*(j, x_j), ΔW_j)` is
/// run with the same sub-stepped Euler map as the DP, with `v*` read at the
/// nearest state node. The action on `[jh, (j+1)h)` only depends on `x0` and
/// the noise up to `jh`.
#[derive(Clone)]
pub struct NoiseFeedbackStrategy<T: Real> {
    inner: Arc<Inner<T>>,
}

impl<T: Real> std::fmt::Debug for NoiseFeedbackStrategy<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NoiseFeedbackStrategy")
            .field("slots", &self.inner.policy.slots)
            .field("atoms", &self.inner.cgrid.len())
            .finish()
    }
}

/// Builds `ψ` from one [`backward_dp`](super::backward_dp) run.
pub fn noise_feedback_strategy<T: Real>(
    model: &ModelSpec<T>,
    flow: &MeasureFlow<T>,
    cgrid: &ControlGrid<T>,
    sgrid: &StateGrid<T>,
    dp: &DpSolution<T>,
) -> Result<NoiseFeedbackStrategy<T>> {
    if dp.policy.nodes != sgrid.n_nodes() || dp.policy.slots != sgrid.slots() {
        return Err(Error::GridMismatch("policy does not match the state grid".into()));
    }
    if dp.policy.indices().iter().any(|&a| a as usize >= cgrid.len()) {
        return Err(Error::GridMismatch("policy refers to atoms outside the control grid".into()));
    }
    let per_slot = dp.config.substeps_per_slot();
    let stride = flow.stride_for(sgrid.slots() * per_slot)?;
    let stages = dp.config.stages_per_slot;
    Ok(NoiseFeedbackStrategy {
        inner: Arc::new(Inner {
            model: model.clone(),
            flow: flow.clone(),
            cgrid: cgrid.clone(),
            sgrid: sgrid.clone(),
            policy: dp.policy.clone(),
            per_slot,
            stride,
            stages,
            tau: sgrid.h() / T::of_usize(stages),
        }),
    })
}

/// One `ψ` trajectory on the DP's own substep grid.
#[derive(Debug, Clone)]
pub struct Rollout<T> {
    /// States at the substep grid, `(J+1) × d`.
    pub path: Vec<T>,
    /// Atom index per slot.
    pub actions: Vec<usize>,
    /// Realized cost with the running cost sampled at stage starts, the same
    /// rule the DP uses.
    pub cost: T,
}

impl<T: Real> NoiseFeedbackStrategy<T> {
    pub fn control_grid(&self) -> &ControlGrid<T> {
        &self.inner.cgrid
    }

    pub fn state_grid(&self) -> &StateGrid<T> {
        &self.inner.sgrid
    }

    pub fn policy(&self) -> &FeedbackPolicy {
        &self.inner.policy
    }

    pub fn flow(&self) -> &MeasureFlow<T> {
        &self.inner.flow
    }

    /// Euler substeps per dyadic slot inside `Φ`.
    pub fn substeps_per_slot(&self) -> usize {
        self.inner.per_slot
    }

    /// Number of `Φ` substeps over the whole horizon.
    pub fn fine_steps(&self) -> usize {
        self.inner.per_slot * self.inner.policy.slots
    }

    fn map(&self) -> StageMap<'_, T> {
        let s = &self.inner;
        StageMap {
            model: &s.model,
            flow: &s.flow,
            substeps: s.per_slot,
            stride: s.stride,
            dt: s.sgrid.h() / T::of_usize(s.per_slot),
        }
    }

    /// Fine steps per slot for a noise grid of step `dt`.
    fn ratio(&self, dt: T, steps: Option<usize>) -> Result<usize> {
        let s = &self.inner;
        let r = (s.sgrid.h() / dt).round();
        let ok = r >= T::one()
            && ((r * dt - s.sgrid.h()).abs() <= T::of(1e-9) * s.sgrid.h())
            && (r.as_f64() as usize).is_multiple_of(s.per_slot);
        let r = r.as_f64() as usize;
        if !ok || steps.is_some_and(|n| n != r * s.policy.slots) {
            return Err(Error::GridMismatch(format!(
                "noise grid must refine each slot into a multiple of {} steps",
                s.per_slot
            )));
        }
        Ok(r)
    }

    fn choose(&self, j: usize, x: &[T]) -> usize {
        self.inner.policy.at(j, self.inner.sgrid.nearest_node(x))
    }

    /// Sums groups of fine increments of slot `j` into the `Φ` substeps.
    fn aggregate(&self, noise: &[T], dim: usize, j: usize, r: usize, out: &mut [T]) {
        let group = r / self.inner.per_slot;
        out.iter_mut().for_each(|v| *v = T::zero());
        for l in 0..self.inner.per_slot {
            for g in 0..group {
                let step = j * r + l * group + g;
                for c in 0..dim {
                    out[l * dim + c] += noise[step * dim + c];
                }
            }
        }
    }

    /// Atom indices per slot for a full noise path.
    pub fn actions(&self, x0: &[T], noise: &NoisePath<T>) -> Result<Vec<usize>> {
        let s = &self.inner;
        if noise.dim() != s.model.d1 || x0.len() != s.model.d {
            return Err(Error::DimensionMismatch {
                expected: s.model.d1,
                found: noise.dim(),
            });
        }
        let r = self.ratio(noise.dt(), Some(noise.steps()))?;
        let map = self.map();
        let mut x = x0.to_vec();
        let mut incr = vec![T::zero(); s.per_slot * s.model.d1];
        let mut scratch = vec![T::zero(); s.model.scratch_len()];
        let mut out = Vec::with_capacity(s.policy.slots);
        for j in 0..s.policy.slots {
            let a = self.choose(j, &x);
            out.push(a);
            if j + 1 < s.policy.slots {
                self.aggregate(noise.increments(), s.model.d1, j, r, &mut incr);
                map.advance(&mut x, s.cgrid.atom(a), j * s.per_slot * s.stride, &incr, &mut scratch);
            }
        }
        Ok(out)
    }

    /// `ψ(·, x0, W)` as a step control on the dyadic grid.
    pub fn controls(&self, x0: &[T], noise: &NoisePath<T>) -> Result<StepControl<T>> {
        let s = &self.inner;
        let values = self
            .actions(x0, noise)?
            .into_iter()
            .flat_map(|a| s.cgrid.atom(a).to_vec())
            .collect();
        StepControl::new(s.model.horizon, s.cgrid.dim, values)
    }

    /// Runs `ψ` along increments given on the DP substep grid
    /// (`fine_steps() × d1`) and records path, actions and realized cost.
    pub fn rollout(&self, x0: &[T], increments: &[T]) -> Result<Rollout<T>> {
        let s = &self.inner;
        let (d, d1) = (s.model.d, s.model.d1);
        let fine = self.fine_steps();
        if increments.len() != fine * d1 || x0.len() != d {
            return Err(Error::GridMismatch("rollout needs increments on the substep grid".into()));
        }
        let map = StageMap { substeps: 1, ..self.map() };
        let grid = s.flow.time_grid();
        let per_stage = s.per_slot / s.stages;
        let mut path = Vec::with_capacity((fine + 1) * d);
        path.extend_from_slice(x0);
        let mut x = x0.to_vec();
        let mut scratch = vec![T::zero(); s.model.scratch_len()];
        let mut actions = Vec::with_capacity(s.policy.slots);
        let mut cost = T::zero();
        let mut gamma: &[T] = &[];
        for step in 0..fine {
            let idx = step * s.stride;
            if step % s.per_slot == 0 {
                let a = self.choose(step / s.per_slot, &x);
                actions.push(a);
                gamma = s.cgrid.atom(a);
            }
            if step % per_stage == 0 {
                cost += s.model.running_cost(grid[idx], &x, s.flow.at(idx), gamma) * s.tau;
            }
            map.advance(&mut x, gamma, idx, &increments[step * d1..(step + 1) * d1], &mut scratch);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { player: 0, step });
            }
            path.extend_from_slice(&x);
        }
        cost += s.model.terminal_cost(&x, s.flow.at(s.flow.steps()));
        Ok(Rollout { path, actions, cost })
    }
}

struct PsiController<'a, T: Real> {
    psi: &'a NoiseFeedbackStrategy<T>,
    x: Vec<T>,
    incr: Vec<T>,
    scratch: Vec<T>,
    /// Slots whose action has been fixed so far.
    decided: usize,
    action: usize,
    ratio: Option<usize>,
}

impl<T: Real> Controller<T> for PsiController<'_, T> {
    fn act(&mut self, obs: &Observation<'_, T>, action: &mut [T]) -> Result<()> {
        let s = &self.psi.inner;
        let r = match self.ratio {
            Some(r) => r,
            None => {
                if obs.noise_dim != s.model.d1 {
                    return Err(Error::DimensionMismatch {
                        expected: s.model.d1,
                        found: obs.noise_dim,
                    });
                }
                let r = self.psi.ratio(obs.dt, None)?;
                self.x = obs.xi.to_vec();
                self.ratio = Some(r);
                r
            }
        };
        let slot = (obs.step / r).min(s.policy.slots - 1);
        while self.decided <= slot {
            let j = self.decided;
            if j > 0 {
                self.psi.aggregate(obs.noise, s.model.d1, j - 1, r, &mut self.incr);
                let gamma = s.cgrid.atom(self.action);
                self.psi
                    .map()
                    .advance(&mut self.x, gamma, (j - 1) * s.per_slot * s.stride, &self.incr, &mut self.scratch);
            }
            self.action = self.psi.choose(j, &self.x);
            self.decided += 1;
        }
        action.copy_from_slice(s.cgrid.atom(self.action));
        Ok(())
    }
}

impl<T: Real> Strategy<T> for NoiseFeedbackStrategy<T> {
    fn controller(&self) -> Box<dyn Controller<T> + Send + '_> {
        let s = &self.inner;
        Box::new(PsiController {
            psi: self,
            x: Vec::new(),
            incr: vec![T::zero(); s.per_slot * s.model.d1],
            scratch: vec![T::zero(); s.model.scratch_len()],
            decided: 0,
            action: 0,
            ratio: None,
        })
    }

    fn label(&self) -> String {
        format!("psi(M={}, k={})", self.inner.cgrid.radius, self.inner.cgrid.level)
    }
}
