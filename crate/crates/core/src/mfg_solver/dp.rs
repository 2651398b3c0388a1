use std::io::Write;

use rayon::prelude::*;

use super::grids::{ControlGrid, StateGrid};
use super::quadrature::{stage_quadrature, NoiseRule, StageQuadrature};
use crate::dynamics::ModelSpec;
use crate::error::{Error, Result};
use crate::measures::MeasureFlow;
use crate::scalar::Real;

/// Discretization knobs of the backward recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DpConfig {
    /// Euler substeps `S` per stage.
    pub substeps: usize,
    pub rule: NoiseRule,
    /// Stages per dyadic slot over which the slot's action is held. One
    /// stage gives the plain slot recursion.
    pub stages_per_slot: usize,
}

impl Default for DpConfig {
    fn default() -> Self {
        Self {
            substeps: 4,
            rule: NoiseRule::GaussHermite { nodes: 7 },
            stages_per_slot: 1,
        }
    }
}

impl DpConfig {
    pub fn with_substeps(mut self, substeps: usize) -> Self {
        self.substeps = substeps;
        self
    }

    pub fn with_rule(mut self, rule: NoiseRule) -> Self {
        self.rule = rule;
        self
    }

    /// Euler substeps per dyadic slot.
    pub fn substeps_per_slot(&self) -> usize {
        self.substeps * self.stages_per_slot
    }
}

/// `V[j][node]` for `j = 0..=2^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueGrid<T> {
    pub slots: usize,
    pub nodes: usize,
    values: Vec<T>,
}

impl<T: Real> ValueGrid<T> {
    pub fn at(&self, j: usize, node: usize) -> T {
        self.values[j * self.nodes + node]
    }

    pub fn slice(&self, j: usize) -> &[T] {
        &self.values[j * self.nodes..(j + 1) * self.nodes]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `V[j]` at an arbitrary state by clamped multilinear interpolation.
    pub fn interpolate(&self, sgrid: &StateGrid<T>, j: usize, x: &[T]) -> T {
        sgrid.interpolate(self.slice(j), x).0
    }

    /// Writes `j,x1..xd,V`.
    pub fn write_csv<W: Write>(&self, sgrid: &StateGrid<T>, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["j".to_string()];
        header.extend((1..=sgrid.dim()).map(|i| format!("x{i}")));
        header.push("V".into());
        w.write_record(&header)?;
        let mut x = vec![T::zero(); sgrid.dim()];
        for j in 0..=self.slots {
            for n in 0..self.nodes {
                sgrid.node(n, &mut x);
                let mut row = vec![j.to_string()];
                row.extend(x.iter().map(|v| v.to_string()));
                row.push(self.at(j, n).to_string());
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Markov feedback `v*[j][node]` as indices into the control grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackPolicy {
    pub slots: usize,
    pub nodes: usize,
    atoms: Vec<u32>,
}

impl FeedbackPolicy {
    /// Policy choosing atom `a` everywhere.
    pub fn constant(slots: usize, nodes: usize, a: u32) -> Self {
        Self {
            slots,
            nodes,
            atoms: vec![a; slots * nodes],
        }
    }

    pub fn at(&self, j: usize, node: usize) -> usize {
        self.atoms[j * self.nodes + node] as usize
    }

    pub fn indices(&self) -> &[u32] {
        &self.atoms
    }

    /// Writes `j,x1..xd,atom,g1..`.
    pub fn write_csv<T: Real, W: Write>(&self, sgrid: &StateGrid<T>, cgrid: &ControlGrid<T>, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["j".to_string()];
        header.extend((1..=sgrid.dim()).map(|i| format!("x{i}")));
        header.push("atom".into());
        header.extend((1..=cgrid.dim).map(|i| format!("g{i}")));
        w.write_record(&header)?;
        let mut x = vec![T::zero(); sgrid.dim()];
        for j in 0..self.slots {
            for n in 0..self.nodes {
                sgrid.node(n, &mut x);
                let a = self.at(j, n);
                let mut row = vec![j.to_string()];
                row.extend(x.iter().map(|v| v.to_string()));
                row.push(a.to_string());
                row.extend(cgrid.atom(a).iter().map(|v| v.to_string()));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Output of [`backward_dp`].
#[derive(Debug, Clone)]
pub struct DpSolution<T> {
    pub value: ValueGrid<T>,
    pub policy: FeedbackPolicy,
    /// Share of interpolations that had to clamp at the state-grid boundary.
    pub boundary_hit_fraction: f64,
    pub config: DpConfig,
}

/// One stage of sub-stepped Euler under the frozen flow, shared by the DP and
/// the noise-feedback recursion.
pub(crate) struct StageMap<'a, T: Real> {
    pub model: &'a ModelSpec<T>,
    pub flow: &'a MeasureFlow<T>,
    pub substeps: usize,
    /// Flow grid points per Euler substep.
    pub stride: usize,
    pub dt: T,
}

impl<T: Real> StageMap<'_, T> {
    /// Advances `x` over the stage starting at flow index `start` with the
    /// given `substeps × d1` increments.
    #[inline]
    pub fn advance(&self, x: &mut [T], gamma: &[T], start: usize, increments: &[T], scratch: &mut [T]) {
        let d1 = self.model.d1;
        let grid = self.flow.time_grid();
        for l in 0..self.substeps {
            let idx = start + l * self.stride;
            self.model.euler_step(
                grid[idx],
                x,
                self.flow.at(idx),
                gamma,
                self.dt,
                &increments[l * d1..(l + 1) * d1],
                scratch,
            );
        }
    }
}

fn check_inputs<T: Real>(
    model: &ModelSpec<T>,
    flow: &MeasureFlow<T>,
    cgrid: &ControlGrid<T>,
    sgrid: &StateGrid<T>,
    config: &DpConfig,
) -> Result<usize> {
    if sgrid.dim() != model.d || flow.dim() != model.d {
        return Err(Error::DimensionMismatch {
            expected: model.d,
            found: sgrid.dim().min(flow.dim()),
        });
    }
    if cgrid.dim != model.d2 {
        return Err(Error::DimensionMismatch {
            expected: model.d2,
            found: cgrid.dim,
        });
    }
    if config.substeps == 0 || config.stages_per_slot == 0 {
        return Err(Error::InvalidParameter("substeps and stages must be positive".into()));
    }
    let tol = T::of(1e-9) * model.horizon.max(T::one());
    if (flow.horizon() - model.horizon).abs() > tol || (sgrid.horizon - model.horizon).abs() > tol {
        return Err(Error::GridMismatch("flow, state grid and model horizons differ".into()));
    }
    flow.stride_for(sgrid.slots() * config.substeps_per_slot())
}

/// Backward dynamic programming for the frozen-flow control problem with
/// actions restricted to `cgrid`.
///
/// `V[2^k] = F(·, flow(T))` at the nodes, and for `j` descending
/// `V[j](x) = min_γ { f(jh, x, flow(jh), γ)·h + E[V[j+1](Φ(j, x, γ, noise))] }`
/// where `Φ` runs the Euler substeps of one slot, the expectation is the stage
/// quadrature and `V[j+1]` is interpolated on the state grid. With several
/// stages per slot the action is held over all stages and the recursion runs
/// stage by stage. Ties go to the smallest atom index.
pub fn backward_dp<T: Real>(
    model: &ModelSpec<T>,
    flow: &MeasureFlow<T>,
    cgrid: &ControlGrid<T>,
    sgrid: &StateGrid<T>,
    config: &DpConfig,
) -> Result<DpSolution<T>> {
    let stride = check_inputs(model, flow, cgrid, sgrid, config)?;
    let slots = sgrid.slots();
    let stages = config.stages_per_slot;
    let s = config.substeps;
    let n_nodes = sgrid.n_nodes();
    let n_atoms = cgrid.len();
    let d = model.d;
    let tau = sgrid.h() / T::of_usize(stages);
    let quad: StageQuadrature<T> = stage_quadrature(config.rule, model.d1, s, tau)?;
    let map = StageMap {
        model,
        flow,
        substeps: s,
        stride,
        dt: tau / T::of_usize(s),
    };
    let nodes: Vec<T> = (0..n_nodes).flat_map(|n| sgrid.node_vec(n)).collect();
    let flow_index = |j: usize, stage: usize| (j * stages + stage) * s * stride;

    let mut values = vec![T::zero(); (slots + 1) * n_nodes];
    let terminal = flow.at(flow.steps());
    for n in 0..n_nodes {
        let v = model.terminal_cost(&nodes[n * d..(n + 1) * d], terminal);
        if !v.is_finite() {
            return Err(Error::NonFiniteValue { slot: slots, node: n, atom: 0 });
        }
        values[slots * n_nodes + n] = v;
    }
    let mut policy = vec![0u32; slots * n_nodes];
    let mut hits = 0u64;
    let mut lookups = 0u64;

    // value of one stage for a fixed action, given the next stage's values
    let stage_value = |x0: &[T], gamma: &[T], start: usize, next: &[T], y: &mut [T], scratch: &mut [T]| -> (T, T, u64) {
        let t = flow.time_grid()[start];
        let run = model.running_cost(t, x0, flow.at(start), gamma) * tau;
        let mut expect = T::zero();
        let mut clamped = 0u64;
        for q in 0..quad.len() {
            y.copy_from_slice(x0);
            map.advance(y, gamma, start, quad.scenario(q), scratch);
            let (v, c) = sgrid.interpolate(next, y);
            clamped += u64::from(c);
            expect += quad.weights[q] * v;
        }
        (run, expect, clamped)
    };

    for j in (0..slots).rev() {
        let (head, tail) = values.split_at_mut((j + 1) * n_nodes);
        let next = &tail[..n_nodes];
        let current = &mut head[j * n_nodes..];
        if stages == 1 {
            let start = flow_index(j, 0);
            let results: Vec<Result<(T, u32, u64)>> = (0..n_nodes)
                .into_par_iter()
                .map_init(
                    || (vec![T::zero(); d], vec![T::zero(); model.scratch_len()]),
                    |(y, scratch), n| {
                        let x0 = &nodes[n * d..(n + 1) * d];
                        let mut best = T::infinity();
                        let mut arg = 0u32;
                        let mut clamped = 0u64;
                        for a in 0..n_atoms {
                            let (run, expect, c) = stage_value(x0, cgrid.atom(a), start, next, y, scratch);
                            clamped += c;
                            let total = run + expect;
                            if !total.is_finite() {
                                return Err(Error::NonFiniteValue { slot: j, node: n, atom: a });
                            }
                            if total < best {
                                best = total;
                                arg = a as u32;
                            }
                        }
                        Ok((best, arg, clamped))
                    },
                )
                .collect();
            for (n, r) in results.into_iter().enumerate() {
                let (v, a, c) = r?;
                current[n] = v;
                policy[j * n_nodes + n] = a;
                hits += c;
            }
            lookups += (n_nodes * n_atoms * quad.len()) as u64;
        } else {
            let per_atom: Vec<Result<(Vec<T>, u64)>> = (0..n_atoms)
                .into_par_iter()
                .map(|a| {
                    let gamma = cgrid.atom(a);
                    let mut y = vec![T::zero(); d];
                    let mut scratch = vec![T::zero(); model.scratch_len()];
                    let mut w = next.to_vec();
                    let mut w_new = vec![T::zero(); n_nodes];
                    let mut clamped = 0u64;
                    for stage in (0..stages).rev() {
                        let start = flow_index(j, stage);
                        for n in 0..n_nodes {
                            let x0 = &nodes[n * d..(n + 1) * d];
                            let (run, expect, c) = stage_value(x0, gamma, start, &w, &mut y, &mut scratch);
                            clamped += c;
                            let total = run + expect;
                            if !total.is_finite() {
                                return Err(Error::NonFiniteValue { slot: j, node: n, atom: a });
                            }
                            w_new[n] = total;
                        }
                        std::mem::swap(&mut w, &mut w_new);
                    }
                    Ok((w, clamped))
                })
                .collect();
            let mut best = vec![T::infinity(); n_nodes];
            let mut arg = vec![0u32; n_nodes];
            for (a, r) in per_atom.into_iter().enumerate() {
                let (q, c) = r?;
                hits += c;
                for n in 0..n_nodes {
                    if q[n] < best[n] {
                        best[n] = q[n];
                        arg[n] = a as u32;
                    }
                }
            }
            current.copy_from_slice(&best);
            policy[j * n_nodes..(j + 1) * n_nodes].copy_from_slice(&arg);
            lookups += (n_nodes * n_atoms * quad.len() * stages) as u64;
        }
    }

    Ok(DpSolution {
        value: ValueGrid {
            slots,
            nodes: n_nodes,
            values,
        },
        policy: FeedbackPolicy {
            slots,
            nodes: n_nodes,
            atoms: policy,
        },
        boundary_hit_fraction: if lookups == 0 { 0.0 } else { hits as f64 / lookups as f64 },
        config: *config,
    })
}
