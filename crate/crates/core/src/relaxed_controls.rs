//! Step controls, relaxed controls as per-slot action measures, truncation and
//! chattering projection onto finite action grids.

use std::io::Write;

use crate::dynamics::ActionSet;
use crate::error::{Error, Result};
use crate::measures::{uniform_grid, DiscreteMeasure};
use crate::scalar::{sq_dist, sq_norm, Real};

/// Piecewise constant control on a uniform grid of `slots` steps over
/// `[0, horizon]`, value `γ_j` on `[t_j, t_{j+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepControl<T> {
    horizon: T,
    dim: usize,
    values: Vec<T>,
}

impl<T: Real> StepControl<T> {
    /// `values` is row-major, one row of length `dim` per slot.
    pub fn new(horizon: T, dim: usize, values: Vec<T>) -> Result<Self> {
        if dim == 0 || values.is_empty() {
            return Err(Error::EmptySample);
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: values.len() % dim,
            });
        }
        if !(horizon > T::zero()) {
            return Err(Error::InvalidParameter(format!("horizon {horizon}")));
        }
        Ok(Self {
            horizon,
            dim,
            values,
        })
    }

    pub fn constant(horizon: T, slots: usize, gamma: &[T]) -> Result<Self> {
        Self::new(horizon, gamma.len(), gamma.repeat(slots))
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn slots(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn dt(&self) -> T {
        self.horizon / T::of_usize(self.slots())
    }

    pub fn time_grid(&self) -> Vec<T> {
        uniform_grid(self.horizon, self.slots())
    }

    pub fn slot(&self, j: usize) -> &[T] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `Σ_j |γ_j|² Δt`.
    pub fn energy(&self) -> T {
        self.values
            .chunks_exact(self.dim)
            .map(sq_norm)
            .sum::<T>()
            * self.dt()
    }

    /// First slot whose value lies outside `gamma_set`.
    pub fn check_in(&self, gamma_set: &ActionSet<T>) -> Result<()> {
        match (0..self.slots()).find(|&j| !gamma_set.contains(self.slot(j))) {
            Some(step) => Err(Error::ActionOutsideSet { player: 0, step }),
            None => Ok(()),
        }
    }

    /// Writes `slot,t,g1,...`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["slot".to_string(), "t".into()];
        header.extend((1..=self.dim).map(|i| format!("g{i}")));
        w.write_record(&header)?;
        for (j, t) in self.time_grid().iter().take(self.slots()).enumerate() {
            let mut row = vec![j.to_string(), t.to_string()];
            row.extend(self.slot(j).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Relaxed control with one probability measure on `Γ` per time slot.
///
/// The induced measure on `Γ × [0, T]` is `Σ_j slot_j(dγ) ⊗ Leb|[t_j, t_{j+1})`,
/// so its time marginal is Lebesgue.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedControlPath<T> {
    horizon: T,
    slots: Vec<DiscreteMeasure<T>>,
}

impl<T: Real> RelaxedControlPath<T> {
    pub fn new(horizon: T, slots: Vec<DiscreteMeasure<T>>) -> Result<Self> {
        let first = slots.first().ok_or(Error::EmptySample)?;
        if let Some(s) = slots.iter().find(|s| s.dim() != first.dim()) {
            return Err(Error::DimensionMismatch {
                expected: first.dim(),
                found: s.dim(),
            });
        }
        if !(horizon > T::zero()) {
            return Err(Error::InvalidParameter(format!("horizon {horizon}")));
        }
        Ok(Self { horizon, slots })
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.slots[0].dim()
    }

    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn dt(&self) -> T {
        self.horizon / T::of_usize(self.slots.len())
    }

    pub fn slot(&self, j: usize) -> &DiscreteMeasure<T> {
        &self.slots[j]
    }

    pub fn slots(&self) -> &[DiscreteMeasure<T>] {
        &self.slots
    }

    /// `r(Γ × [0, t_j])`.
    pub fn mass_up_to(&self, j: usize) -> T {
        self.slots[..j]
            .iter()
            .map(|s| s.weights().iter().copied().sum::<T>())
            .sum::<T>()
            * self.dt()
    }

    /// `∫|γ|² r(dγ, dt) = Σ_j Δt Σ_a w_a|γ_a|²`.
    pub fn second_moment(&self) -> T {
        self.slots.iter().map(|s| s.second_moment()).sum::<T>() * self.dt()
    }

    /// `∫|γ|^p r(dγ, dt)`.
    pub fn moment(&self, p: T) -> T {
        self.slots
            .iter()
            .map(|s| s.iter().map(|(g, w)| w * sq_norm(g).sqrt().powf(p)).sum::<T>())
            .sum::<T>()
            * self.dt()
    }
}

/// Relaxed control `δ_{u(t)}(dγ) dt` induced by a step control.
pub fn lift<T: Real>(u: &StepControl<T>) -> RelaxedControlPath<T> {
    let slots = (0..u.slots())
        .map(|j| DiscreteMeasure::dirac(u.slot(j)))
        .collect();
    RelaxedControlPath {
        horizon: u.horizon(),
        slots,
    }
}

/// Moves all slot mass sitting on actions with `|γ| > M` onto `gamma0`.
///
/// When `|gamma0| > M` the truncated set is treated as empty and every slot
/// becomes `δ_{gamma0}`.
pub fn truncate<T: Real>(
    r: &RelaxedControlPath<T>,
    radius: T,
    gamma0: &[T],
    gamma_set: &ActionSet<T>,
) -> Result<RelaxedControlPath<T>> {
    if !gamma_set.contains(gamma0) {
        return Err(Error::FallbackOutsideSet);
    }
    if gamma0.len() != r.dim() {
        return Err(Error::DimensionMismatch {
            expected: r.dim(),
            found: gamma0.len(),
        });
    }
    let m2 = radius * radius;
    let fallback_only = sq_norm(gamma0) > m2;
    let slots = r
        .slots
        .iter()
        .map(|slot| {
            if fallback_only {
                return DiscreteMeasure::dirac(gamma0);
            }
            let moved: T = slot
                .iter()
                .filter(|(g, _)| sq_norm(g) > m2)
                .map(|(_, w)| w)
                .sum();
            if moved == T::zero() {
                return slot.clone();
            }
            let mut atoms = Vec::with_capacity(slot.atoms().len() + gamma0.len());
            let mut weights = Vec::with_capacity(slot.len() + 1);
            let mut merged = false;
            for (g, w) in slot.iter().filter(|(g, _)| sq_norm(g) <= m2) {
                atoms.extend_from_slice(g);
                if !merged && g == gamma0 {
                    weights.push(w + moved);
                    merged = true;
                } else {
                    weights.push(w);
                }
            }
            if !merged {
                atoms.extend_from_slice(gamma0);
                weights.push(moved);
            }
            DiscreteMeasure::new(gamma0.len(), atoms, weights)
                .expect("mass-preserving reassignment")
        })
        .collect();
    Ok(RelaxedControlPath {
        horizon: r.horizon,
        slots,
    })
}

/// Index of the grid atom nearest to `gamma`, ties to the smallest index.
pub fn nearest_atom<T: Real>(atoms: &[T], dim: usize, gamma: &[T]) -> usize {
    let mut best = 0usize;
    let mut best_d = T::infinity();
    for (a, atom) in atoms.chunks_exact(dim).enumerate() {
        let d = sq_dist(atom, gamma);
        if d < best_d {
            best_d = d;
            best = a;
        }
    }
    best
}

/// Snaps `u` onto the finite action grid and coarsens it to the dyadic grid
/// of `2^k` slots. The value on coarse slot `c` is the snap of `u` at the
/// slot's left endpoint.
pub fn chattering_project<T: Real>(
    u: &StepControl<T>,
    grid_atoms: &[T],
    k: u32,
) -> Result<StepControl<T>> {
    let dim = u.dim();
    if grid_atoms.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if !grid_atoms.len().is_multiple_of(dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: grid_atoms.len() % dim,
        });
    }
    let coarse = 1usize
        .checked_shl(k)
        .ok_or_else(|| Error::InvalidParameter(format!("level {k}")))?;
    if !u.slots().is_multiple_of(coarse) {
        return Err(Error::GridMismatch(format!(
            "{} slots do not refine the dyadic grid of {coarse} slots",
            u.slots()
        )));
    }
    let ratio = u.slots() / coarse;
    let mut values = Vec::with_capacity(coarse * dim);
    for c in 0..coarse {
        let a = nearest_atom(grid_atoms, dim, u.slot(c * ratio));
        values.extend_from_slice(&grid_atoms[a * dim..(a + 1) * dim]);
    }
    StepControl::new(u.horizon(), dim, values)
}

/// `max_s min_a |s − a|` over the sample points.
pub fn covering_radius<T: Real>(grid_atoms: &[T], samples: &[T], dim: usize) -> T {
    samples
        .chunks_exact(dim)
        .map(|s| {
            grid_atoms
                .chunks_exact(dim)
                .map(|a| sq_dist(a, s))
                .fold(T::infinity(), T::min)
                .sqrt()
        })
        .fold(T::zero(), T::max)
}
