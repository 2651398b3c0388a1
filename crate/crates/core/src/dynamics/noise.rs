use crate::error::{Error, Result};
use crate::measures::uniform_grid;
use crate::rng::{normal, substream, Purpose};
use crate::scalar::Real;

/// Brownian increments on a uniform grid of `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath<T> {
    horizon: T,
    dim: usize,
    increments: Vec<T>,
}

impl<T: Real> NoisePath<T> {
    /// `increments` is row-major, one row of length `dim` per step.
    pub fn new(horizon: T, dim: usize, increments: Vec<T>) -> Result<Self> {
        if dim == 0 || increments.is_empty() || !increments.len().is_multiple_of(dim) {
            return Err(Error::InvalidParameter(format!(
                "{} increments for dimension {dim}",
                increments.len()
            )));
        }
        Ok(Self {
            horizon,
            dim,
            increments,
        })
    }

    /// Path of player `index`, drawn from its own substream of `seed`.
    pub fn sample(seed: u64, purpose: Purpose, index: u64, horizon: T, steps: usize, dim: usize) -> Self {
        let mut rng = substream(seed, purpose, index);
        let scale = (horizon / T::of_usize(steps)).sqrt();
        let increments = (0..steps * dim)
            .map(|_| normal::<T, _>(&mut rng) * scale)
            .collect();
        Self {
            horizon,
            dim,
            increments,
        }
    }

    /// Noise of player `index` in an `N`-player run seeded with `seed`.
    pub fn for_player(seed: u64, index: usize, horizon: T, steps: usize, dim: usize) -> Self {
        Self::sample(seed, Purpose::Noise, index as u64, horizon, steps, dim)
    }

    pub fn zero(horizon: T, steps: usize, dim: usize) -> Self {
        Self {
            horizon,
            dim,
            increments: vec![T::zero(); steps * dim],
        }
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.increments.len() / self.dim
    }

    pub fn dt(&self) -> T {
        self.horizon / T::of_usize(self.steps())
    }

    pub fn time_grid(&self) -> Vec<T> {
        uniform_grid(self.horizon, self.steps())
    }

    pub fn increment(&self, j: usize) -> &[T] {
        &self.increments[j * self.dim..(j + 1) * self.dim]
    }

    pub fn increments(&self) -> &[T] {
        &self.increments
    }

    /// `W(t_j)` for `j = 0..=steps`, row-major, with `W(0) = 0`.
    pub fn cumulative(&self) -> Vec<T> {
        let mut out = vec![T::zero(); (self.steps() + 1) * self.dim];
        for j in 0..self.steps() {
            for c in 0..self.dim {
                out[(j + 1) * self.dim + c] = out[j * self.dim + c] + self.increments[j * self.dim + c];
            }
        }
        out
    }

    /// Sums blocks of `factor` consecutive increments.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.steps().is_multiple_of(factor) {
            return Err(Error::GridMismatch(format!(
                "{} steps not divisible by {factor}",
                self.steps()
            )));
        }
        let mut increments = vec![T::zero(); self.increments.len() / factor];
        for j in 0..self.steps() {
            for c in 0..self.dim {
                increments[(j / factor) * self.dim + c] += self.increments[j * self.dim + c];
            }
        }
        Ok(Self {
            horizon: self.horizon,
            dim: self.dim,
            increments,
        })
    }

    /// `−W`, the antithetic path.
    pub fn negated(&self) -> Self {
        Self {
            horizon: self.horizon,
            dim: self.dim,
            increments: self.increments.iter().map(|&x| -x).collect(),
        }
    }
}
