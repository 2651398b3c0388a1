use std::num::NonZeroUsize;

use gauss_quad::hermite::GaussHermite;

use crate::error::{Error, Result};
use crate::rng::{normal, substream, Purpose};
use crate::scalar::Real;

/// How the expectation over one slot's noise is computed inside the DP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseRule {
    /// Tensor Gauss–Hermite rule on the slot's total increment, which is then
    /// split evenly over the Euler substeps.
    GaussHermite { nodes: usize },
    /// Fixed-seed Monte Carlo over full substep increment paths.
    MonteCarlo { samples: usize, seed: u64 },
}

impl NoiseRule {
    /// Seven-node Gauss–Hermite up to two noise dimensions, 64 Monte Carlo
    /// draws beyond.
    pub fn default_for(noise_dim: usize) -> Self {
        if noise_dim <= 2 {
            NoiseRule::GaussHermite { nodes: 7 }
        } else {
            NoiseRule::MonteCarlo { samples: 64, seed: 0 }
        }
    }
}

/// Weighted increment scenarios for one DP stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageQuadrature<T> {
    pub weights: Vec<T>,
    /// Per scenario, `substeps × d1` Brownian increments, row-major.
    pub increments: Vec<T>,
    pub substeps: usize,
    pub noise_dim: usize,
}

impl<T: Real> StageQuadrature<T> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn scenario(&self, q: usize) -> &[T] {
        let w = self.substeps * self.noise_dim;
        &self.increments[q * w..(q + 1) * w]
    }
}

/// Standard normal Gauss–Hermite nodes and probability weights.
pub fn gauss_hermite_normal(nodes: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = NonZeroUsize::new(nodes).ok_or_else(|| Error::InvalidParameter("zero quadrature nodes".into()))?;
    let rule = GaussHermite::new(n);
    let scale = std::f64::consts::PI.sqrt();
    let (x, w): (Vec<f64>, Vec<f64>) = rule
        .iter()
        .map(|(x, w)| (x * std::f64::consts::SQRT_2, w / scale))
        .unzip();
    let total: f64 = w.iter().sum();
    Ok((x, w.into_iter().map(|v| v / total).collect()))
}

/// Scenarios for a stage of length `tau` made of `substeps` Euler steps.
pub fn stage_quadrature<T: Real>(rule: NoiseRule, noise_dim: usize, substeps: usize, tau: T) -> Result<StageQuadrature<T>> {
    if substeps == 0 || noise_dim == 0 {
        return Err(Error::InvalidParameter("substeps and noise dimension must be positive".into()));
    }
    match rule {
        NoiseRule::GaussHermite { nodes } => {
            let (x, w) = gauss_hermite_normal(nodes)?;
            let count = nodes.pow(noise_dim as u32);
            let split = tau.sqrt() / T::of_usize(substeps);
            let mut weights = Vec::with_capacity(count);
            let mut increments = Vec::with_capacity(count * substeps * noise_dim);
            let mut z = vec![T::zero(); noise_dim];
            for idx in 0..count {
                let mut rest = idx;
                let mut weight = 1.0;
                for zc in z.iter_mut() {
                    let i = rest % nodes;
                    rest /= nodes;
                    *zc = T::of(x[i]) * split;
                    weight *= w[i];
                }
                weights.push(T::of(weight));
                for _ in 0..substeps {
                    increments.extend_from_slice(&z);
                }
            }
            Ok(StageQuadrature {
                weights,
                increments,
                substeps,
                noise_dim,
            })
        }
        NoiseRule::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidParameter("zero Monte Carlo samples".into()));
            }
            let mut rng = substream(seed, Purpose::Quadrature, 0);
            let scale = (tau / T::of_usize(substeps)).sqrt();
            let increments = (0..samples * substeps * noise_dim)
                .map(|_| normal::<T, _>(&mut rng) * scale)
                .collect();
            Ok(StageQuadrature {
                weights: vec![T::one() / T::of_usize(samples); samples],
                increments,
                substeps,
                noise_dim,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments() {
        let (x, w) = gauss_hermite_normal(7).unwrap();
        let m = |p: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-14);
        assert!(m(1).abs() < 1e-14);
        assert!((m(2) - 1.0).abs() < 1e-13);
        assert!((m(4) - 3.0).abs() < 1e-12);
        assert!((m(6) - 15.0).abs() < 1e-11);
    }

    #[test]
    fn split_increments_sum_to_slot_increment() {
        let q = stage_quadrature::<f64>(NoiseRule::GaussHermite { nodes: 3 }, 1, 4, 0.25).unwrap();
        assert_eq!(q.len(), 3);
        let var: f64 = (0..3)
            .map(|i| q.weights[i] * q.scenario(i).iter().sum::<f64>().powi(2))
            .sum();
        assert!((var - 0.25).abs() < 1e-14);
    }
}
