use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::measures::{assignment, monotone_plan_1d, DiscreteMeasure, TransportPlan};
use crate::scalar::{sq_dist, Real};

/// Coupled initial conditions.
#[derive(Debug, Clone)]
pub struct Coupling<T> {
    /// `ξ̄_i`, one per sample point.
    pub points: Vec<Vec<T>>,
    /// Optimal plan between the sample's empirical measure (source index =
    /// sample index) and the target.
    pub plan: TransportPlan<T>,
    /// `∫|x − y|² dπ`, equal to `d₂(emp(sample), target)²`.
    pub cost: T,
}

/// Optimal coupling of a sample with a target law, realized pointwise.
///
/// Sample point `i` is sent to `ξ̄_i = φ(ξ_i, ϑ_i)`, a draw from the
/// conditional law of the plan's row `i` selected by `ϑ_i`. On the line the
/// plan is the monotone coupling with equal sample values ordered by `ϑ`; in
/// higher dimension the target must be uniform on as many atoms as there are
/// sample points and the plan is an optimal assignment.
pub fn optimal_coupling<T: Real>(sample: &[Vec<T>], target: &DiscreteMeasure<T>, theta: &[T]) -> Result<Coupling<T>> {
    let n = sample.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if theta.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: theta.len(),
        });
    }
    let d = target.dim();
    if let Some(x) = sample.iter().find(|x| x.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x.len(),
        });
    }
    let w = T::one() / T::of_usize(n);
    if d == 1 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            sample[a][0]
                .partial_cmp(&sample[b][0])
                .unwrap_or(Ordering::Equal)
                .then(theta[a].partial_cmp(&theta[b]).unwrap_or(Ordering::Equal))
                .then(a.cmp(&b))
        });
        let xs: Vec<T> = order.iter().map(|&i| sample[i][0]).collect();
        let sorted = monotone_plan_1d(&xs, &vec![w; n], target.atoms(), target.weights());
        let pairs: Vec<(usize, usize, T)> = sorted.pairs.iter().map(|&(s, j, m)| (order[s], j, m)).collect();
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for &(i, j, m) in &pairs {
            rows[i].push((j, m));
        }
        let points = rows
            .iter()
            .zip(theta)
            .map(|(row, &u)| {
                let mut acc = T::zero();
                let cut = u * w;
                let pick = row.iter().find(|(_, m)| {
                    acc += *m;
                    cut < acc
                });
                let j = pick.or(row.last()).map_or(0, |p| p.0);
                target.atom(j).to_vec()
            })
            .collect();
        let cost = sorted.cost;
        return Ok(Coupling {
            points,
            plan: TransportPlan { pairs, cost },
            cost,
        });
    }
    if target.len() != n || !target.is_uniform() {
        return Err(Error::IncompatibleSupports(format!(
            "dimension {d} needs a uniform target on {n} atoms, got {}",
            target.len()
        )));
    }
    let cost_matrix: Vec<T> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| sq_dist(&sample[i], target.atom(j)))
        .collect();
    let perm = assignment(n, &cost_matrix);
    let pairs: Vec<(usize, usize, T)> = perm.iter().enumerate().map(|(i, &j)| (i, j, w)).collect();
    let cost = pairs.iter().map(|&(i, j, m)| m * cost_matrix[i * n + j]).sum::<T>();
    Ok(Coupling {
        points: perm.iter().map(|&j| target.atom(j).to_vec()).collect(),
        plan: TransportPlan { pairs, cost },
        cost,
    })
}
