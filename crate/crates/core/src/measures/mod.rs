//! Discrete probability measures, measure flows and exact Wasserstein-2 distances.

mod ot;

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{sq_dist, sq_norm, Real};

pub use ot::{assignment, monotone_plan_1d, transport_plan};

/// Weighted point cloud on ℝ^d.
///
/// Atoms are stored row-major in one buffer. The mean and second moment are
/// computed once at construction because model coefficients query them in
/// inner loops. Duplicate atoms are kept as separate entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure<T> {
    dim: usize,
    atoms: Vec<T>,
    weights: Vec<T>,
    mean: Vec<T>,
    second_moment: T,
}

impl<T: Real> DiscreteMeasure<T> {
    /// Builds a measure from flat row-major atoms and weights.
    pub fn new(dim: usize, atoms: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMeasure("dimension must be positive".into()));
        }
        if weights.is_empty() {
            return Err(Error::EmptySample);
        }
        if atoms.len() != dim * weights.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * weights.len(),
                found: atoms.len(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= T::zero())) {
            return Err(Error::InvalidMeasure(format!("negative or NaN weight {w}")));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > T::mass_tolerance(weights.len()) {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}")));
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite atom".into()));
        }
        Ok(Self::from_parts_unchecked(dim, atoms, weights))
    }

    fn from_parts_unchecked(dim: usize, atoms: Vec<T>, weights: Vec<T>) -> Self {
        let mut mean = vec![T::zero(); dim];
        let mut second_moment = T::zero();
        for (x, &w) in atoms.chunks_exact(dim).zip(&weights) {
            for (m, &xi) in mean.iter_mut().zip(x) {
                *m += w * xi;
            }
            second_moment += w * sq_norm(x);
        }
        Self {
            dim,
            atoms,
            weights,
            mean,
            second_moment,
        }
    }

    /// Uniform measure on the given flat atoms.
    pub fn uniform(dim: usize, atoms: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMeasure("dimension must be positive".into()));
        }
        if atoms.is_empty() {
            return Err(Error::EmptySample);
        }
        if !atoms.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim * (atoms.len() / dim + 1),
                found: atoms.len(),
            });
        }
        let n = atoms.len() / dim;
        Self::new(dim, atoms, vec![T::one() / T::of_usize(n); n])
    }

    pub fn dirac(point: &[T]) -> Self {
        Self::from_parts_unchecked(point.len(), point.to_vec(), vec![T::one()])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[T] {
        &self.atoms[i * self.dim..(i + 1) * self.dim]
    }

    pub fn atoms(&self) -> &[T] {
        &self.atoms
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[T], T)> + '_ {
        self.atoms.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    /// `Σ wᵢ|xᵢ|²`.
    pub fn second_moment(&self) -> T {
        self.second_moment
    }

    /// True when every weight equals `1/len` exactly.
    pub fn is_uniform(&self) -> bool {
        let w = T::one() / T::of_usize(self.len());
        self.weights.iter().all(|&x| x == w)
    }

    /// `(1 − λ)·self + λ·other`, by atom concatenation.
    pub fn mixture(&self, other: &Self, lambda: T) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        let keep = T::one() - lambda;
        let mut weights: Vec<T> = self.weights.iter().map(|&w| w * keep).collect();
        weights.extend(other.weights.iter().map(|&w| w * lambda));
        if lambda == T::one() {
            return Ok(other.clone());
        }
        if lambda == T::zero() {
            return Ok(self.clone());
        }
        Ok(Self::from_parts_unchecked(self.dim, atoms, weights))
    }

    /// `(1 − w)·self + w·δ_x`. Used by the deviating-player models.
    pub fn with_extra_atom(&self, x: &[T], w: T) -> Self {
        let mut atoms = Vec::with_capacity(self.atoms.len() + self.dim);
        atoms.extend_from_slice(&self.atoms);
        atoms.extend_from_slice(x);
        let keep = T::one() - w;
        let mut weights: Vec<T> = self.weights.iter().map(|&v| v * keep).collect();
        weights.push(w);
        Self::from_parts_unchecked(self.dim, atoms, weights)
    }

    /// Atom indices sorted lexicographically, ties by index.
    pub fn lexicographic_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| lex_cmp(self.atom(a), self.atom(b)).then(a.cmp(&b)));
        idx
    }

    /// Resamples to at most `n` equally weighted atoms.
    ///
    /// Atoms are sorted lexicographically and the cumulative weight is cut into
    /// `n` strata; stratum `s` picks the atom at quantile `(s + u_s)/n` where
    /// `u_s = offset(s)`. Measures that already have at most `n` atoms are
    /// returned unchanged.
    pub fn thin(&self, n: usize, offset: impl FnMut(usize) -> T) -> Self {
        if self.len() <= n || n == 0 {
            return self.clone();
        }
        let atoms = self.stratified(n, offset);
        Self::from_parts_unchecked(self.dim, atoms, vec![T::one() / T::of_usize(n); n])
    }

    /// `n` points at the quantiles `(i + ½)/n` of the lexicographic order.
    pub fn quantile_sample(&self, n: usize) -> Vec<Vec<T>> {
        self.stratified(n, |_| T::of(0.5))
            .chunks_exact(self.dim)
            .map(<[T]>::to_vec)
            .collect()
    }

    fn stratified(&self, n: usize, mut offset: impl FnMut(usize) -> T) -> Vec<T> {
        let order = self.lexicographic_order();
        let mut cumulative = Vec::with_capacity(order.len());
        let mut acc = T::zero();
        for &i in &order {
            acc += self.weights[i];
            cumulative.push(acc);
        }
        let total = acc;
        let nn = T::of_usize(n);
        let mut atoms = Vec::with_capacity(n * self.dim);
        let mut cursor = 0usize;
        for s in 0..n {
            let u = (T::of_usize(s) + offset(s)) / nn * total;
            while cursor + 1 < order.len() && cumulative[cursor] <= u {
                cursor += 1;
            }
            atoms.extend_from_slice(self.atom(order[cursor]));
        }
        atoms
    }

    /// Converts the scalar type.
    pub fn cast<U: Real>(&self) -> DiscreteMeasure<U> {
        DiscreteMeasure::from_parts_unchecked(
            self.dim,
            self.atoms.iter().map(|x| U::of(x.as_f64())).collect(),
            self.weights.iter().map(|x| U::of(x.as_f64())).collect(),
        )
    }

    /// Writes one row per atom: `weight,x1,...,xd`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["weight".to_string()];
        header.extend((1..=self.dim).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        for (x, wt) in self.iter() {
            let mut row = vec![wt.to_string()];
            row.extend(x.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn lex_cmp<T: Real>(a: &[T], b: &[T]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}

/// Uniform measure on a list of points. Duplicates stay separate atoms.
pub fn empirical_measure<T: Real>(points: &[Vec<T>]) -> Result<DiscreteMeasure<T>> {
    let first = points.first().ok_or(Error::EmptySample)?;
    let dim = first.len();
    let mut atoms = Vec::with_capacity(dim * points.len());
    for p in points {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.len(),
            });
        }
        atoms.extend_from_slice(p);
    }
    DiscreteMeasure::uniform(dim, atoms)
}

/// `Σ wᵢ|xᵢ|²`, which also equals `wasserstein2(mu, δ₀)²`.
pub fn second_moment<T: Real>(mu: &DiscreteMeasure<T>) -> T {
    mu.second_moment()
}

/// Coupling of two discrete measures.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan<T> {
    /// `(source index, target index, mass)`.
    pub pairs: Vec<(usize, usize, T)>,
    /// `Σ mass·|x_src − x_tgt|²`.
    pub cost: T,
}

impl<T: Real> TransportPlan<T> {
    /// Largest marginal violation against the two weight vectors.
    pub fn marginal_error(&self, source: &[T], target: &[T]) -> T {
        let mut a = vec![T::zero(); source.len()];
        let mut b = vec![T::zero(); target.len()];
        for &(i, j, m) in &self.pairs {
            a[i] += m;
            b[j] += m;
        }
        let ea = a.iter().zip(source).map(|(x, y)| (*x - *y).abs());
        let eb = b.iter().zip(target).map(|(x, y)| (*x - *y).abs());
        ea.chain(eb).fold(T::zero(), T::max)
    }
}

/// Exact Wasserstein-2 distance and an optimal plan.
///
/// One-dimensional problems use the monotone (quantile) coupling, which is
/// optimal for any weights. Equal-size uniform problems in higher dimension
/// are assignment problems. Everything else goes to a min-cost flow solver.
pub fn wasserstein2<T: Real>(
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
) -> Result<(T, TransportPlan<T>)> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    let plan = if mu.dim() == 1 {
        monotone_plan_1d(mu.atoms(), mu.weights(), nu.atoms(), nu.weights())
    } else if mu.len() == nu.len() && mu.is_uniform() && nu.is_uniform() {
        let n = mu.len();
        let cost: Vec<T> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| sq_dist(mu.atom(i), nu.atom(j)))
            .collect();
        let perm = assignment(n, &cost);
        let w = T::one() / T::of_usize(n);
        let pairs: Vec<_> = perm.iter().enumerate().map(|(i, &j)| (i, j, w)).collect();
        let total = pairs
            .iter()
            .map(|&(i, j, m)| m * cost[i * n + j])
            .sum::<T>();
        TransportPlan { pairs, cost: total }
    } else {
        let (n, m) = (mu.len(), nu.len());
        let cost: Vec<T> = (0..n)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .map(|(i, j)| sq_dist(mu.atom(i), nu.atom(j)))
            .collect();
        transport_plan(mu.weights(), nu.weights(), &cost)
    };
    Ok((plan.cost.max(T::zero()).sqrt(), plan))
}

/// Measures indexed by a strictly increasing time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureFlow<T> {
    time_grid: Vec<T>,
    measures: Vec<DiscreteMeasure<T>>,
}

impl<T: Real> MeasureFlow<T> {
    pub fn new(time_grid: Vec<T>, measures: Vec<DiscreteMeasure<T>>) -> Result<Self> {
        if time_grid.len() != measures.len() {
            return Err(Error::GridMismatch(format!(
                "{} times for {} measures",
                time_grid.len(),
                measures.len()
            )));
        }
        if measures.is_empty() {
            return Err(Error::EmptySample);
        }
        if time_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::GridMismatch("time grid not strictly increasing".into()));
        }
        let dim = measures[0].dim();
        if let Some(m) = measures.iter().find(|m| m.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: m.dim(),
            });
        }
        Ok(Self {
            time_grid,
            measures,
        })
    }

    /// The same measure at every point of a uniform grid with `steps` steps.
    pub fn constant(horizon: T, steps: usize, measure: DiscreteMeasure<T>) -> Result<Self> {
        let grid = uniform_grid(horizon, steps);
        Self::new(grid, vec![measure; steps + 1])
    }

    /// Dirac flow `t ↦ δ_{path(t)}` on a uniform grid.
    pub fn dirac_path(horizon: T, path: &[Vec<T>]) -> Result<Self> {
        let steps = path.len().checked_sub(1).ok_or(Error::EmptySample)?;
        let grid = uniform_grid(horizon, steps);
        Self::new(grid, path.iter().map(|p| DiscreteMeasure::dirac(p)).collect())
    }

    pub fn time_grid(&self) -> &[T] {
        &self.time_grid
    }

    pub fn measures(&self) -> &[DiscreteMeasure<T>] {
        &self.measures
    }

    pub fn at(&self, j: usize) -> &DiscreteMeasure<T> {
        &self.measures[j]
    }

    pub fn len(&self) -> usize {
        self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }

    /// Number of time steps, `len() − 1`.
    pub fn steps(&self) -> usize {
        self.measures.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.measures[0].dim()
    }

    pub fn horizon(&self) -> T {
        *self.time_grid.last().expect("nonempty flow")
    }

    /// Index stride needed to visit a coarser uniform grid of `steps` steps.
    pub fn stride_for(&self, steps: usize) -> Result<usize> {
        if steps == 0 || !self.steps().is_multiple_of(steps) {
            return Err(Error::GridMismatch(format!(
                "flow with {} steps does not refine a grid of {} steps",
                self.steps(),
                steps
            )));
        }
        Ok(self.steps() / steps)
    }

    /// Writes `j,t,weight,x1..xd`, one row per atom per time.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["j".to_string(), "t".into(), "weight".into()];
        header.extend((1..=self.dim()).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        for (j, (t, m)) in self.time_grid.iter().zip(&self.measures).enumerate() {
            for (x, wt) in m.iter() {
                let mut row = vec![j.to_string(), t.to_string(), wt.to_string()];
                row.extend(x.iter().map(|v| v.to_string()));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `t_j = j·T/J`, with the last point set to `T` exactly.
pub fn uniform_grid<T: Real>(horizon: T, steps: usize) -> Vec<T> {
    let dt = horizon / T::of_usize(steps.max(1));
    let mut grid: Vec<T> = (0..=steps).map(|j| dt * T::of_usize(j)).collect();
    if let Some(last) = grid.last_mut() {
        *last = horizon;
    }
    grid
}

/// Max over grid points of the per-time Wasserstein-2 distance, a grid proxy
/// for `sup_t d₂(f1(t), f2(t))`.
pub fn flow_distance<T: Real>(f1: &MeasureFlow<T>, f2: &MeasureFlow<T>) -> Result<T> {
    if f1.len() != f2.len() {
        return Err(Error::GridMismatch(format!(
            "{} versus {} grid points",
            f1.len(),
            f2.len()
        )));
    }
    let tol = T::of(1e-9) * f1.horizon().abs().max(T::one());
    if f1
        .time_grid()
        .iter()
        .zip(f2.time_grid())
        .any(|(a, b)| (*a - *b).abs() > tol)
    {
        return Err(Error::GridMismatch("time grids differ".into()));
    }
    let distances: Vec<T> = f1
        .measures()
        .par_iter()
        .zip(f2.measures().par_iter())
        .map(|(a, b)| wasserstein2(a, b).map(|(d, _)| d))
        .collect::<Result<_>>()?;
    Ok(distances.into_iter().fold(T::zero(), T::max))
}

/// Per-time Wasserstein-2 distances between two flows.
pub fn flow_distances<T: Real>(f1: &MeasureFlow<T>, f2: &MeasureFlow<T>) -> Result<Vec<T>> {
    if f1.len() != f2.len() {
        return Err(Error::GridMismatch(format!(
            "{} versus {} grid points",
            f1.len(),
            f2.len()
        )));
    }
    f1.measures()
        .par_iter()
        .zip(f2.measures().par_iter())
        .map(|(a, b)| wasserstein2(a, b).map(|(d, _)| d))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empirical_measure_examples() {
        let m = empirical_measure(&[vec![2.5f64]]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.weights(), &[1.0]);

        let m = empirical_measure(&[vec![0.0f64], vec![0.0]]).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.weights(), &[0.5, 0.5]);
        assert_eq!(m.second_moment(), 0.0);

        let m = empirical_measure(&[vec![-1.0f64], vec![1.0]]).unwrap();
        assert_eq!(second_moment(&m), 1.0);

        assert!(matches!(
            empirical_measure::<f64>(&[]),
            Err(Error::EmptySample)
        ));
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(DiscreteMeasure::new(1, vec![0.0f64, 1.0], vec![0.5, 0.6]).is_err());
        assert!(DiscreteMeasure::new(1, vec![0.0f64, 1.0], vec![1.5, -0.5]).is_err());
        assert!(DiscreteMeasure::new(2, vec![0.0f64, 1.0], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn dirac_distances() {
        let a = DiscreteMeasure::dirac(&[0.0f64]);
        assert_eq!(wasserstein2(&a, &a).unwrap().0, 0.0);
        let x = DiscreteMeasure::dirac(&[1.0f64, 2.0]);
        let y = DiscreteMeasure::dirac(&[4.0f64, 6.0]);
        assert!((wasserstein2(&x, &y).unwrap().0 - 5.0).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = DiscreteMeasure::dirac(&[0.0f64]);
        let b = DiscreteMeasure::dirac(&[0.0f64, 0.0]);
        assert!(wasserstein2(&a, &b).is_err());
    }

    #[test]
    fn uniform_two_point_second_moment() {
        let m = empirical_measure(&[vec![-1.0f64], vec![1.0]]).unwrap();
        let d0 = DiscreteMeasure::dirac(&[0.0]);
        let (d, _) = wasserstein2(&m, &d0).unwrap();
        assert!((d * d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dirac_flows() {
        let a: Vec<Vec<f64>> = vec![vec![0.0], vec![1.0], vec![3.0]];
        let b: Vec<Vec<f64>> = vec![vec![0.5], vec![1.0], vec![1.0]];
        let fa = MeasureFlow::dirac_path(1.0, &a).unwrap();
        let fb = MeasureFlow::dirac_path(1.0, &b).unwrap();
        assert_eq!(flow_distance(&fa, &fa).unwrap(), 0.0);
        assert!((flow_distance(&fa, &fb).unwrap() - 2.0).abs() < 1e-15);
        let fc = MeasureFlow::dirac_path(1.0, &a[..2]).unwrap();
        assert!(flow_distance(&fa, &fc).is_err());
    }

    #[test]
    fn thinning_keeps_small_measures() {
        let m = empirical_measure(&[vec![3.0f64], vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(m.thin(3, |_| 0.5), m);
        let t = m.thin(2, |_| 0.5);
        assert_eq!(t.len(), 2);
        assert_eq!(t.atoms(), &[1.0, 3.0]);
    }

    #[test]
    fn mixture_weights() {
        let a = DiscreteMeasure::dirac(&[0.0f64]);
        let b = DiscreteMeasure::dirac(&[2.0f64]);
        let m = a.mixture(&b, 0.25).unwrap();
        assert_eq!(m.weights(), &[0.75, 0.25]);
        assert_eq!(m.mean(), &[0.5]);
    }

    #[test]
    fn extra_atom_statistics_match_rebuild() {
        let a = empirical_measure(&[vec![1.0f64, 0.0], vec![0.0, 2.0]]).unwrap();
        let b = a.with_extra_atom(&[3.0, 3.0], 0.2);
        let rebuilt = DiscreteMeasure::new(2, b.atoms().to_vec(), b.weights().to_vec()).unwrap();
        assert_eq!(b, rebuilt);
    }
}
