use std::io::Write;

use crate::dynamics::{ActionSet, ModelSpec};
use crate::error::{Error, Result};
use crate::measures::lex_cmp;
use crate::scalar::{sq_norm, Real};

/// Finite action grid `Γ_{M,k}`: lattice points of `Γ` with norm at most `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGrid<T> {
    pub radius: T,
    pub level: u32,
    pub dim: usize,
    atoms: Vec<T>,
}

impl<T: Real> ControlGrid<T> {
    /// Grid from explicit atoms, in the given order.
    pub fn from_atoms(radius: T, level: u32, dim: usize, atoms: Vec<T>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if dim == 0 || !atoms.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: atoms.len(),
            });
        }
        Ok(Self {
            radius,
            level,
            dim,
            atoms,
        })
    }

    pub fn len(&self) -> usize {
        self.atoms.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atom(&self, a: usize) -> &[T] {
        &self.atoms[a * self.dim..(a + 1) * self.dim]
    }

    pub fn atoms(&self) -> &[T] {
        &self.atoms
    }

    /// True when every atom of `self` is an atom of `other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        (0..self.len()).all(|a| (0..other.len()).any(|b| self.atom(a) == other.atom(b)))
    }
}

/// Lattice spacing used at level `k`: the largest `2^{-p}` not above `1/k²`.
///
/// Dyadic spacings make the grids nested in `k`; the square keeps the action
/// discretization error below the time discretization error.
pub fn lattice_spacing(k: u32) -> f64 {
    let target = 1.0 / (k.max(1) as f64).powi(2);
    let mut s = 1.0;
    while s > target {
        s *= 0.5;
    }
    s
}

fn for_each_lattice_point(lo: &[i64], hi: &[i64], mut visit: impl FnMut(&[i64])) {
    let d = lo.len();
    if lo.iter().zip(hi).any(|(l, h)| l > h) {
        return;
    }
    let mut z = lo.to_vec();
    loop {
        visit(&z);
        let mut i = d;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if z[i] < hi[i] {
                z[i] += 1;
                for zz in z.iter_mut().skip(i + 1).zip(lo.iter().skip(i + 1)) {
                    *zz.0 = *zz.1;
                }
                break;
            }
        }
    }
}

/// Lattice of spacing [`lattice_spacing`]`(k)` intersected with `Γ` and the
/// closed ball of radius `M`, in lexicographic order. Closed sets with a
/// projection contribute the projections of nearby lattice points. Falls back
/// to `{γ₀}` when nothing survives.
pub fn build_control_grid<T: Real>(model: &ModelSpec<T>, radius: T, k: u32) -> Result<ControlGrid<T>> {
    if !(radius > T::zero()) || k == 0 {
        return Err(Error::InvalidParameter(format!("M = {radius}, k = {k}")));
    }
    let d2 = model.d2;
    let s = lattice_spacing(k);
    let m = radius.as_f64();
    let m2 = radius * radius;
    let mut atoms: Vec<Vec<T>> = Vec::new();
    match &model.action_set {
        ActionSet::CompactBox { lo, hi } => {
            let zlo: Vec<i64> = lo.iter().map(|l| (l.as_f64().max(-m) / s).ceil() as i64).collect();
            let zhi: Vec<i64> = hi.iter().map(|h| (h.as_f64().min(m) / s).floor() as i64).collect();
            for_each_lattice_point(&zlo, &zhi, |z| {
                let p: Vec<T> = z.iter().map(|&zi| T::of(zi as f64 * s)).collect();
                if sq_norm(&p) <= m2 && model.action_set.contains(&p) {
                    atoms.push(p);
                }
            });
        }
        ActionSet::Closed(set) => {
            let reach = if set.has_projection() { m + s * (d2 as f64).sqrt() } else { m };
            let zlo = vec![(-reach / s).ceil() as i64; d2];
            let zhi = vec![(reach / s).floor() as i64; d2];
            let mut q = vec![T::zero(); d2];
            for_each_lattice_point(&zlo, &zhi, |z| {
                let p: Vec<T> = z.iter().map(|&zi| T::of(zi as f64 * s)).collect();
                if set.contains(&p) && sq_norm(&p) <= m2 {
                    atoms.push(p);
                } else if set.project(&p, &mut q) && set.contains(&q) && sq_norm(&q) <= m2 {
                    atoms.push(q.clone());
                }
            });
        }
    }
    atoms.sort_by(|a, b| lex_cmp(a, b));
    let tol = T::of(1e-12);
    atoms.dedup_by(|a, b| a.iter().zip(b.iter()).all(|(x, y)| (*x - *y).abs() <= tol));
    if atoms.is_empty() {
        atoms.push(model.gamma0.clone());
    }
    ControlGrid::from_atoms(radius, k, d2, atoms.concat())
}

/// Truncated state box with a dyadic time grid of `2^level` slots.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGrid<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
    pub nodes: Vec<usize>,
    pub level: u32,
    pub horizon: T,
    spacing: Vec<T>,
    strides: Vec<usize>,
}

impl<T: Real> StateGrid<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>, nodes: Vec<usize>, level: u32, horizon: T) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != nodes.len() || lo.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: hi.len().min(nodes.len()),
            });
        }
        for ((&l, &h), &n) in lo.iter().zip(&hi).zip(&nodes) {
            if !(l.is_finite() && h.is_finite() && h > l) || n < 2 {
                return Err(Error::InvalidParameter(format!(
                    "state grid bounds [{l}, {h}] with {n} nodes"
                )));
            }
        }
        if level > 30 || !(horizon > T::zero()) {
            return Err(Error::InvalidParameter(format!("level {level}, horizon {horizon}")));
        }
        let spacing = lo
            .iter()
            .zip(&hi)
            .zip(&nodes)
            .map(|((&l, &h), &n)| (h - l) / T::of_usize(n - 1))
            .collect();
        let mut strides = vec![1usize; nodes.len()];
        for i in (0..nodes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * nodes[i + 1];
        }
        Ok(Self {
            lo,
            hi,
            nodes,
            level,
            horizon,
            spacing,
            strides,
        })
    }

    /// Uniform scalar grid on `[lo, hi]`.
    pub fn interval(lo: T, hi: T, nodes: usize, level: u32, horizon: T) -> Result<Self> {
        Self::new(vec![lo], vec![hi], vec![nodes], level, horizon)
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn slots(&self) -> usize {
        1usize << self.level
    }

    /// Slot length `h = T·2^{-k}`.
    pub fn h(&self) -> T {
        self.horizon / T::of_usize(self.slots())
    }

    pub fn node(&self, idx: usize, out: &mut [T]) {
        for i in 0..self.dim() {
            let c = (idx / self.strides[i]) % self.nodes[i];
            out[i] = if c + 1 == self.nodes[i] {
                self.hi[i]
            } else {
                self.lo[i] + self.spacing[i] * T::of_usize(c)
            };
        }
    }

    pub fn node_vec(&self, idx: usize) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        self.node(idx, &mut out);
        out
    }

    /// Nearest node, ties toward the lower index in every coordinate.
    pub fn nearest_node(&self, x: &[T]) -> usize {
        let half = T::of(0.5);
        (0..self.dim())
            .map(|i| {
                let u = (x[i] - self.lo[i]) / self.spacing[i];
                let c = (u - half).ceil().max(T::zero()).min(T::of_usize(self.nodes[i] - 1));
                c.to_usize().unwrap_or(0) * self.strides[i]
            })
            .sum()
    }

    /// Multilinear interpolation of nodal `values` at `x`, clamped to the box.
    /// The flag reports whether any coordinate had to be clamped.
    pub fn interpolate(&self, values: &[T], x: &[T]) -> (T, bool) {
        let d = self.dim();
        let mut base = 0usize;
        let mut frac = [T::zero(); 8];
        let mut clamped = false;
        let mut offs = [0usize; 8];
        debug_assert!(d <= 8, "state dimension above 8");
        for i in 0..d {
            let top = T::of_usize(self.nodes[i] - 1);
            let mut u = (x[i] - self.lo[i]) / self.spacing[i];
            if u < T::zero() {
                u = T::zero();
                clamped = true;
            } else if u > top {
                u = top;
                clamped = true;
            }
            let c = u.floor().min(top - T::one());
            let ci = c.to_usize().unwrap_or(0);
            frac[i] = u - c;
            base += ci * self.strides[i];
            offs[i] = self.strides[i];
        }
        let mut acc = T::zero();
        for corner in 0..(1usize << d) {
            let mut w = T::one();
            let mut idx = base;
            for i in 0..d {
                if corner >> i & 1 == 1 {
                    w *= frac[i];
                    idx += offs[i];
                } else {
                    w *= T::one() - frac[i];
                }
            }
            if w != T::zero() {
                acc += w * values[idx];
            }
        }
        (acc, clamped)
    }

    /// Writes `node,x1..xd`.
    pub fn write_nodes_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["node".to_string()];
        header.extend((1..=self.dim()).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        let mut x = vec![T::zero(); self.dim()];
        for n in 0..self.n_nodes() {
            self.node(n, &mut x);
            let mut row = vec![n.to_string()];
            row.extend(x.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
