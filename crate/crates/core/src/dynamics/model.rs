use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::scalar::{norm, Real};

/// Coefficients `b`, `σ`, `f`, `F` of a mean-field game.
///
/// The measure argument is the current population law. Implementations must be
/// pure functions of their arguments.
pub trait Coefficients<T: Real>: Send + Sync {
    /// Writes `b(t, x, ν, γ) ∈ ℝ^d` into `out`.
    fn drift(&self, t: T, x: &[T], nu: &DiscreteMeasure<T>, gamma: &[T], out: &mut [T]);

    /// Writes `σ(t, x, ν)` as a row-major `d × d1` matrix into `out`.
    fn diffusion(&self, t: T, x: &[T], nu: &DiscreteMeasure<T>, out: &mut [T]);

    fn running_cost(&self, t: T, x: &[T], nu: &DiscreteMeasure<T>, gamma: &[T]) -> T;

    fn terminal_cost(&self, x: &[T], nu: &DiscreteMeasure<T>) -> T;
}

type DriftFn<T> = dyn Fn(T, &[T], &DiscreteMeasure<T>, &[T], &mut [T]) + Send + Sync;
type DiffusionFn<T> = dyn Fn(T, &[T], &DiscreteMeasure<T>, &mut [T]) + Send + Sync;
type RunningFn<T> = dyn Fn(T, &[T], &DiscreteMeasure<T>, &[T]) -> T + Send + Sync;
type TerminalFn<T> = dyn Fn(&[T], &DiscreteMeasure<T>) -> T + Send + Sync;

/// Coefficients assembled from closures.
pub struct FnCoefficients<T> {
    drift: Box<DriftFn<T>>,
    diffusion: Box<DiffusionFn<T>>,
    running: Box<RunningFn<T>>,
    terminal: Box<TerminalFn<T>>,
}

impl<T: Real> FnCoefficients<T> {
    pub fn new(
        drift: impl Fn(T, &[T], &DiscreteMeasure<T>, &[T], &mut [T]) + Send + Sync + 'static,
        diffusion: impl Fn(T, &[T], &DiscreteMeasure<T>, &mut [T]) + Send + Sync + 'static,
        running: impl Fn(T, &[T], &DiscreteMeasure<T>, &[T]) -> T + Send + Sync + 'static,
        terminal: impl Fn(&[T], &DiscreteMeasure<T>) -> T + Send + Sync + 'static,
    ) -> Self {
        Self {
            drift: Box::new(drift),
            diffusion: Box::new(diffusion),
            running: Box::new(running),
            terminal: Box::new(terminal),
        }
    }

    /// Scalar model (`d = d1 = d2 = 1`) from scalar closures.
    pub fn scalar(
        b: impl Fn(T, T, &DiscreteMeasure<T>, T) -> T + Send + Sync + 'static,
        sigma: impl Fn(T, T, &DiscreteMeasure<T>) -> T + Send + Sync + 'static,
        f: impl Fn(T, T, &DiscreteMeasure<T>, T) -> T + Send + Sync + 'static,
        terminal: impl Fn(T, &DiscreteMeasure<T>) -> T + Send + Sync + 'static,
    ) -> Self {
        Self::new(
            move |t, x, nu, g, out| out[0] = b(t, x[0], nu, g[0]),
            move |t, x, nu, out| out[0] = sigma(t, x[0], nu),
            move |t, x, nu, g| f(t, x[0], nu, g[0]),
            move |x, nu| terminal(x[0], nu),
        )
    }
}

impl<T: Real> Coefficients<T> for FnCoefficients<T> {
    fn drift(&self, t: T, x: &[T], nu: &DiscreteMeasure<T>, gamma: &[T], out: &mut [T]) {
        (self.drift)(t, x, nu, gamma, out)
    }

    fn diffusion(&self, t: T, x: &[T], nu: &DiscreteMeasure<T>, out: &mut [T]) {
        (self.diffusion)(t, x, nu, out)
    }

    fn running_cost(&self, t: T, x: &[T], nu: &DiscreteMeasure<T>, gamma: &[T]) -> T {
        (self.running)(t, x, nu, gamma)
    }

    fn terminal_cost(&self, x: &[T], nu: &DiscreteMeasure<T>) -> T {
        (self.terminal)(x, nu)
    }
}

type Membership<T> = Arc<dyn Fn(&[T]) -> bool + Send + Sync>;
type Projection<T> = Arc<dyn Fn(&[T], &mut [T]) + Send + Sync>;

/// Closed, possibly unbounded action set with coercivity data.
///
/// Costs must satisfy `f ≥ c0·|γ|²` for `γ` outside the compact part
/// `Γ₀ = Γ ∩ {|γ| ≤ r0}`. An optional projection lets grid construction
/// place lattice points onto lower-dimensional sets such as spheres.
#[derive(Clone)]
pub struct ClosedSet<T> {
    pub dim: usize,
    pub c0: T,
    pub r0: T,
    membership: Membership<T>,
    projection: Option<Projection<T>>,
    tolerance: T,
}

impl<T: Real> ClosedSet<T> {
    pub fn new(
        dim: usize,
        c0: T,
        r0: T,
        membership: impl Fn(&[T]) -> bool + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            c0,
            r0,
            membership: Arc::new(membership),
            projection: None,
            tolerance: T::zero(),
        }
    }

    /// All of `ℝ^dim`.
    pub fn whole(dim: usize, c0: T, r0: T) -> Self {
        let mut set = Self::new(dim, c0, r0, |_| true);
        set.projection = Some(Arc::new(|x: &[T], out: &mut [T]| out.copy_from_slice(x)));
        set
    }

    /// Euclidean sphere of the given radius around the origin.
    pub fn sphere(dim: usize, radius: T, c0: T, r0: T) -> Self {
        let tol = T::of(1e-9) * radius.max(T::one());
        let mut set = Self::new(dim, c0, r0, move |x| (norm(x) - radius).abs() <= tol);
        set.tolerance = tol;
        set.projection = Some(Arc::new(move |x: &[T], out: &mut [T]| {
            let n = norm(x);
            if n > T::zero() {
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = v * radius / n;
                }
            } else {
                out.iter_mut().for_each(|o| *o = T::zero());
                out[0] = radius;
            }
        }));
        set
    }

    pub fn with_projection(
        mut self,
        projection: impl Fn(&[T], &mut [T]) + Send + Sync + 'static,
    ) -> Self {
        self.projection = Some(Arc::new(projection));
        self
    }

    pub fn contains(&self, gamma: &[T]) -> bool {
        gamma.len() == self.dim && (self.membership)(gamma)
    }

    pub fn project(&self, gamma: &[T], out: &mut [T]) -> bool {
        match &self.projection {
            Some(p) => {
                p(gamma, out);
                true
            }
            None => false,
        }
    }

    pub fn has_projection(&self) -> bool {
        self.projection.is_some()
    }
}

impl<T: Real> fmt::Debug for ClosedSet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClosedSet")
            .field("dim", &self.dim)
            .field("c0", &self.c0)
            .field("r0", &self.r0)
            .field("projection", &self.projection.is_some())
            .field("tolerance", &self.tolerance)
            .finish()
    }
}

/// The action space `Γ ⊂ ℝ^{d2}`.
#[derive(Clone, Debug)]
pub enum ActionSet<T: Real> {
    CompactBox { lo: Vec<T>, hi: Vec<T> },
    Closed(ClosedSet<T>),
}

impl<T: Real> ActionSet<T> {
    pub fn interval(lo: T, hi: T) -> Self {
        ActionSet::CompactBox {
            lo: vec![lo],
            hi: vec![hi],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ActionSet::CompactBox { lo, .. } => lo.len(),
            ActionSet::Closed(s) => s.dim,
        }
    }

    pub fn contains(&self, gamma: &[T]) -> bool {
        match self {
            ActionSet::CompactBox { lo, hi } => {
                gamma.len() == lo.len()
                    && gamma
                        .iter()
                        .zip(lo.iter().zip(hi))
                        .all(|(&g, (&l, &h))| g >= l && g <= h)
            }
            ActionSet::Closed(s) => s.contains(gamma),
        }
    }

    pub fn is_compact(&self) -> bool {
        matches!(self, ActionSet::CompactBox { .. })
    }

    /// Point of minimal norm when it can be determined without search.
    pub fn minimal_norm_point(&self) -> Option<Vec<T>> {
        let zero = vec![T::zero(); self.dim()];
        match self {
            ActionSet::CompactBox { lo, hi } => Some(
                lo.iter()
                    .zip(hi)
                    .map(|(&l, &h)| T::zero().max(l).min(h))
                    .collect(),
            ),
            ActionSet::Closed(s) if s.contains(&zero) => Some(zero),
            ActionSet::Closed(s) => {
                let mut out = zero.clone();
                (s.project(&zero, &mut out) && s.contains(&out)).then_some(out)
            }
        }
    }
}

/// A mean-field game model: dimensions, horizon, coefficients and the
/// constants they are declared to satisfy.
#[derive(Clone)]
pub struct ModelSpec<T: Real> {
    pub name: String,
    /// State dimension `d`.
    pub d: usize,
    /// Noise dimension `d1`.
    pub d1: usize,
    /// Action dimension `d2`.
    pub d2: usize,
    pub horizon: T,
    /// Growth constant `K`.
    pub growth: T,
    /// Lipschitz constant `L`.
    pub lipschitz: T,
    pub action_set: ActionSet<T>,
    pub gamma0: Vec<T>,
    pub delta0: T,
    pub coefficients: Arc<dyn Coefficients<T>>,
}

impl<T: Real> fmt::Debug for ModelSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("d", &self.d)
            .field("d1", &self.d1)
            .field("d2", &self.d2)
            .field("horizon", &self.horizon)
            .field("growth", &self.growth)
            .field("lipschitz", &self.lipschitz)
            .field("action_set", &self.action_set)
            .field("gamma0", &self.gamma0)
            .field("delta0", &self.delta0)
            .finish()
    }
}

impl<T: Real> ModelSpec<T> {
    /// Model with `K = L = 1`, the minimal-norm fallback action and
    /// `δ₀ = min(½, T)`.
    pub fn new(
        name: impl Into<String>,
        (d, d1, d2): (usize, usize, usize),
        horizon: T,
        action_set: ActionSet<T>,
        coefficients: impl Coefficients<T> + 'static,
    ) -> Result<Self> {
        if d == 0 || d1 == 0 || d2 == 0 {
            return Err(Error::InvalidParameter("dimensions must be positive".into()));
        }
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::InvalidParameter(format!("horizon {horizon}")));
        }
        if action_set.dim() != d2 {
            return Err(Error::DimensionMismatch {
                expected: d2,
                found: action_set.dim(),
            });
        }
        let gamma0 = action_set
            .minimal_norm_point()
            .ok_or(Error::FallbackOutsideSet)?;
        Ok(Self {
            name: name.into(),
            d,
            d1,
            d2,
            horizon,
            growth: T::one(),
            lipschitz: T::one(),
            action_set,
            gamma0,
            delta0: T::of(0.5).min(horizon.min(T::one())),
            coefficients: Arc::new(coefficients),
        })
    }

    pub fn with_constants(mut self, growth: T, lipschitz: T) -> Self {
        self.growth = growth;
        self.lipschitz = lipschitz;
        self
    }

    pub fn with_gamma0(mut self, gamma0: Vec<T>) -> Result<Self> {
        if !self.action_set.contains(&gamma0) {
            return Err(Error::FallbackOutsideSet);
        }
        self.gamma0 = gamma0;
        Ok(self)
    }

    pub fn with_delta0(mut self, delta0: T) -> Result<Self> {
        if !(delta0 > T::zero() && delta0 <= self.horizon.min(T::one())) {
            return Err(Error::InvalidParameter(format!(
                "delta0 = {delta0} outside (0, min(1, T)]"
            )));
        }
        self.delta0 = delta0;
        Ok(self)
    }

    /// Scratch-free drift evaluation.
    #[inline]
    pub fn drift(&self, t: T, x: &[T], nu: &DiscreteMeasure<T>, gamma: &[T], out: &mut [T]) {
        self.coefficients.drift(t, x, nu, gamma, out)
    }

    #[inline]
    pub fn diffusion(&self, t: T, x: &[T], nu: &DiscreteMeasure<T>, out: &mut [T]) {
        self.coefficients.diffusion(t, x, nu, out)
    }

    #[inline]
    pub fn running_cost(&self, t: T, x: &[T], nu: &DiscreteMeasure<T>, gamma: &[T]) -> T {
        self.coefficients.running_cost(t, x, nu, gamma)
    }

    #[inline]
    pub fn terminal_cost(&self, x: &[T], nu: &DiscreteMeasure<T>) -> T {
        self.coefficients.terminal_cost(x, nu)
    }

    /// One Euler–Maruyama step `x ← x + b·dt + σ·dw` in place.
    ///
    /// `scratch` must hold at least `d + d·d1` entries.
    #[allow(clippy::too_many_arguments)]
    #[inline]
    pub fn euler_step(
        &self,
        t: T,
        x: &mut [T],
        nu: &DiscreteMeasure<T>,
        gamma: &[T],
        dt: T,
        dw: &[T],
        scratch: &mut [T],
    ) {
        let (b, sig) = scratch.split_at_mut(self.d);
        self.drift(t, x, nu, gamma, b);
        self.diffusion(t, x, nu, &mut sig[..self.d * self.d1]);
        for r in 0..self.d {
            let noise: T = (0..self.d1).map(|c| sig[r * self.d1 + c] * dw[c]).sum();
            x[r] += b[r] * dt + noise;
        }
    }

    /// Scratch length required by [`ModelSpec::euler_step`].
    pub fn scratch_len(&self) -> usize {
        self.d + self.d * self.d1
    }
}
