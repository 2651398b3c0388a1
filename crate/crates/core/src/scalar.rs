//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating point type the solvers are written against.
///
/// Implemented for `f32` and `f64`. Literal constants go through [`Real::of`]
/// so the generic code can read like ordinary numerics.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Infallible for the implemented types.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    /// Lossy view as `f64`, used for reporting and for RNG plumbing.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance used when checking that probability weights sum to one.
    fn mass_tolerance(n: usize) -> Self {
        let eps = Self::epsilon() * Self::of_usize(16 * n.max(1));
        eps.max(Self::of(1e-12))
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Squared Euclidean distance between two equal-length slices.
#[inline]
pub fn sq_dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Squared Euclidean norm.
#[inline]
pub fn sq_norm<T: Real>(a: &[T]) -> T {
    a.iter().map(|&x| x * x).sum()
}

#[inline]
pub fn norm<T: Real>(a: &[T]) -> T {
    sq_norm(a).sqrt()
}

/// `max(a, b)` for the `∨` that appears in constants such as `T ∨ 1`.
#[inline]
pub fn vee<T: Real>(a: T, b: T) -> T {
    a.max(b)
}
