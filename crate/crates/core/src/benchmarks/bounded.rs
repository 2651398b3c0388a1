use crate::dynamics::{ActionSet, FnCoefficients, ModelSpec};
use crate::scalar::Real;

/// Scalar model with `Γ = [−1, 1]`, `b = γ`, `σ = 1`,
/// `f = γ² + min(x², 1) + min(m₂(ν), 1)` and `F = min(x², 1)`.
pub fn bounded_model<T: Real>() -> ModelSpec<T> {
    let one = T::one();
    let coefficients = FnCoefficients::scalar(
        |_, _, _, g| g,
        |_, _, _| T::one(),
        move |_, x, nu, g| g * g + (x * x).min(one) + nu.second_moment().min(one),
        move |x, _| (x * x).min(one),
    );
    ModelSpec::new("bounded", (1, 1, 1), one, ActionSet::interval(-one, one), coefficients)
        .expect("valid bounded model")
        .with_constants(T::of(2.0), T::of(2.0))
}

/// Initial states: quantiles `(i + ½)/n` of the uniform law on `[−1, 1]`.
pub fn bounded_initial_points<T: Real>(n: usize) -> Vec<Vec<T>> {
    (0..n)
        .map(|i| vec![T::of(2.0 * (i as f64 + 0.5) / n as f64 - 1.0)])
        .collect()
}
