#![allow(dead_code)]

use mfglab_core::dynamics::{ActionSet, FnCoefficients, ModelSpec};
use mfglab_core::measures::DiscreteMeasure;

type Scalar2 = fn(f64, f64, &DiscreteMeasure<f64>, f64) -> f64;

/// Scalar model on `Γ = [lo, hi]` from plain function pointers.
pub fn scalar_model(
    b: Scalar2,
    sigma: fn(f64, f64, &DiscreteMeasure<f64>) -> f64,
    f: Scalar2,
    terminal: fn(f64, &DiscreteMeasure<f64>) -> f64,
    (lo, hi): (f64, f64),
) -> ModelSpec<f64> {
    ModelSpec::new(
        "test",
        (1, 1, 1),
        1.0,
        ActionSet::interval(lo, hi),
        FnCoefficients::scalar(b, sigma, f, terminal),
    )
    .unwrap()
}

pub fn zero_model() -> ModelSpec<f64> {
    scalar_model(|_, _, _, _| 0.0, |_, _, _| 0.0, |_, _, _, _| 0.0, |_, _| 0.0, (-1.0, 1.0))
}

/// Sample mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Smallest average squared displacement over all matchings of two
/// equal-size point lists.
pub fn permutation_oracle(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    fn rec(a: &[Vec<f64>], b: &[Vec<f64>], used: &mut Vec<bool>, i: usize, acc: f64, best: &mut f64) {
        if i == a.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                let c: f64 = a[i].iter().zip(&b[j]).map(|(x, y)| (x - y).powi(2)).sum();
                rec(a, b, used, i + 1, acc + c, best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(a, b, &mut vec![false; b.len()], 0, 0.0, &mut best);
    best / a.len() as f64
}
