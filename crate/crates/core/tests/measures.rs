mod common;

use approx::assert_abs_diff_eq;
use common::permutation_oracle;
use mfglab_core::measures::{
    empirical_measure, flow_distance, monotone_plan_1d, second_moment, transport_plan, uniform_grid, wasserstein2,
    DiscreteMeasure, MeasureFlow,
};
use proptest::prelude::*;

fn cloud(dim: usize, max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0..3.0f64, dim), 1..=max)
}

fn weighted(dim: usize, max: usize) -> impl Strategy<Value = DiscreteMeasure<f64>> {
    prop::collection::vec((prop::collection::vec(-3.0..3.0f64, dim), 0.05..1.0f64), 1..=max).prop_map(move |atoms| {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let (pts, w): (Vec<Vec<f64>>, Vec<f64>) = atoms.into_iter().map(|(x, w)| (x, w / total)).unzip();
        DiscreteMeasure::new(dim, pts.concat(), w).unwrap()
    })
}

fn check_plan(mu: &DiscreteMeasure<f64>, nu: &DiscreteMeasure<f64>, plan: &mfglab_core::measures::TransportPlan<f64>) {
    assert!(plan.marginal_error(mu.weights(), nu.weights()) <= 1e-10);
    let cost: f64 = plan
        .pairs
        .iter()
        .map(|&(i, j, m)| m * mu.atom(i).iter().zip(nu.atom(j)).map(|(x, y)| (x - y).powi(2)).sum::<f64>())
        .sum();
    assert!((cost - plan.cost).abs() <= 1e-10);
}

#[test]
fn two_clouds_in_the_plane() {
    let a = vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![2.0, -1.0], vec![-0.5, 1.5]];
    let b = vec![vec![0.3, 0.2], vec![1.8, -0.7], vec![-1.0, 1.0], vec![0.9, 1.1]];
    let (d, plan) = wasserstein2(&empirical_measure(&a).unwrap(), &empirical_measure(&b).unwrap()).unwrap();
    let oracle = permutation_oracle(&a, &b);
    assert_abs_diff_eq!(oracle, 0.2825, epsilon = 1e-12);
    assert_abs_diff_eq!(d * d, oracle, epsilon = 1e-9);
    assert_abs_diff_eq!(plan.cost, oracle, epsilon = 1e-9);
}

#[test]
fn second_moment_examples() {
    assert_eq!(second_moment(&DiscreteMeasure::dirac(&[0.0])), 0.0);
    assert_eq!(second_moment(&empirical_measure(&[vec![-1.0], vec![1.0]]).unwrap()), 1.0);
}

#[test]
fn empty_sample_is_rejected() {
    assert!(empirical_measure::<f64>(&[]).is_err());
}

#[test]
fn flow_distance_of_dirac_flows_and_grid_mismatch() {
    let a: Vec<Vec<f64>> = (0..5).map(|j| vec![j as f64 * 0.1]).collect();
    let b: Vec<Vec<f64>> = (0..5).map(|j| vec![1.0 - j as f64 * 0.3]).collect();
    let fa = MeasureFlow::dirac_path(1.0, &a).unwrap();
    let fb = MeasureFlow::dirac_path(1.0, &b).unwrap();
    assert_abs_diff_eq!(flow_distance(&fa, &fb).unwrap(), 1.0, epsilon = 1e-12);
    assert_eq!(flow_distance(&fa, &fa).unwrap(), 0.0);
    let fc = MeasureFlow::dirac_path(1.0, &a[..4]).unwrap();
    assert!(flow_distance(&fa, &fc).is_err());
}

#[test]
fn eight_particle_flows_use_per_slice_transport() {
    let grid = uniform_grid(1.0, 3);
    let slice = |shift: f64, j: usize| {
        let pts: Vec<Vec<f64>> = (0..8).map(|i| vec![(i * i) as f64 * 0.1 + shift * j as f64, i as f64 - shift]).collect();
        pts
    };
    let f1 = MeasureFlow::new(grid.clone(), (0..4).map(|j| empirical_measure(&slice(0.0, j)).unwrap()).collect()).unwrap();
    let f2 = MeasureFlow::new(grid, (0..4).map(|j| empirical_measure(&slice(0.4, j)).unwrap()).collect()).unwrap();
    let expected = (0..4)
        .map(|j| permutation_oracle(&slice(0.0, j), &slice(0.4, j)).sqrt())
        .fold(0.0, f64::max);
    assert_abs_diff_eq!(flow_distance(&f1, &f2).unwrap(), expected, epsilon = 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_permutation_oracle((a, b) in (1usize..=6, 1usize..=3).prop_flat_map(|(n, dim)| {
        let pts = prop::collection::vec(prop::collection::vec(-3.0..3.0f64, dim), n);
        (pts.clone(), pts)
    })) {
        let mu = empirical_measure(&a).unwrap();
        let nu = empirical_measure(&b).unwrap();
        let (d, plan) = wasserstein2(&mu, &nu).unwrap();
        prop_assert!((d * d - permutation_oracle(&a, &b)).abs() <= 1e-9);
        check_plan(&mu, &nu, &plan);
    }

    #[test]
    fn metric_axioms(mu in weighted(2, 8), nu in weighted(2, 8), rho in weighted(2, 8)) {
        let d = |a: &DiscreteMeasure<f64>, b: &DiscreteMeasure<f64>| wasserstein2(a, b).unwrap().0;
        prop_assert!(d(&mu, &mu) <= 1e-9);
        prop_assert!((d(&mu, &nu) - d(&nu, &mu)).abs() <= 1e-10);
        prop_assert!(d(&mu, &rho) <= d(&mu, &nu) + d(&nu, &rho) + 1e-9);
        let (_, plan) = wasserstein2(&mu, &nu).unwrap();
        check_plan(&mu, &nu, &plan);
    }

    #[test]
    fn empirical_measure_inequality(pairs in prop::collection::vec((prop::collection::vec(-3.0..3.0f64, 2), prop::collection::vec(-3.0..3.0f64, 2)), 1..=12)) {
        let (s, t): (Vec<Vec<f64>>, Vec<Vec<f64>>) = pairs.into_iter().unzip();
        let lhs = wasserstein2(&empirical_measure(&s).unwrap(), &empirical_measure(&t).unwrap()).unwrap().0;
        let rhs = (s.iter().zip(&t).map(|(a, b)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sum::<f64>() / s.len() as f64).sqrt();
        prop_assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn quantile_matching_equals_linear_program(a in cloud(1, 10), shift in -2.0..2.0f64) {
        let b: Vec<Vec<f64>> = a.iter().enumerate().map(|(i, x)| vec![x[0] * 0.7 + shift + (i as f64).sin()]).collect();
        let xs: Vec<f64> = a.iter().map(|x| x[0]).collect();
        let ys: Vec<f64> = b.iter().map(|x| x[0]).collect();
        let w = vec![1.0 / xs.len() as f64; xs.len()];
        let cost: Vec<f64> = xs.iter().flat_map(|x| ys.iter().map(move |y| (x - y).powi(2))).collect();
        let lp = transport_plan(&w, &w, &cost);
        let quantile = monotone_plan_1d(&xs, &w, &ys, &w);
        prop_assert!((lp.cost - quantile.cost).abs() <= 1e-10);
    }

    #[test]
    fn second_moment_is_distance_to_origin(mu in weighted(3, 10)) {
        let (d, _) = wasserstein2(&mu, &DiscreteMeasure::dirac(&[0.0, 0.0, 0.0])).unwrap();
        prop_assert!((second_moment(&mu) - d * d).abs() <= 1e-10);
    }
}
