use mfglab_core::benchmarks::{
    bounded_initial_points, bounded_model, lq_initial_measure, lq_model, lq_oracle, LqParams,
};
use mfglab_core::measures::DiscreteMeasure;

#[test]
fn oracle_is_stable_under_step_doubling() {
    let p = LqParams::default();
    let coarse = lq_oracle(&p, 2000).unwrap();
    let fine = lq_oracle(&p, 4000).unwrap();
    for (j, &t) in coarse.times.iter().enumerate() {
        let jf = 2 * j;
        assert!((fine.times[jf] - t).abs() < 1e-12);
        assert!((coarse.p[j] - fine.p[jf]).abs() < 1e-8);
        assert!((coarse.r[j] - fine.r[jf]).abs() < 1e-8);
        assert!((coarse.c[j] - fine.c[jf]).abs() < 1e-8);
        assert!((coarse.zbar[j] - fine.zbar[jf]).abs() < 1e-8);
    }
}

#[test]
fn pure_control_cost_needs_no_control() {
    let p = LqParams { q: 0.0, q_t: 0.0, ..LqParams::default() };
    let o = lq_oracle(&p, 1000).unwrap();
    for t in [0.0, 0.3, 1.0] {
        assert_eq!(o.gain_at(t), 0.0);
        assert_eq!(o.value_at(t, 1.7), 0.0);
    }
}

#[test]
fn oracle_rejects_coarse_grids() {
    assert!(lq_oracle(&LqParams::default(), 999).is_err());
}

#[test]
fn zero_parameters_give_a_zero_dynamics_model() {
    let model = lq_model::<f64>(&LqParams::zero()).unwrap();
    let nu = DiscreteMeasure::dirac(&[2.0]);
    let mut b = [1.0];
    model.drift(0.0, &[3.0], &nu, &[4.0], &mut b);
    let mut s = [1.0];
    model.diffusion(0.0, &[3.0], &nu, &mut s);
    assert_eq!((b[0], s[0]), (0.0, 0.0));
    assert_eq!(model.terminal_cost(&[3.0], &nu), 0.0);
    assert_eq!(model.gamma0, vec![0.0]);
}

#[test]
fn chain_costs_approach_the_oracle_value() {
    let p = LqParams::default();
    let o = lq_oracle(&p, 10_000).unwrap();
    let initials: Vec<f64> = lq_initial_measure::<f64>(&p, 4000).unwrap().atoms().to_vec();
    let err = |steps| {
        let c = o.euler_chain_costs(&initials, steps);
        (c.iter().sum::<f64>() / c.len() as f64 - o.mean_initial_value()).abs()
    };
    let (e1, e2) = (err(256), err(1024));
    assert!(e2 < e1);
    assert!(e2 < 2e-3, "error {e2}");
}

#[test]
fn initial_measure_is_a_gaussian_quantile_sample() {
    let p = LqParams::default();
    let m = lq_initial_measure::<f64>(&p, 1001).unwrap();
    assert!(m.is_uniform());
    assert!((m.mean()[0] - p.m0_mean).abs() < 1e-12);
    let var = m.second_moment() - p.m0_mean * p.m0_mean;
    assert!((var - p.m0_var).abs() < 5e-3);
}

#[test]
fn bounded_model_costs_stay_in_range() {
    let model = bounded_model::<f64>();
    let points = bounded_initial_points::<f64>(9);
    assert!(points.iter().all(|x| x[0].abs() <= 1.0));
    let nu = DiscreteMeasure::uniform(1, vec![-5.0, 0.2, 9.0]).unwrap();
    for i in 0..=40 {
        let x = -10.0 + i as f64 * 0.5;
        for g in [-1.0, -0.3, 0.0, 0.8, 1.0] {
            let f = model.running_cost(0.5, &[x], &nu, &[g]);
            assert!((0.0..=3.0).contains(&f));
        }
        assert!((0.0..=1.0).contains(&model.terminal_cost(&[x], &nu)));
    }
}
