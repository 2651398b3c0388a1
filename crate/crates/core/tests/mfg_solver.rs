mod common;

use std::sync::Arc;

use common::{mean_se, scalar_model, zero_model};
use mfglab_core::benchmarks::{lq_initial_measure, lq_model, lq_oracle, ou_model, LqParams};
use mfglab_core::dynamics::{
    simulate_n_player, ActionSet, ClosedSet, FnCoefficients, ModelSpec, NoisePath, StrategyProfile, StrategyRef,
};
use mfglab_core::measures::{empirical_measure, DiscreteMeasure, MeasureFlow};
use mfglab_core::mfg_solver::{
    backward_dp, build_control_grid, noise_feedback_strategy, solve_mfg, value_monotonicity_study, DpConfig, MfgParams,
    StateGrid,
};
use mfglab_core::relaxed_controls::covering_radius;
use mfglab_core::Error;
use proptest::prelude::*;

fn real_line_model(
    b: fn(f64, f64, &DiscreteMeasure<f64>, f64) -> f64,
    sigma: fn(f64, f64, &DiscreteMeasure<f64>) -> f64,
    f: fn(f64, f64, &DiscreteMeasure<f64>, f64) -> f64,
    terminal: fn(f64, &DiscreteMeasure<f64>) -> f64,
) -> ModelSpec<f64> {
    ModelSpec::new(
        "line",
        (1, 1, 1),
        1.0,
        ActionSet::Closed(ClosedSet::whole(1, 0.25, 1.0)),
        FnCoefficients::scalar(b, sigma, f, terminal),
    )
    .unwrap()
}

fn flat_flow(steps: usize) -> MeasureFlow<f64> {
    MeasureFlow::constant(1.0, steps, DiscreteMeasure::dirac(&[0.0])).unwrap()
}

fn atoms(model: &ModelSpec<f64>, m: f64, k: u32) -> Vec<f64> {
    build_control_grid(model, m, k).unwrap().atoms().to_vec()
}

#[test]
fn control_grid_examples() {
    let line = real_line_model(|_, _, _, _| 0.0, |_, _, _| 0.0, |_, _, _, _| 0.0, |_, _| 0.0);
    assert_eq!(atoms(&line, 1.0, 1), vec![-1.0, 0.0, 1.0]);
    let boxed = scalar_model(|_, _, _, _| 0.0, |_, _, _| 0.0, |_, _, _, _| 0.0, |_, _| 0.0, (0.0, 2.0));
    assert_eq!(atoms(&boxed, 1.0, 2), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
}

#[test]
fn circle_grid_covers_the_circle() {
    let zero2 = FnCoefficients::new(
        |_, _, _, _, out: &mut [f64]| out[0] = 0.0,
        |_, _, _, out: &mut [f64]| out[0] = 0.0,
        |_, _, _, g: &[f64]| g[0] * g[0] + g[1] * g[1],
        |_, _| 0.0,
    );
    let circle = ActionSet::Closed(ClosedSet::sphere(2, 1.0, 0.5, 2.0));
    let model = ModelSpec::new("circle", (1, 1, 2), 1.0, circle.clone(), zero2).unwrap();
    let grid = build_control_grid(&model, 1.0, 4).unwrap();
    assert!(grid.atoms().chunks(2).all(|g| circle.contains(g)));
    let samples: Vec<f64> = (0..1000)
        .flat_map(|i| {
            let a = i as f64 * std::f64::consts::TAU / 1000.0;
            [a.cos(), a.sin()]
        })
        .collect();
    assert!(covering_radius(grid.atoms(), &samples, 2) <= 0.25);
}

#[test]
fn empty_truncation_falls_back_to_gamma0() {
    let boxed = scalar_model(|_, _, _, _| 0.0, |_, _, _| 0.0, |_, _, _, _| 0.0, |_, _| 0.0, (0.6, 2.0));
    assert_eq!(atoms(&boxed, 0.5, 1), vec![0.6]);
}

proptest! {
    #[test]
    fn grids_are_nested(m in 1u32..4, k in 1u32..5, lo in -2.0..0.0f64, hi in 0.1..2.0f64) {
        let boxed = ModelSpec::new("box", (1, 1, 1), 1.0, ActionSet::interval(lo, hi),
            FnCoefficients::scalar(|_, _, _, _| 0.0, |_, _, _| 0.0, |_, _, _, _| 0.0, |_, _| 0.0)).unwrap();
        let line = real_line_model(|_, _, _, _| 0.0, |_, _, _| 0.0, |_, _, _, _| 0.0, |_, _| 0.0);
        for model in [&boxed, &line] {
            let g = build_control_grid(model, m as f64, k).unwrap();
            prop_assert!(g.is_subset_of(&build_control_grid(model, m as f64, k + 1).unwrap()));
            prop_assert!(g.is_subset_of(&build_control_grid(model, m as f64 + 1.0, k).unwrap()));
            prop_assert!(g.atoms().windows(2).all(|w| w[0] < w[1]));
            prop_assert!(g.atoms().iter().all(|a| a.abs() <= m as f64 && model.action_set.contains(&[*a])));
        }
    }
}

#[test]
fn zero_costs_give_zero_value_and_first_atom() {
    let model = real_line_model(|_, _, _, g| g, |_, _, _| 1.0, |_, _, _, _| 0.0, |_, _| 0.0);
    let sgrid = StateGrid::interval(-2.0, 2.0, 21, 3, 1.0).unwrap();
    let cgrid = build_control_grid(&model, 2.0, 3).unwrap();
    let dp = backward_dp(&model, &flat_flow(32), &cgrid, &sgrid, &DpConfig::default()).unwrap();
    assert!(dp.value.values().iter().all(|&v| v == 0.0));
    assert!(dp.policy.indices().iter().all(|&a| a == 0));
}

#[test]
fn terminal_slice_is_the_terminal_cost_and_values_are_nonnegative() {
    let p = LqParams::default();
    let model = lq_model::<f64>(&p).unwrap();
    let flow = lq_oracle(&p, 1000).unwrap().mean_flow::<f64>(32).unwrap();
    let sgrid = StateGrid::interval(-3.0, 3.0, 31, 3, 1.0).unwrap();
    let cgrid = build_control_grid(&model, 2.0, 3).unwrap();
    let dp = backward_dp(&model, &flow, &cgrid, &sgrid, &DpConfig::default()).unwrap();
    for n in 0..31 {
        let x = sgrid.node_vec(n);
        assert_eq!(dp.value.at(8, n), model.terminal_cost(&x, flow.at(32)));
    }
    assert!(dp.value.values().iter().all(|v| v.is_finite() && *v >= 0.0));
    assert!(dp.policy.indices().iter().all(|&a| (a as usize) < cgrid.len()));
}

#[test]
fn raising_the_terminal_cost_never_lowers_values() {
    let base = real_line_model(|_, x, _, g| g - 0.5 * x, |_, _, _| 0.8, |_, x, _, g| g * g + x * x, |x, _| x * x);
    let raised = real_line_model(|_, x, _, g| g - 0.5 * x, |_, _, _| 0.8, |_, x, _, g| g * g + x * x, |x, _| x * x + 1.0);
    let sgrid = StateGrid::interval(-2.0, 2.0, 41, 4, 1.0).unwrap();
    let cgrid = build_control_grid(&base, 1.0, 4).unwrap();
    let cfg = DpConfig::default().with_substeps(2);
    let a = backward_dp(&base, &flat_flow(32), &cgrid, &sgrid, &cfg).unwrap();
    let b = backward_dp(&raised, &flat_flow(32), &cgrid, &sgrid, &cfg).unwrap();
    assert!(a.value.values().iter().zip(b.value.values()).all(|(x, y)| y >= x));
    let again = backward_dp(&base, &flat_flow(32), &cgrid, &sgrid, &cfg).unwrap();
    assert_eq!(a.policy, again.policy);
    assert_eq!(a.value, again.value);
}

#[test]
fn non_finite_cost_names_slot_node_and_atom() {
    let model = real_line_model(
        |_, _, _, g| g,
        |_, _, _| 1.0,
        |_, x, _, g| if x > 1.0 && g > 0.5 { f64::NAN } else { g * g },
        |_, _| 0.0,
    );
    let sgrid = StateGrid::interval(-2.0, 2.0, 9, 2, 1.0).unwrap();
    let cgrid = build_control_grid(&model, 1.0, 2).unwrap();
    let err = backward_dp(&model, &flat_flow(16), &cgrid, &sgrid, &DpConfig::default()).unwrap_err();
    // slot 3 is solved first; node 7 sits at x = 1.5; atom 7 is γ = 0.75
    match err {
        Error::NonFiniteValue { slot, node, atom } => assert_eq!((slot, node, atom), (3, 7, 7)),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn flow_must_refine_the_substep_grid() {
    let model = zero_model();
    let sgrid = StateGrid::interval(-1.0, 1.0, 5, 3, 1.0).unwrap();
    let cgrid = build_control_grid(&model, 1.0, 3).unwrap();
    assert!(backward_dp(&model, &flat_flow(12), &cgrid, &sgrid, &DpConfig::default()).is_err());
}

#[test]
fn constant_policy_gives_constant_psi() {
    let model = real_line_model(|_, _, _, g| g, |_, _, _| 1.0, |_, _, _, g| (g - 1.0).powi(2), |_, _| 0.0);
    let sgrid = StateGrid::interval(-2.0, 2.0, 21, 3, 1.0).unwrap();
    let cgrid = build_control_grid(&model, 2.0, 3).unwrap();
    let flow = flat_flow(32);
    let dp = backward_dp(&model, &flow, &cgrid, &sgrid, &DpConfig::default()).unwrap();
    let psi = noise_feedback_strategy(&model, &flow, &cgrid, &sgrid, &dp).unwrap();
    for seed in 0..5 {
        let w = NoisePath::for_player(seed, 0, 1.0, 64, 1);
        let u = psi.controls(&[0.3], &w).unwrap();
        assert!(u.values().iter().all(|&g| g == 1.0));
    }
}

#[test]
fn frozen_state_reads_the_policy_at_its_node() {
    let model = real_line_model(|_, _, _, _| 0.0, |_, _, _| 1.0, |t, x, _, g| (g - (5.0 * t).sin() * x).powi(2), |_, _| 0.0);
    let sgrid = StateGrid::interval(-2.0, 2.0, 17, 3, 1.0).unwrap();
    let cgrid = build_control_grid(&model, 2.0, 3).unwrap();
    let flow = flat_flow(32);
    let dp = backward_dp(&model, &flow, &cgrid, &sgrid, &DpConfig::default()).unwrap();
    let psi = noise_feedback_strategy(&model, &flow, &cgrid, &sgrid, &dp).unwrap();
    let x0 = [0.9];
    let node = sgrid.nearest_node(&x0);
    let actions = psi.actions(&x0, &NoisePath::zero(1.0, 32, 1)).unwrap();
    let expected: Vec<usize> = (0..8).map(|j| dp.policy.at(j, node)).collect();
    assert_eq!(actions, expected);
    assert!(expected.windows(2).any(|w| w[0] != w[1]));
}

fn lq_psi(k: u32, nodes: usize, s: usize) -> (ModelSpec<f64>, mfglab_core::mfg_solver::NoiseFeedbackStrategy<f64>, f64) {
    let p = LqParams::default();
    let model = lq_model::<f64>(&p).unwrap();
    let flow = lq_oracle(&p, 1000).unwrap().mean_flow::<f64>((1 << k) * s).unwrap();
    let sgrid = StateGrid::interval(-3.0, 3.0, nodes, k, 1.0).unwrap();
    let cgrid = build_control_grid(&model, 3.0, k).unwrap();
    let dp = backward_dp(&model, &flow, &cgrid, &sgrid, &DpConfig::default().with_substeps(s)).unwrap();
    let init = lq_initial_measure::<f64>(&p, 512).unwrap();
    let vbar = init.iter().map(|(x, w)| w * dp.value.interpolate(&sgrid, 0, x)).sum();
    (model.clone(), noise_feedback_strategy(&model, &flow, &cgrid, &sgrid, &dp).unwrap(), vbar)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn psi_is_causal(seed in any::<u64>(), cut in 0usize..16, x0 in -1.5..1.5f64) {
        let (_, psi, _) = lq_psi(4, 41, 2);
        let a = NoisePath::<f64>::for_player(seed, 0, 1.0, 64, 1);
        let b = NoisePath::<f64>::for_player(seed.wrapping_add(1), 0, 1.0, 64, 1);
        let spliced: Vec<f64> = a.increments()[..cut * 4].iter().chain(&b.increments()[cut * 4..]).copied().collect();
        let c = NoisePath::new(1.0, 1, spliced).unwrap();
        let ua = psi.actions(&[x0], &a).unwrap();
        let uc = psi.actions(&[x0], &c).unwrap();
        prop_assert_eq!(&ua[..=cut], &uc[..=cut]);
    }
}

#[test]
fn psi_in_the_particle_system_matches_its_own_recursion() {
    let (model, psi, _) = lq_psi(3, 41, 2);
    let s: StrategyRef<f64> = Arc::new(psi.clone());
    let xi: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 * 0.4 - 1.0]).collect();
    let b = simulate_n_player(&model, &StrategyProfile::new(vec![s.clone(); 6]), &xi, 12, 32).unwrap();
    for i in 0..6 {
        let u = psi.controls(&xi[i], &b.noise[i]).unwrap();
        for j in 0..32 {
            assert_eq!(b.controls[i].slot(j), u.slot(j / 4));
        }
    }
    assert!(matches!(
        simulate_n_player(&model, &StrategyProfile::new(vec![s; 2]), &xi[..2], 12, 24),
        Err(Error::GridMismatch(_))
    ));
}

#[test]
fn policy_cost_does_not_beat_its_value() {
    let (model, psi, vbar) = lq_psi(4, 101, 2);
    let p = LqParams::default();
    let init = lq_initial_measure::<f64>(&p, 4000).unwrap();
    let costs: Vec<f64> = (0..4000)
        .map(|i| {
            let w = NoisePath::<f64>::for_player(31, i, 1.0, psi.fine_steps(), 1);
            psi.rollout(init.atom(i), w.increments()).unwrap().cost
        })
        .collect();
    let (m, se) = mean_se(&costs);
    assert!(m >= vbar - 3.0 * se, "cost {m} value {vbar} se {se}");
    assert_eq!(model.d, 1);
}

#[test]
fn monotonicity_study_trivial_and_saturated_cases() {
    let sgrid = StateGrid::interval(-2.0, 2.0, 21, 1, 1.0).unwrap();
    let probes = vec![vec![-1.0], vec![0.0], vec![0.5]];
    let zero = real_line_model(|_, _, _, g| g, |_, _, _| 1.0, |_, _, _, _| 0.0, |_, _| 0.0);
    let flow = flat_flow(16);
    let cfg = DpConfig::default().with_substeps(2);
    let t = value_monotonicity_study(&zero, &flow, &sgrid, &[1, 2, 3], &cfg, &probes).unwrap();
    assert!(t.rows.iter().all(|r| r.values.iter().all(|&v| v == 0.0)));
    assert!(t.monotone);

    let target = real_line_model(|_, _, _, _| 0.0, |_, _, _| 1.0, |_, _, _, g| (g - 1.0).powi(2), |x, _| x * x);
    let t = value_monotonicity_study(&target, &flow, &sgrid, &[1, 2, 3], &cfg, &probes).unwrap();
    for row in &t.rows[1..] {
        for (a, b) in row.values.iter().zip(&t.rows[0].values) {
            assert!((a - b).abs() <= 1e-9);
        }
    }
    assert!(value_monotonicity_study(&target, &flow, &sgrid, &[2, 1], &cfg, &probes).is_err());
}

fn small_params(level: u32, particles: usize) -> MfgParams<f64> {
    let sgrid = StateGrid::interval(-3.0, 3.0, 61, level, 1.0).unwrap();
    let mut params = MfgParams::new(sgrid, 3.0, particles, 17);
    params.dp = DpConfig::default().with_substeps(2);
    params
}

#[test]
fn decoupled_model_settles_after_one_pass() {
    let model = ou_model::<f64>();
    let init = lq_initial_measure::<f64>(&LqParams::default(), 256).unwrap();
    let mut params = small_params(3, 256);
    params.damping = 1.0;
    params.max_iters = 3;
    params.tol = 0.0;
    let sol = solve_mfg(&model, &init, &params).unwrap();
    assert_eq!(sol.iterations[1].residual, 0.0);
    assert!(sol.converged);

    params.damping = 0.5;
    params.max_iters = 6;
    params.tol = 0.0;
    let sol = solve_mfg(&model, &init, &params).unwrap();
    let r: Vec<f64> = sol.iterations.iter().map(|i| i.residual).collect();
    assert!(r.windows(2).skip(1).all(|w| w[1] <= w[0] + 0.02), "residuals {r:?}");
}

#[test]
fn controlled_brownian_particles_have_linear_second_moments() {
    let model = real_line_model(|_, _, _, _| 0.0, |_, _, _| 1.0, |_, _, _, g| g * g, |_, _| 0.0);
    let init = DiscreteMeasure::dirac(&[0.0]);
    let p = 2000;
    let mut params = small_params(3, p);
    params.max_iters = 2;
    let sol = solve_mfg(&model, &init, &params).unwrap();
    for (j, &t) in sol.flow.time_grid().iter().enumerate().skip(1) {
        let m2 = sol.flow.at(j).second_moment();
        let se = t * (2.0 / (p as f64 / 2.0)).sqrt();
        assert!((m2 - t).abs() <= 3.0 * se, "t = {t}: {m2}");
    }
}

#[test]
fn lq_fixed_point_tracks_the_oracle_mean() {
    let p = LqParams::default();
    let model = lq_model::<f64>(&p).unwrap();
    let oracle = lq_oracle(&p, 10_000).unwrap();
    let init = lq_initial_measure::<f64>(&p, 1024).unwrap();
    let mut params = small_params(4, 1024);
    params.damping = 1.0;
    params.tol = 1e-4;
    let sol = solve_mfg(&model, &init, &params).unwrap();
    assert!(sol.converged);
    let err = sol
        .flow
        .measures()
        .iter()
        .zip(sol.flow.time_grid())
        .map(|(m, &t)| (m.mean()[0] - oracle.zbar_at(t)).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-2, "mean error {err}");
    assert!(sol.optimality_gap >= -3.0 * sol.gap_std_error);
    for j in 0..sol.flow.len() {
        assert_eq!(sol.flow.at(j), &empirical_measure(&sol.particles.states_at(j)).unwrap());
    }
    assert_eq!(sol.particles.flow, sol.flow);
    let mut iterations = Vec::new();
    sol.write_iterations(&mut iterations).unwrap();
    assert_eq!(String::from_utf8(iterations).unwrap().lines().count(), sol.iterations.len());
}

#[test]
fn invalid_solver_parameters_are_rejected() {
    let model = ou_model::<f64>();
    let init = DiscreteMeasure::dirac(&[0.0]);
    let mut params = small_params(2, 8);
    params.damping = 0.0;
    assert!(matches!(solve_mfg(&model, &init, &params), Err(Error::InvalidParameter(_))));
    let params = small_params(2, 8);
    assert!(solve_mfg(&model, &DiscreteMeasure::dirac(&[0.0, 1.0]), &params).is_err());
}
