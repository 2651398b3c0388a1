use mfglab_core::benchmarks::{lq_model, LqParams};
use mfglab_core::dynamics::{ActionSet, ClosedSet};
use mfglab_core::measures::DiscreteMeasure;
use mfglab_core::mfg_solver::build_control_grid;
use mfglab_core::relaxed_controls::{chattering_project, covering_radius, lift, truncate, RelaxedControlPath, StepControl};
use proptest::prelude::*;

fn plane() -> ActionSet<f64> {
    ActionSet::Closed(ClosedSet::whole(2, 0.25, 1.0))
}

#[test]
fn sixteen_slot_second_moment_is_direct_sum() {
    let values: Vec<f64> = (0..32).map(|i| ((i * 7919) % 13) as f64 / 5.0 - 1.2).collect();
    let u = StepControl::new(2.0, 2, values.clone()).unwrap();
    let direct: f64 = values.iter().map(|v| v * v).sum::<f64>() * (2.0 / 16.0);
    assert!((lift(&u).second_moment() - direct).abs() <= 1e-12);
}

#[test]
fn truncated_slot_mass_goes_to_the_fallback() {
    let slot = DiscreteMeasure::new(1, vec![0.5, 3.0], vec![0.6, 0.4]).unwrap();
    let r = RelaxedControlPath::new(1.0, vec![slot]).unwrap();
    let set = ActionSet::Closed(ClosedSet::whole(1, 0.25, 1.0));
    let t = truncate(&r, 1.0, &[0.0], &set).unwrap();
    let s = t.slot(0);
    let mass_at = |x: f64| s.iter().filter(|(a, _)| a[0] == x).map(|(_, w)| w).sum::<f64>();
    assert!((mass_at(0.5) - 0.6).abs() < 1e-15);
    assert!((mass_at(0.0) - 0.4).abs() < 1e-15);
    assert_eq!(mass_at(3.0), 0.0);
}

proptest! {
    #[test]
    fn lift_preserves_energy_and_mass(values in prop::collection::vec(-4.0..4.0f64, 2..=64), horizon in 0.1..3.0f64) {
        let values = if values.len() % 2 == 1 { values[1..].to_vec() } else { values };
        let u = StepControl::new(horizon, 2, values).unwrap();
        let r = lift(&u);
        prop_assert!((r.second_moment() - u.energy()).abs() <= 1e-12 * (1.0 + u.energy()));
        for j in 0..=r.n_slots() {
            prop_assert!((r.mass_up_to(j) - j as f64 * r.dt()).abs() <= 1e-12);
        }
        u.check_in(&plane()).unwrap();
    }

    #[test]
    fn truncation_keeps_mass_and_never_raises_the_moment(
        slots in prop::collection::vec(prop::collection::vec((-3.0..3.0f64, 0.05..1.0f64), 1..5), 1..8),
        radius in 0.1..3.0f64,
    ) {
        let set = ActionSet::Closed(ClosedSet::whole(1, 0.25, 1.0));
        let measures: Vec<DiscreteMeasure<f64>> = slots
            .iter()
            .map(|s| {
                let total: f64 = s.iter().map(|a| a.1).sum();
                DiscreteMeasure::new(1, s.iter().map(|a| a.0).collect(), s.iter().map(|a| a.1 / total).collect()).unwrap()
            })
            .collect();
        let r = RelaxedControlPath::new(1.0, measures).unwrap();
        let t = truncate(&r, radius, &[0.0], &set).unwrap();
        prop_assert!(t.second_moment() <= r.second_moment() + 1e-12);
        for s in t.slots() {
            prop_assert!((s.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(s.iter().all(|(a, w)| w == 0.0 || a[0].abs() <= radius));
        }
    }

    #[test]
    fn chattering_moves_values_by_at_most_the_covering_radius(
        values in prop::collection::vec(-2.0..2.0f64, 16),
        k in 1u32..=4,
    ) {
        let model = lq_model::<f64>(&LqParams::default()).unwrap();
        let grid = build_control_grid(&model, 2.0, k).unwrap();
        let samples: Vec<f64> = (0..=4096).map(|i| -2.0 + i as f64 / 1024.0).collect();
        let radius = covering_radius(grid.atoms(), &samples, 1);
        prop_assert!(radius <= 1.0 / k as f64 + 1e-12);
        let u = StepControl::new(1.0, 1, values).unwrap();
        let coarse = 1usize << k;
        let fine = u.slots();
        let projected = chattering_project(&u, grid.atoms(), k.min(4)).unwrap();
        prop_assert_eq!(projected.slots(), coarse);
        for c in 0..coarse {
            let v = u.slot(c * fine / coarse)[0];
            prop_assert!((projected.slot(c)[0] - v).abs() <= radius + 1e-12);
        }
    }
}
