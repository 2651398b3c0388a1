//! N-player runs of the mean field policy and their diagnostics.

use std::sync::Arc;

use mfglab_core::dynamics::{simulate_n_player, ConstantStrategy, StrategyRef};
use mfglab_core::measures::{flow_distance, MeasureFlow};
use mfglab_core::mfg_solver::{MfgParams, NoiseFeedbackStrategy};
use mfglab_core::nash::{
    best_response_candidate, condition_statistics, deviation_gap, iid_profile, occupation_measure, player_costs,
    tightness_diagnostic, CostReport, DeviationReport,
};
use mfglab_core::rng::derive_seed;
use mfglab_core::{ModelSpecF64, PathBundleF64};
use serde::Serialize;

use crate::config::{GameConfig, InitialLaw};
use crate::error::RunResult;

/// Seeds of an N-player experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GameSeeds {
    /// Initial states are drawn from substream `(initials, Sampling, N)`.
    pub initials: u64,
    /// Repetition `r` runs with seed `derive_seed(runs, r)`.
    pub runs: u64,
}

impl GameSeeds {
    pub fn single(seed: u64) -> Self {
        Self {
            initials: seed,
            runs: seed,
        }
    }

    pub fn repetition_seeds(&self, repetitions: usize) -> Vec<u64> {
        (0..repetitions as u64).map(|r| derive_seed(self.runs, r)).collect()
    }
}

/// `R` repetitions of the i.i.d. `ψ`-profile with fixed initial states.
pub struct PopulationRun {
    pub n: usize,
    pub steps: usize,
    pub initials: Vec<Vec<f64>>,
    pub seeds: Vec<u64>,
    pub bundles: Vec<PathBundleF64>,
    /// `sup_j d₂(μ^N(t_j), 𝔪(t_j))` per repetition.
    pub distances: Vec<f64>,
    pub costs: CostReport,
}

impl PopulationRun {
    pub fn median_distance(&self) -> f64 {
        let mut d = self.distances.clone();
        d.sort_by(f64::total_cmp);
        d[(d.len() - 1) / 2]
    }
}

pub fn simulate_population(
    model: &ModelSpecF64,
    psi: &NoiseFeedbackStrategy<f64>,
    flow: &MeasureFlow<f64>,
    law: &InitialLaw,
    n: usize,
    repetitions: usize,
    seeds: GameSeeds,
) -> RunResult<PopulationRun> {
    let steps = psi.fine_steps();
    let initials = law.sample(seeds.initials, n);
    let profile = iid_profile(Arc::new(psi.clone()) as StrategyRef<f64>, n);
    let run_seeds = seeds.repetition_seeds(repetitions);
    let bundles = run_seeds
        .iter()
        .map(|&s| simulate_n_player(model, &profile, &initials, s, steps))
        .collect::<Result<Vec<_>, _>>()?;
    let distances = bundles
        .iter()
        .map(|b| flow_distance(&b.flow, flow))
        .collect::<Result<Vec<_>, _>>()?;
    let samples = bundles.iter().map(|b| player_costs(model, b)).collect();
    let costs = CostReport::from_samples(run_seeds.clone(), model.horizon / steps as f64, samples)?;
    Ok(PopulationRun {
        n,
        steps,
        initials,
        seeds: run_seeds,
        bundles,
        distances,
        costs,
    })
}

/// Paired deviation gap of `game.player` against the grid best response to
/// the realized law of the others plus the admissible constant candidates.
pub fn nash_gap(
    model: &ModelSpecF64,
    run: &PopulationRun,
    psi: &NoiseFeedbackStrategy<f64>,
    params: &MfgParams<f64>,
    game: &GameConfig,
    seeds: GameSeeds,
) -> RunResult<DeviationReport> {
    let br = best_response_candidate(
        model,
        &run.bundles,
        game.player,
        params.radius,
        &params.state_grid,
        &params.dp,
        game.br_atoms,
    )?;
    let mut candidates: Vec<StrategyRef<f64>> = vec![Arc::new(br)];
    candidates.extend(
        game.constant_candidates
            .iter()
            .filter(|&&g| model.action_set.contains(&[g]))
            .map(|&g| Arc::new(ConstantStrategy::new(vec![g])) as StrategyRef<f64>),
    );
    let profile = iid_profile(Arc::new(psi.clone()) as StrategyRef<f64>, run.n);
    Ok(deviation_gap(
        model,
        &profile,
        game.player,
        &candidates,
        &run.initials,
        seeds.runs,
        run.steps,
        run.seeds.len(),
    )?)
}

/// One row of the convergence table.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub repetition: usize,
    pub seed: u64,
    pub dt: f64,
    pub d2_sup: f64,
    pub epsilon_hat: f64,
    pub epsilon_std_error: f64,
    pub moment_statistic: f64,
    pub designated: usize,
    pub designated_cost: f64,
    pub mean_cost: f64,
    pub spread: f64,
    pub tightness: f64,
}

pub fn convergence_rows(run: &PopulationRun, gap: &DeviationReport, delta0: f64) -> RunResult<Vec<ConvergenceRow>> {
    run.bundles
        .iter()
        .enumerate()
        .map(|(r, b)| {
            let cond = condition_statistics(b, delta0, Some(&run.costs));
            Ok(ConvergenceRow {
                n: run.n,
                repetition: r,
                seed: run.seeds[r],
                dt: run.costs.dt,
                d2_sup: run.distances[r],
                epsilon_hat: gap.epsilon_hat,
                epsilon_std_error: gap.best_std_error(),
                moment_statistic: cond.moment_statistic,
                designated: run.costs.designated,
                designated_cost: run.costs.means[run.costs.designated],
                mean_cost: run.costs.mean_cost,
                spread: run.costs.spread,
                tightness: tightness_diagnostic(&occupation_measure(b), delta0)?,
            })
        })
        .collect()
}
