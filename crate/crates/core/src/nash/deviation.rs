use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use super::costs::player_costs;
use crate::dynamics::{simulate_n_player, Coefficients, ModelSpec, PathBundle, StrategyProfile, StrategyRef};
use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, MeasureFlow};
use crate::mfg_solver::{backward_dp, build_control_grid, noise_feedback_strategy, DpConfig, NoiseFeedbackStrategy, StateGrid};
use crate::rng::derive_seed;
use crate::scalar::Real;

/// Paired comparison of one candidate against the incumbent.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGap {
    pub label: String,
    /// Mean of `J_i(u) − J_i([u^{−i}, v])` over repetitions.
    pub mean_diff: f64,
    /// Standard error of the paired differences.
    pub std_error: f64,
    pub cost: f64,
}

/// Lower bound on the deviation incentive of one player.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationReport {
    pub player: usize,
    pub n_players: usize,
    pub seed: u64,
    pub dt: f64,
    pub repetitions: usize,
    pub incumbent_cost: f64,
    /// `max(0, max_v mean_diff_v)`. A lower bound on the true gap since only
    /// the listed candidates are tried.
    pub epsilon_hat: f64,
    /// Candidate attaining the largest mean difference.
    pub best_candidate: usize,
    pub candidates: Vec<CandidateGap>,
}

impl DeviationReport {
    /// Standard error of the best candidate's paired difference.
    pub fn best_std_error(&self) -> f64 {
        self.candidates[self.best_candidate].std_error
    }

    /// Writes `N,seed,dt,R,player,candidate,label,mean_diff,std_error,cost`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["N", "seed", "dt", "R", "player", "candidate", "label", "mean_diff", "std_error", "cost"])?;
        for (c, g) in self.candidates.iter().enumerate() {
            w.write_record([
                self.n_players.to_string(),
                self.seed.to_string(),
                self.dt.to_string(),
                self.repetitions.to_string(),
                self.player.to_string(),
                c.to_string(),
                g.label.clone(),
                g.mean_diff.to_string(),
                g.std_error.to_string(),
                g.cost.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn costs_of<T: Real>(
    model: &ModelSpec<T>,
    profile: &StrategyProfile<T>,
    player: usize,
    initials: &[Vec<T>],
    seeds: &[u64],
    steps: usize,
) -> Result<Vec<f64>> {
    seeds
        .iter()
        .map(|&s| {
            let bundle = simulate_n_player(model, profile, initials, s, steps)?;
            Ok(player_costs(model, &bundle)[player].as_f64())
        })
        .collect()
}

/// Estimates `ε` for player `i`: the largest cost reduction any candidate
/// achieves when substituted for `u_i`, holding the other strategies fixed.
///
/// Every variant reuses the repetition seeds `derive_seed(seed, r)`, so all
/// noise, randomization and initial data coincide across variants and the
/// differences are paired.
#[allow(clippy::too_many_arguments)]
pub fn deviation_gap<T: Real>(
    model: &ModelSpec<T>,
    profile: &StrategyProfile<T>,
    player: usize,
    candidates: &[StrategyRef<T>],
    initials: &[Vec<T>],
    seed: u64,
    steps: usize,
    repetitions: usize,
) -> Result<DeviationReport> {
    if candidates.is_empty() || repetitions == 0 {
        return Err(Error::InvalidParameter("need candidates and at least one repetition".into()));
    }
    if player >= profile.len() {
        return Err(Error::InvalidParameter(format!("player {player} out of range")));
    }
    if let Some(c) = candidates.iter().position(|c| c.information() != crate::dynamics::Information::Narrow) {
        return Err(Error::NotNarrow(c));
    }
    let seeds: Vec<u64> = (0..repetitions as u64).map(|r| derive_seed(seed, r)).collect();
    let base = costs_of(model, profile, player, initials, &seeds, steps)?;
    let r = repetitions as f64;
    let incumbent_cost = base.iter().sum::<f64>() / r;
    let gaps = candidates
        .par_iter()
        .map(|v| {
            let varied = profile.with_replaced(player, v.clone());
            let costs = costs_of(model, &varied, player, initials, &seeds, steps)?;
            let diffs: Vec<f64> = base.iter().zip(&costs).map(|(a, b)| a - b).collect();
            let mean_diff = diffs.iter().sum::<f64>() / r;
            let std_error = if repetitions < 2 {
                f64::NAN
            } else {
                let var = diffs.iter().map(|d| (d - mean_diff).powi(2)).sum::<f64>() / (r - 1.0);
                (var / r).sqrt()
            };
            Ok(CandidateGap {
                label: v.label(),
                mean_diff,
                std_error,
                cost: costs.iter().sum::<f64>() / r,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best_candidate = 0;
    for (c, g) in gaps.iter().enumerate() {
        if g.mean_diff > gaps[best_candidate].mean_diff {
            best_candidate = c;
        }
    }
    Ok(DeviationReport {
        player,
        n_players: profile.len(),
        seed,
        dt: (model.horizon / T::of_usize(steps)).as_f64(),
        repetitions,
        incumbent_cost,
        epsilon_hat: gaps[best_candidate].mean_diff.max(0.0),
        best_candidate,
        candidates: gaps,
    })
}

/// Coefficients seen by a deviating player whose own state carries weight
/// `w` in the population law, the rest being the frozen law of the others.
struct DeviationCoefficients<T: Real> {
    base: Arc<dyn Coefficients<T>>,
    weight: T,
}

impl<T: Real> Coefficients<T> for DeviationCoefficients<T> {
    fn drift(&self, t: T, x: &[T], nu: &DiscreteMeasure<T>, gamma: &[T], out: &mut [T]) {
        self.base.drift(t, x, &nu.with_extra_atom(x, self.weight), gamma, out)
    }

    fn diffusion(&self, t: T, x: &[T], nu: &DiscreteMeasure<T>, out: &mut [T]) {
        self.base.diffusion(t, x, &nu.with_extra_atom(x, self.weight), out)
    }

    fn running_cost(&self, t: T, x: &[T], nu: &DiscreteMeasure<T>, gamma: &[T]) -> T {
        self.base.running_cost(t, x, &nu.with_extra_atom(x, self.weight), gamma)
    }

    fn terminal_cost(&self, x: &[T], nu: &DiscreteMeasure<T>) -> T {
        self.base.terminal_cost(x, &nu.with_extra_atom(x, self.weight))
    }
}

/// The single-player control problem of a deviator in an `N`-player game:
/// the measure argument is `(1 − 1/N)·ν + (1/N)·δ_x` where `ν` is the law of
/// the other players.
pub fn deviation_model<T: Real>(model: &ModelSpec<T>, n_players: usize) -> ModelSpec<T> {
    let mut m = model.clone();
    m.name = format!("{} (deviation, N={n_players})", model.name);
    m.coefficients = Arc::new(DeviationCoefficients {
        base: model.coefficients.clone(),
        weight: T::one() / T::of_usize(n_players.max(1)),
    });
    m
}

/// Law of the players other than `player`, pooled over runs and compressed
/// to `atoms` quantile points per time.
pub fn others_flow<T: Real>(bundles: &[PathBundle<T>], player: usize, atoms: usize) -> Result<MeasureFlow<T>> {
    let first = bundles.first().ok_or(Error::EmptySample)?;
    let n = first.n_players();
    let measures = (0..=first.steps)
        .map(|j| {
            let pts: Vec<T> = bundles
                .iter()
                .flat_map(|b| (0..n).filter(|&i| i != player || n == 1).flat_map(move |i| b.state(i, j).to_vec()))
                .collect();
            let pooled = DiscreteMeasure::uniform(first.d, pts)?;
            if pooled.len() <= atoms {
                return Ok(pooled);
            }
            DiscreteMeasure::uniform(first.d, pooled.quantile_sample(atoms).concat())
        })
        .collect::<Result<Vec<_>>>()?;
    MeasureFlow::new(first.time_grid().to_vec(), measures)
}

/// Grid best response of `player` to the others' realized law in `bundles`:
/// `ψ` from the DP of [`deviation_model`] against [`others_flow`].
pub fn best_response_candidate<T: Real>(
    model: &ModelSpec<T>,
    bundles: &[PathBundle<T>],
    player: usize,
    radius: T,
    sgrid: &StateGrid<T>,
    config: &DpConfig,
    atoms: usize,
) -> Result<NoiseFeedbackStrategy<T>> {
    let n = bundles.first().ok_or(Error::EmptySample)?.n_players();
    let dev = deviation_model(model, n);
    let flow = others_flow(bundles, player, atoms)?;
    let cgrid = build_control_grid(model, radius, sgrid.level)?;
    let dp = backward_dp(&dev, &flow, &cgrid, sgrid, config)?;
    noise_feedback_strategy(&dev, &flow, &cgrid, sgrid, &dp)
}
