use std::io::Write;

use crate::dynamics::{simulate_n_player, ModelSpec, PathBundle, StrategyProfile};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Realized costs `Σ_j f(t_j, X_i, μ^N(t_j), u_i(t_j))Δt + F(X_i(T), μ^N(T))`
/// of every player in one run.
pub fn player_costs<T: Real>(model: &ModelSpec<T>, bundle: &PathBundle<T>) -> Vec<T> {
    let dt = bundle.dt();
    let grid = bundle.time_grid();
    let terminal = bundle.flow.at(bundle.steps);
    (0..bundle.n_players())
        .map(|i| {
            let u = &bundle.controls[i];
            let running = (0..bundle.steps)
                .map(|j| model.running_cost(grid[j], bundle.state(i, j), bundle.flow.at(j), u.slot(j)))
                .sum::<T>();
            running * dt + model.terminal_cost(bundle.state(i, bundle.steps), terminal)
        })
        .collect()
}

/// Per-player Monte Carlo costs over repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub n_players: usize,
    pub seeds: Vec<u64>,
    pub dt: f64,
    /// `samples[r][i]`: cost of player `i` in repetition `r`.
    pub samples: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub mean_cost: f64,
    /// Index of the median-cost player (lower median).
    pub designated: usize,
    /// `max_i |J_i − mean|`.
    pub spread: f64,
}

impl CostReport {
    pub fn repetitions(&self) -> usize {
        self.samples.len()
    }

    pub fn from_samples(seeds: Vec<u64>, dt: f64, samples: Vec<Vec<f64>>) -> Result<Self> {
        let r = samples.len();
        let n = samples.first().map_or(0, Vec::len);
        if r == 0 || n == 0 {
            return Err(Error::EmptySample);
        }
        let means: Vec<f64> = (0..n)
            .map(|i| samples.iter().map(|s| s[i]).sum::<f64>() / r as f64)
            .collect();
        let std_errors = (0..n)
            .map(|i| {
                if r < 2 {
                    return f64::NAN;
                }
                let var = samples.iter().map(|s| (s[i] - means[i]).powi(2)).sum::<f64>() / (r - 1) as f64;
                (var / r as f64).sqrt()
            })
            .collect();
        let mean_cost = means.iter().sum::<f64>() / n as f64;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| means[a].total_cmp(&means[b]).then(a.cmp(&b)));
        let designated = order[(n - 1) / 2];
        let spread = means.iter().map(|m| (m - mean_cost).abs()).fold(0.0, f64::max);
        Ok(Self {
            n_players: n,
            seeds,
            dt,
            samples,
            means,
            std_errors,
            mean_cost,
            designated,
            spread,
        })
    }

    /// Writes `N,seed,dt,R,player,cost,std_error`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["N", "seed", "dt", "R", "player", "cost", "std_error"])?;
        let seed = self.seeds.first().copied().unwrap_or_default();
        for i in 0..self.n_players {
            w.write_record([
                self.n_players.to_string(),
                seed.to_string(),
                self.dt.to_string(),
                self.repetitions().to_string(),
                i.to_string(),
                self.means[i].to_string(),
                self.std_errors[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Simulates `profile` once per seed and averages the realized costs.
pub fn evaluate_costs<T: Real>(
    model: &ModelSpec<T>,
    profile: &StrategyProfile<T>,
    initials: &[Vec<T>],
    seeds: &[u64],
    steps: usize,
) -> Result<CostReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("at least one repetition is required".into()));
    }
    let samples = seeds
        .iter()
        .map(|&s| {
            let bundle = simulate_n_player(model, profile, initials, s, steps)?;
            Ok(player_costs(model, &bundle).into_iter().map(|c| c.as_f64()).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    CostReport::from_samples(seeds.to_vec(), (model.horizon / T::of_usize(steps)).as_f64(), samples)
}
