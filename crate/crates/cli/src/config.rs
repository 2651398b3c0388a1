use std::path::PathBuf;

use mfglab_core::benchmarks::{bounded_initial_points, bounded_model, lq_initial_measure, lq_model, ou_model, LqParams};
use mfglab_core::measures::DiscreteMeasure;
use mfglab_core::mfg_solver::{DpConfig, MfgParams, NoiseRule, StateGrid};
use mfglab_core::rng::{normal, substream, uniform, Purpose};
use mfglab_core::ModelSpecF64;
use serde::{Deserialize, Serialize};

use crate::error::{RunError, RunResult};

/// The studies the runner knows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    SolveMfg,
    SimulateNplayer,
    NashGap,
    ConvergenceStudy,
    ValueMonotonicity,
    Diagnostics,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::SolveMfg => "solve-mfg",
            Study::SimulateNplayer => "simulate-nplayer",
            Study::NashGap => "nash-gap",
            Study::ConvergenceStudy => "convergence-study",
            Study::ValueMonotonicity => "value-monotonicity",
            Study::Diagnostics => "diagnostics",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Benchmark {
    #[default]
    Lq,
    Ou,
    Bounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrature {
    #[default]
    GaussHermite,
    MonteCarlo,
}

/// Full experiment description. Every section is optional and falls back to
/// its defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub study: Option<Study>,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub model: ModelConfig,
    pub discretization: Discretization,
    pub solver: SolverConfig,
    pub game: GameConfig,
    pub monotonicity: MonotonicityConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub benchmark: Benchmark,
    /// Coefficient overrides, `lq` only.
    pub lq: Option<LqSection>,
}

/// Linear-quadratic coefficients; missing keys keep their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LqSection {
    pub a: f64,
    pub abar: f64,
    pub c: f64,
    pub s: f64,
    pub q: f64,
    pub kappa: f64,
    pub q_t: f64,
    pub kappa_t: f64,
    pub m0_mean: f64,
    pub m0_var: f64,
    pub horizon: f64,
}

impl Default for LqSection {
    fn default() -> Self {
        let p = LqParams::default();
        Self {
            a: p.a,
            abar: p.abar,
            c: p.c,
            s: p.s,
            q: p.q,
            kappa: p.kappa,
            q_t: p.q_t,
            kappa_t: p.kappa_t,
            m0_mean: p.m0_mean,
            m0_var: p.m0_var,
            horizon: p.horizon,
        }
    }
}

impl From<LqSection> for LqParams {
    fn from(s: LqSection) -> Self {
        LqParams {
            a: s.a,
            abar: s.abar,
            c: s.c,
            s: s.s,
            q: s.q,
            kappa: s.kappa,
            q_t: s.q_t,
            kappa_t: s.kappa_t,
            m0_mean: s.m0_mean,
            m0_var: s.m0_var,
            horizon: s.horizon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Discretization {
    /// Dyadic level: `2^k` control slots.
    pub k: u32,
    pub state_min: f64,
    pub state_max: f64,
    pub nodes: usize,
    /// Euler substeps per slot.
    pub substeps: usize,
    pub quadrature: Quadrature,
    /// Gauss–Hermite nodes or Monte Carlo samples.
    pub quadrature_points: usize,
}

impl Default for Discretization {
    fn default() -> Self {
        Self {
            k: 5,
            state_min: -3.0,
            state_max: 3.0,
            nodes: 101,
            substeps: 2,
            quadrature: Quadrature::GaussHermite,
            quadrature_points: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub particles: usize,
    pub damping: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// Action truncation radius `M`.
    pub radius: f64,
    pub antithetic: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            particles: 2048,
            damping: 1.0,
            tol: 1e-4,
            max_iters: 30,
            radius: 4.0,
            antithetic: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GameConfig {
    pub n_list: Vec<usize>,
    pub repetitions: usize,
    pub delta0: f64,
    /// Deviating player in `nash-gap` and `convergence-study`.
    pub player: usize,
    /// Quantile atoms used to compress the others' law for the best response.
    pub br_atoms: usize,
    pub constant_candidates: Vec<f64>,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            n_list: vec![8, 32, 128, 512],
            repetitions: 8,
            delta0: 0.5,
            player: 0,
            br_atoms: 16,
            constant_candidates: vec![-0.5, 0.0, 0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonotonicityConfig {
    pub radii: Vec<u32>,
    pub probes: Vec<f64>,
}

impl Default for MonotonicityConfig {
    fn default() -> Self {
        Self {
            radii: vec![1, 2, 4, 8],
            probes: vec![-1.0, 0.0, 0.5, 1.0, 1.5],
        }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> RunResult<()> {
    if ok {
        Ok(())
    } else {
        Err(RunError::Validation(msg()))
    }
}

impl Config {
    pub fn from_toml(text: &str) -> RunResult<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| RunError::Validation(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Range checks on every numeric field.
    pub fn validate(&self) -> RunResult<()> {
        let d = &self.discretization;
        check((1..=12).contains(&d.k), || format!("discretization.k = {} outside 1..=12", d.k))?;
        check(d.state_min.is_finite() && d.state_max.is_finite() && d.state_min < d.state_max, || {
            "discretization.state_min must be below discretization.state_max".into()
        })?;
        check((2..=100_000).contains(&d.nodes), || format!("discretization.nodes = {} outside 2..=100000", d.nodes))?;
        check((1..=64).contains(&d.substeps), || format!("discretization.substeps = {} outside 1..=64", d.substeps))?;
        let max_points = match d.quadrature {
            Quadrature::GaussHermite => 64,
            Quadrature::MonteCarlo => 100_000,
        };
        check((1..=max_points).contains(&d.quadrature_points), || {
            format!("discretization.quadrature_points = {} outside 1..={max_points}", d.quadrature_points)
        })?;

        let s = &self.solver;
        check((1..=1_000_000).contains(&s.particles), || format!("solver.particles = {} outside 1..=1000000", s.particles))?;
        check(s.damping > 0.0 && s.damping <= 1.0, || format!("solver.damping = {} outside (0, 1]", s.damping))?;
        check(s.tol.is_finite() && s.tol > 0.0, || format!("solver.tol = {} must be positive", s.tol))?;
        check((1..=1000).contains(&s.max_iters), || format!("solver.max_iters = {} outside 1..=1000", s.max_iters))?;
        check(s.radius.is_finite() && s.radius > 0.0 && s.radius <= 1e3, || {
            format!("solver.radius = {} outside (0, 1000]", s.radius)
        })?;

        let g = &self.game;
        check(!g.n_list.is_empty(), || "game.n_list is empty".into())?;
        check(g.n_list.iter().all(|n| (1..=100_000).contains(n)), || "game.n_list entries outside 1..=100000".into())?;
        check((1..=10_000).contains(&g.repetitions), || format!("game.repetitions = {} outside 1..=10000", g.repetitions))?;
        let horizon = self.horizon();
        check(g.delta0 > 0.0 && g.delta0 <= horizon.min(1.0), || {
            format!("game.delta0 = {} outside (0, min(1, T)]", g.delta0)
        })?;
        check(g.n_list.iter().all(|&n| g.player < n), || format!("game.player = {} exceeds some N", g.player))?;
        check(g.br_atoms >= 1, || "game.br_atoms must be positive".into())?;
        check(g.constant_candidates.iter().all(|c| c.is_finite()), || "game.constant_candidates must be finite".into())?;

        let m = &self.monotonicity;
        check(!m.radii.is_empty() && m.radii[0] >= 1 && m.radii.windows(2).all(|w| w[0] < w[1]), || {
            "monotonicity.radii must be positive and strictly ascending".into()
        })?;
        check(m.radii.iter().all(|&r| r <= 12), || "monotonicity.radii entries above 12".into())?;
        check(!m.probes.is_empty() && m.probes.iter().all(|p| p.is_finite()), || {
            "monotonicity.probes must be non-empty and finite".into()
        })?;

        check(self.model.lq.is_none() || self.model.benchmark == Benchmark::Lq, || {
            "model.lq is only allowed with benchmark = \"lq\"".into()
        })?;
        self.lq_params().validate().map_err(|e| RunError::Validation(e.to_string()))?;
        Ok(())
    }

    pub fn lq_params(&self) -> LqParams {
        self.model.lq.unwrap_or_default().into()
    }

    fn horizon(&self) -> f64 {
        match self.model.benchmark {
            Benchmark::Lq => self.lq_params().horizon,
            Benchmark::Ou | Benchmark::Bounded => 1.0,
        }
    }

    pub fn model(&self) -> RunResult<ModelSpecF64> {
        Ok(match self.model.benchmark {
            Benchmark::Lq => lq_model(&self.lq_params())?,
            Benchmark::Ou => ou_model(),
            Benchmark::Bounded => bounded_model(),
        })
    }

    pub fn initial_law(&self) -> InitialLaw {
        match self.model.benchmark {
            Benchmark::Lq => {
                let p = self.lq_params();
                InitialLaw::Normal(p)
            }
            Benchmark::Ou => InitialLaw::Normal(LqParams::zero()),
            Benchmark::Bounded => InitialLaw::UniformUnit,
        }
    }

    pub fn state_grid(&self) -> RunResult<StateGrid<f64>> {
        let d = &self.discretization;
        Ok(StateGrid::interval(d.state_min, d.state_max, d.nodes, d.k, self.horizon())?)
    }

    pub fn dp_config(&self) -> DpConfig {
        let d = &self.discretization;
        let rule = match d.quadrature {
            Quadrature::GaussHermite => NoiseRule::GaussHermite { nodes: d.quadrature_points },
            Quadrature::MonteCarlo => NoiseRule::MonteCarlo {
                samples: d.quadrature_points,
                seed: self.seed,
            },
        };
        DpConfig::default().with_substeps(d.substeps).with_rule(rule)
    }

    pub fn mfg_params(&self) -> RunResult<MfgParams<f64>> {
        let s = &self.solver;
        let mut params = MfgParams::new(self.state_grid()?, s.radius, s.particles, self.seed);
        params.damping = s.damping;
        params.tol = s.tol;
        params.max_iters = s.max_iters;
        params.antithetic = s.antithetic;
        params.dp = self.dp_config();
        Ok(params)
    }
}

/// Initial law of the benchmarks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialLaw {
    /// `N(m0_mean, m0_var)` of the given coefficients.
    Normal(LqParams),
    /// Uniform on `[−1, 1]`.
    UniformUnit,
}

impl InitialLaw {
    /// Deterministic quantile sample with `n` atoms.
    pub fn quantile_measure(&self, n: usize) -> RunResult<DiscreteMeasure<f64>> {
        Ok(match self {
            InitialLaw::Normal(p) => lq_initial_measure(p, n)?,
            InitialLaw::UniformUnit => DiscreteMeasure::uniform(1, bounded_initial_points(n).concat())?,
        })
    }

    /// `n` i.i.d. draws from substream `(seed, Sampling, n)`.
    pub fn sample(&self, seed: u64, n: usize) -> Vec<Vec<f64>> {
        let mut rng = substream(seed, Purpose::Sampling, n as u64);
        (0..n)
            .map(|_| match self {
                InitialLaw::Normal(p) => vec![p.m0_mean + p.m0_var.sqrt() * normal::<f64, _>(&mut rng)],
                InitialLaw::UniformUnit => vec![2.0 * uniform::<f64, _>(&mut rng) - 1.0],
            })
            .collect()
    }
}
