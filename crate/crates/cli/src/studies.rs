use std::sync::Arc;

use mfglab_core::benchmarks::lq_oracle;
use mfglab_core::dynamics::{simulate_n_player, validate_assumptions, moment_certificate, ConstantStrategy, StrategyProfile, StrategyRef};
use mfglab_core::measures::MeasureFlow;
use mfglab_core::mfg_solver::{solve_mfg, value_monotonicity_study, MfgParams, MfgSolution};
use mfglab_core::nash::{condition_statistics, occupation_measure, tightness_diagnostic};
use mfglab_core::ModelSpecF64;
use serde_json::{json, Value};

use crate::config::{Benchmark, Config, Study};
use crate::error::{RunError, RunResult};
use crate::game::{convergence_rows, nash_gap, simulate_population, GameSeeds, PopulationRun};
use crate::output::{num, Output};

/// Riccati steps of the LQ oracle.
const ORACLE_STEPS: usize = 10_000;

/// Sampled points per assumption check.
const ASSUMPTION_SAMPLES: usize = 2000;

/// Runs `study` and returns a summary for the manifest.
pub fn run_study(study: Study, cfg: &Config, out: &mut Output) -> RunResult<Value> {
    let model = cfg.model()?;
    match study {
        Study::SolveMfg => solve_study(cfg, &model, out),
        Study::SimulateNplayer => simulate_study(cfg, &model, out),
        Study::NashGap => nash_gap_study(cfg, &model, out),
        Study::ConvergenceStudy => convergence_study(cfg, &model, out),
        Study::ValueMonotonicity => monotonicity_study(cfg, &model, out),
        Study::Diagnostics => diagnostics_study(cfg, &model, out),
    }
}

fn solve(cfg: &Config, model: &ModelSpecF64, out: &mut Output) -> RunResult<(MfgSolution<f64>, MfgParams<f64>)> {
    let params = cfg.mfg_params()?;
    let init = cfg.initial_law().quantile_measure(params.particles)?;
    out.event(
        "info",
        "solve-start",
        json!({"particles": params.particles, "k": params.state_grid.level, "radius": params.radius}),
    );
    let sol = solve_mfg(model, &init, &params)?;
    for rec in &sol.iterations {
        let payload = serde_json::from_str(&rec.to_json()).unwrap_or(Value::Null);
        out.event("info", "iteration", payload);
    }
    if !sol.converged {
        out.event(
            "warn",
            "not-converged",
            json!({"residual": sol.residual, "tol": params.tol, "iterations": sol.iterations.len()}),
        );
    }
    Ok((sol, params))
}

fn solution_summary(sol: &MfgSolution<f64>) -> Value {
    json!({
        "converged": sol.converged,
        "iterations": sol.iterations.len(),
        "residual": sol.residual,
        "optimality_gap": sol.optimality_gap,
        "gap_std_error": sol.gap_std_error,
    })
}

fn write_flow(out: &mut Output, flow: &MeasureFlow<f64>) -> RunResult<()> {
    out.artifact("flow.csv", |w| Ok(flow.write_csv(w)?))
}

fn solve_study(cfg: &Config, model: &ModelSpecF64, out: &mut Output) -> RunResult<Value> {
    let (sol, _) = solve(cfg, model, out)?;
    write_flow(out, &sol.flow)?;
    out.artifact("value.csv", |w| Ok(sol.value.write_csv(&sol.state_grid, w)?))?;
    out.artifact("policy.csv", |w| Ok(sol.policy.write_csv(&sol.state_grid, &sol.control_grid, w)?))?;
    out.artifact("iterations.jsonl", |w| Ok(sol.write_iterations(w)?))?;
    Ok(solution_summary(&sol))
}

fn populations(cfg: &Config, model: &ModelSpecF64, sol: &MfgSolution<f64>, out: &mut Output) -> RunResult<Vec<PopulationRun>> {
    let law = cfg.initial_law();
    cfg.game
        .n_list
        .iter()
        .map(|&n| {
            let run = simulate_population(
                model,
                &sol.strategy,
                &sol.flow,
                &law,
                n,
                cfg.game.repetitions,
                GameSeeds::single(cfg.seed),
            )?;
            out.event(
                "info",
                "population",
                json!({"N": n, "median_d2": run.median_distance(), "mean_cost": run.costs.mean_cost}),
            );
            Ok(run)
        })
        .collect()
}

fn simulate_study(cfg: &Config, model: &ModelSpecF64, out: &mut Output) -> RunResult<Value> {
    let (sol, _) = solve(cfg, model, out)?;
    write_flow(out, &sol.flow)?;
    let runs = populations(cfg, model, &sol, out)?;
    out.artifact("costs.csv", |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["N", "seed", "dt", "R", "player", "cost", "std_error"])?;
        for run in &runs {
            let c = &run.costs;
            for i in 0..run.n {
                csv.write_record([
                    run.n.to_string(),
                    cfg.seed.to_string(),
                    num(c.dt),
                    c.repetitions().to_string(),
                    i.to_string(),
                    num(c.means[i]),
                    num(c.std_errors[i]),
                ])?;
            }
        }
        csv.flush()?;
        Ok(())
    })?;
    for run in &runs {
        out.artifact(&format!("paths_n{}.csv", run.n), |w| Ok(run.bundles[0].write_paths_csv(w)?))?;
    }
    let summary: Vec<Value> = runs
        .iter()
        .map(|r| json!({"N": r.n, "mean_cost": r.costs.mean_cost, "median_d2": r.median_distance()}))
        .collect();
    Ok(json!({"solution": solution_summary(&sol), "populations": summary}))
}

fn nash_gap_study(cfg: &Config, model: &ModelSpecF64, out: &mut Output) -> RunResult<Value> {
    let (sol, params) = solve(cfg, model, out)?;
    let runs = populations(cfg, model, &sol, out)?;
    let mut reports = Vec::with_capacity(runs.len());
    for run in &runs {
        let gap = nash_gap(model, run, &sol.strategy, &params, &cfg.game, GameSeeds::single(cfg.seed))?;
        out.event(
            "info",
            "nash-gap",
            json!({"N": run.n, "epsilon_hat": gap.epsilon_hat, "std_error": gap.best_std_error()}),
        );
        reports.push(gap);
    }
    out.artifact("nash_gap.csv", |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["N", "seed", "dt", "R", "player", "candidate", "label", "mean_diff", "std_error", "cost"])?;
        for r in &reports {
            for (c, g) in r.candidates.iter().enumerate() {
                csv.write_record([
                    r.n_players.to_string(),
                    r.seed.to_string(),
                    num(r.dt),
                    r.repetitions.to_string(),
                    r.player.to_string(),
                    c.to_string(),
                    g.label.clone(),
                    num(g.mean_diff),
                    num(g.std_error),
                    num(g.cost),
                ])?;
            }
        }
        csv.flush()?;
        Ok(())
    })?;
    let summary: Vec<Value> = reports
        .iter()
        .map(|r| json!({"N": r.n_players, "epsilon_hat": r.epsilon_hat, "std_error": r.best_std_error()}))
        .collect();
    Ok(json!({"solution": solution_summary(&sol), "gaps": summary}))
}

fn convergence_study(cfg: &Config, model: &ModelSpecF64, out: &mut Output) -> RunResult<Value> {
    let (sol, params) = solve(cfg, model, out)?;
    let runs = populations(cfg, model, &sol, out)?;
    let mut rows = Vec::new();
    for run in &runs {
        let gap = nash_gap(model, run, &sol.strategy, &params, &cfg.game, GameSeeds::single(cfg.seed))?;
        rows.extend(convergence_rows(run, &gap, cfg.game.delta0)?);
    }
    out.artifact("convergence.csv", |w| {
        let mut csv = csv::Writer::from_writer(w);
        for row in &rows {
            csv.serialize(row)?;
        }
        csv.flush()?;
        Ok(())
    })?;
    let summary: Vec<Value> = runs
        .iter()
        .zip(rows.chunks(cfg.game.repetitions))
        .map(|(r, chunk)| json!({"N": r.n, "median_d2": r.median_distance(), "epsilon_hat": chunk[0].epsilon_hat}))
        .collect();
    Ok(json!({"solution": solution_summary(&sol), "rows": summary}))
}

fn monotonicity_study(cfg: &Config, model: &ModelSpecF64, out: &mut Output) -> RunResult<Value> {
    let radii = &cfg.monotonicity.radii;
    let top = *radii.last().expect("validated radii");
    let steps = (1usize << top) * cfg.discretization.substeps;
    let flow = match cfg.model.benchmark {
        Benchmark::Lq => lq_oracle(&cfg.lq_params(), ORACLE_STEPS)?.mean_flow(steps)?,
        Benchmark::Ou | Benchmark::Bounded => {
            let m0 = cfg.initial_law().quantile_measure(256)?;
            MeasureFlow::constant(model.horizon, steps, m0)?
        }
    };
    let probes: Vec<Vec<f64>> = cfg.monotonicity.probes.iter().map(|&x| vec![x]).collect();
    let table = value_monotonicity_study(model, &flow, &cfg.state_grid()?, radii, &cfg.dp_config(), &probes)?;
    out.artifact("monotonicity.csv", |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["M", "atoms", "probe", "x", "value"])?;
        for row in &table.rows {
            for (p, v) in row.values.iter().enumerate() {
                csv.write_record([
                    row.radius.to_string(),
                    row.atoms.to_string(),
                    p.to_string(),
                    num(probes[p][0]),
                    num(*v),
                ])?;
            }
        }
        csv.flush()?;
        Ok(())
    })?;
    if !table.monotone {
        out.event("warn", "not-monotone", json!({"max_violation": table.max_violation}));
    }
    Ok(json!({"monotone": table.monotone, "max_violation": table.max_violation, "tolerance": table.tolerance}))
}

fn diagnostics_study(cfg: &Config, model: &ModelSpecF64, out: &mut Output) -> RunResult<Value> {
    let report = validate_assumptions(model, cfg.seed, ASSUMPTION_SAMPLES);
    for c in report.flags() {
        out.event("warn", "assumption-flagged", json!({"name": c.name, "declared": c.declared, "observed": c.observed}));
    }
    out.artifact("assumptions.csv", |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["name", "declared", "observed", "samples", "flagged"])?;
        for c in &report.checks {
            csv.write_record([
                c.name.to_string(),
                num(c.declared),
                num(c.observed),
                c.samples.to_string(),
                c.flagged.to_string(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    })?;

    let strategy: StrategyRef<f64> = match cfg.model.benchmark {
        Benchmark::Lq => {
            let oracle = lq_oracle(&cfg.lq_params(), ORACLE_STEPS)?;
            out.artifact("oracle.csv", |w| Ok(oracle.write_csv(w)?))?;
            Arc::new(oracle.feedback_strategy())
        }
        Benchmark::Ou | Benchmark::Bounded => Arc::new(ConstantStrategy::new(model.gamma0.clone())),
    };
    let steps = (1usize << cfg.discretization.k) * cfg.discretization.substeps;
    let law = cfg.initial_law();
    let seeds = GameSeeds::single(cfg.seed);
    let mut rows = Vec::new();
    let mut all_passed = true;
    for &n in &cfg.game.n_list {
        let initials = law.sample(seeds.initials, n);
        let profile = StrategyProfile::new(vec![strategy.clone(); n]);
        for (r, &seed) in seeds.repetition_seeds(cfg.game.repetitions).iter().enumerate() {
            let bundle = simulate_n_player(model, &profile, &initials, seed, steps)?;
            let cert = moment_certificate(&bundle, model);
            all_passed &= cert.passed();
            let tightness = tightness_diagnostic(&occupation_measure(&bundle), cfg.game.delta0)?;
            if !tightness.is_finite() {
                return Err(RunError::Numeric(format!("tightness diagnostic not finite for N = {n}")));
            }
            let stat = condition_statistics(&bundle, cfg.game.delta0, None).moment_statistic;
            rows.push((n, r, seed, cert, stat, tightness));
        }
    }
    out.artifact("moments.csv", |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record([
            "N",
            "repetition",
            "seed",
            "constant",
            "population_lhs",
            "population_rhs",
            "worst_individual_ratio",
            "passed",
            "moment_statistic",
            "tightness",
        ])?;
        for (n, r, seed, cert, stat, g) in &rows {
            csv.write_record([
                n.to_string(),
                r.to_string(),
                seed.to_string(),
                num(cert.constant),
                num(cert.population.lhs),
                num(cert.population.rhs),
                num(cert.worst_individual_ratio()),
                cert.passed().to_string(),
                num(*stat),
                num(*g),
            ])?;
        }
        csv.flush()?;
        Ok(())
    })?;
    Ok(json!({"assumptions_passed": report.passed(), "moment_certificates_passed": all_passed}))
}

