use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfglab_cli::{execute, Config, RunError, RunResult, Study};

#[derive(Parser)]
#[command(name = "mfglab", version, about = "Mean field game and N-player experiment runner")]
struct Cli {
    #[command(subcommand)]
    study: Command,

    /// TOML study description.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (default: `output_dir` from the config, else `mfglab-out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Do not echo log events to stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve the mean field game by damped fixed-point iteration.
    SolveMfg,
    /// Simulate the N-player game under the i.i.d. mean field policy.
    SimulateNplayer,
    /// Estimate the Nash gap of the mean field policy in the N-player game.
    NashGap,
    /// Tabulate distances, gaps and regularity statistics over N.
    ConvergenceStudy,
    /// Value at t = 0 against the truncation radius.
    ValueMonotonicity,
    /// Assumption checks, moment certificates and tightness on simulated runs.
    Diagnostics,
}

impl From<Command> for Study {
    fn from(c: Command) -> Self {
        match c {
            Command::SolveMfg => Study::SolveMfg,
            Command::SimulateNplayer => Study::SimulateNplayer,
            Command::NashGap => Study::NashGap,
            Command::ConvergenceStudy => Study::ConvergenceStudy,
            Command::ValueMonotonicity => Study::ValueMonotonicity,
            Command::Diagnostics => Study::Diagnostics,
        }
    }
}

fn load(cli: &Cli) -> RunResult<Config> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| RunError::Validation(format!("cannot read {}: {e}", path.display())))?;
            Config::from_toml(&text)?
        }
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> RunResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(RunError::Validation("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| RunError::Validation(e.to_string()))?;
    }
    let cfg = load(cli)?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("mfglab-out"));
    execute(cli.study.into(), &cfg, &out, cli.quiet)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let event = serde_json::json!({
                "ts": std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64()),
                "level": "error",
                "event": "failed",
                "payload": {"kind": e.kind(), "message": e.to_string()},
            });
            eprintln!("{event}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
