//! Experiment runner: reads a TOML study description, runs it against the
//! `mfglab-core` solvers and writes CSV tables, a JSON-lines event log and a
//! manifest into an output directory.

pub mod config;
pub mod error;
pub mod game;
pub mod output;
pub mod studies;

use std::path::Path;
use std::time::Instant;

use serde_json::json;

pub use config::{Config, Study};
pub use error::{RunError, RunResult};
use output::{sha256_hex, Output};

/// Hash of the resolved configuration, as recorded in the manifest.
pub fn config_hash(cfg: &Config) -> String {
    sha256_hex(serde_json::to_string(cfg).unwrap_or_default().as_bytes())
}

/// Runs one study into `out_dir`. The manifest is written on failure too.
pub fn execute(study: Study, cfg: &Config, out_dir: &Path, quiet: bool) -> RunResult<()> {
    if let Some(s) = cfg.study.filter(|&s| s != study) {
        return Err(RunError::Validation(format!(
            "config declares study \"{}\" but \"{}\" was requested",
            s.name(),
            study.name()
        )));
    }
    let mut out = Output::create(out_dir, quiet)?;
    let hash = config_hash(cfg);
    let started = Instant::now();
    out.event("info", "start", json!({"study": study.name(), "seed": cfg.seed, "config_hash": hash}));
    let result = studies::run_study(study, cfg, &mut out);
    let wall = started.elapsed().as_secs_f64();
    let mut manifest = json!({
        "tool": "mfglab",
        "version": env!("CARGO_PKG_VERSION"),
        "study": study.name(),
        "seed": cfg.seed,
        "config_hash": hash,
        "config": cfg,
        "threads": rayon::current_num_threads(),
        "wall_clock_seconds": wall,
    });
    match &result {
        Ok(summary) => {
            out.event("info", "finish", json!({"wall_clock_seconds": wall}));
            manifest["status"] = json!("ok");
            manifest["summary"] = summary.clone();
        }
        Err(e) => {
            out.event("error", "failed", json!({"kind": e.kind(), "message": e.to_string()}));
            manifest["status"] = json!("error");
            manifest["error"] = json!({"kind": e.kind(), "message": e.to_string()});
        }
    }
    out.finish(manifest)?;
    result.map(|_| ())
}
