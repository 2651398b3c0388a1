use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::RunResult;

/// One written artifact as listed in the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
    /// Data rows: lines minus the header for CSV, lines for JSON-lines.
    pub rows: usize,
}

/// Output directory of one run: artifacts plus the `log.jsonl` event log.
pub struct Output {
    dir: PathBuf,
    log: BufWriter<File>,
    artifacts: Vec<Artifact>,
    quiet: bool,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn timestamp() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

impl Output {
    pub fn create(dir: &Path, quiet: bool) -> RunResult<Self> {
        fs::create_dir_all(dir)?;
        let log = BufWriter::new(File::create(dir.join("log.jsonl"))?);
        Ok(Self {
            dir: dir.to_path_buf(),
            log,
            artifacts: Vec::new(),
            quiet,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Appends `{ts, level, event, payload}` to the log.
    pub fn event(&mut self, level: &str, event: &str, payload: Value) {
        let line = json!({"ts": timestamp(), "level": level, "event": event, "payload": payload});
        if !self.quiet {
            eprintln!("{line}");
        }
        // a failing log write must not mask the study's own result
        let _ = writeln!(self.log, "{line}").and_then(|_| self.log.flush());
    }

    /// Renders an artifact in memory, then writes and registers it.
    pub fn artifact(&mut self, name: &str, render: impl FnOnce(&mut Vec<u8>) -> RunResult<()>) -> RunResult<()> {
        let mut buf = Vec::new();
        render(&mut buf)?;
        fs::write(self.dir.join(name), &buf)?;
        let lines = buf.iter().filter(|&&b| b == b'\n').count();
        let rows = if name.ends_with(".csv") { lines.saturating_sub(1) } else { lines };
        self.artifacts.push(Artifact {
            file: name.to_string(),
            sha256: sha256_hex(&buf),
            rows,
        });
        self.event("info", "artifact", json!({"file": name, "rows": rows}));
        Ok(())
    }

    /// Writes `manifest.json`.
    pub fn finish(mut self, mut manifest: Value) -> RunResult<()> {
        manifest["outputs"] = serde_json::to_value(&self.artifacts).unwrap_or(Value::Null);
        let text = serde_json::to_string_pretty(&manifest).unwrap_or_default();
        fs::write(self.dir.join("manifest.json"), text + "\n")?;
        self.log.flush()?;
        Ok(())
    }
}

/// Shortest round-trip text of `x`, switching to exponent form outside
/// `[1e-5, 1e15)` so extreme magnitudes stay readable.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-5..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}
