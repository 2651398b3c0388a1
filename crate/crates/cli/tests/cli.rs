use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 3

[discretization]
k = 3
nodes = 41
substeps = 2

[solver]
particles = 256
max_iters = 4

[game]
n_list = [4, 16]
repetitions = 3

[monotonicity]
radii = [1, 2, 3]
probes = [0.0, 1.0]
"#;

fn mfglab(args: &[&str], config: &str, dir: &Path) -> Output {
    let cfg = dir.join("config.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_mfglab"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .arg("-q")
        .output()
        .unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn solve_mfg_writes_the_documented_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mfglab(&["solve-mfg"], SMALL, tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("out");
    let mut files: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(
        files,
        ["flow.csv", "iterations.jsonl", "log.jsonl", "manifest.json", "policy.csv", "value.csv"]
    );
    assert_eq!(header(&dir.join("flow.csv")), "j,t,weight,x1");
    assert_eq!(header(&dir.join("value.csv")), "j,x1,V");
    assert_eq!(header(&dir.join("policy.csv")), "j,x1,atom,g1");

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["study"], "solve-mfg");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 4);
    let iterations = fs::read_to_string(dir.join("iterations.jsonl")).unwrap();
    assert_eq!(iterations.lines().count() as u64, manifest["summary"]["iterations"].as_u64().unwrap());

    for line in fs::read_to_string(dir.join("log.jsonl")).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["ts"].is_f64() && v["level"].is_string() && v["event"].is_string() && !v["payload"].is_null());
    }
}

#[test]
fn unknown_key_exits_with_two_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mfglab(&["solve-mfg"], "[solver]\nparticels = 10\n", tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("particels"));
}

#[test]
fn out_of_range_and_mismatched_studies_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(mfglab(&["solve-mfg"], "[solver]\ndamping = 0.0\n", tmp.path()).status.code(), Some(2));
    assert_eq!(mfglab(&["solve-mfg"], "study = \"nash-gap\"\n", tmp.path()).status.code(), Some(2));
    assert_eq!(mfglab(&["solve-mfg"], "[game]\ndelta0 = 1.5\n", tmp.path()).status.code(), Some(2));
}

#[test]
fn unstable_dynamics_exit_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "[model.lq]\na = 1e150\n\n[discretization]\nk = 2\nnodes = 11\nsubsteps = 1\n\n[solver]\nparticles = 8\nmax_iters = 1\n";
    let out = mfglab(&["solve-mfg"], cfg, tmp.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = fs::read_to_string(tmp.path().join("out/manifest.json")).unwrap();
    assert!(manifest.contains("\"numeric\""));
}

#[test]
fn reruns_are_byte_identical_and_seed_flag_overrides() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    assert!(mfglab(&["simulate-nplayer"], SMALL, a.path()).status.success());
    assert!(mfglab(&["simulate-nplayer"], SMALL, b.path()).status.success());
    assert!(mfglab(&["simulate-nplayer", "--seed", "4"], SMALL, c.path()).status.success());
    for f in ["flow.csv", "costs.csv", "paths_n4.csv", "paths_n16.csv"] {
        let x = fs::read(a.path().join("out").join(f)).unwrap();
        assert_eq!(x, fs::read(b.path().join("out").join(f)).unwrap(), "{f}");
        assert_ne!(x, fs::read(c.path().join("out").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn deterministic_single_player_run_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!("{SMALL}\n[model]\nbenchmark = \"lq\"\n\n[model.lq]\ns = 0.0\nm0_var = 0.0\n")
        .replace("n_list = [4, 16]", "n_list = [1]");
    let out = mfglab(&["convergence-study"], &cfg, tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(tmp.path().join("out/convergence.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(table.lines().skip(1).all(|l| l.starts_with("1,")));
}

#[test]
fn bounded_moment_statistic_respects_its_compactness_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!("{SMALL}\n[model]\nbenchmark = \"bounded\"\n").replace("n_list = [4, 16]", "n_list = [32]");
    let out = mfglab(&["convergence-study"], &cfg, tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(tmp.path().join("out/convergence.csv")).unwrap();
    let col = reader.headers().unwrap().iter().position(|h| h == "moment_statistic").unwrap();
    // |ξ| ≤ 1 and |u| ≤ 1 on a unit horizon
    for rec in reader.records() {
        let stat: f64 = rec.unwrap()[col].parse().unwrap();
        assert!(stat <= 2.0);
    }
}

#[test]
fn every_study_runs_on_every_benchmark() {
    for bench in ["lq", "ou", "bounded"] {
        for study in ["nash-gap", "value-monotonicity", "diagnostics"] {
            let tmp = tempfile::tempdir().unwrap();
            let cfg = format!("{SMALL}\n[model]\nbenchmark = \"{bench}\"\n");
            let out = mfglab(&[study], &cfg, tmp.path());
            assert!(out.status.success(), "{bench} {study}: {}", String::from_utf8_lossy(&out.stderr));
        }
    }
}
