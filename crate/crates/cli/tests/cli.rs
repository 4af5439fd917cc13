//! CLI contract tests: exit codes, config rejection, determinism of
//! persisted tables, and report's re-plotting. Everything here uses small
//! grids so the whole file runs in seconds.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fbm-lab"));
    cmd.env_remove("FBM_LAB_THREADS");
    cmd
}

const BASE_CFG: &str = r#"
[kernel]
family = "standard"
hurst = 0.5
quad_tol = 1e-8

[sde]
sigma = [[1.0]]
x0 = [0.0]

[sde.drift]
kind = "linear"
matrix = [[0.2]]

[f]
kind = "identity"

[experiment]
delta = 0.5
dt = 0.25
n_list = [4, 8]
t_list = [2.0]
r_list = [0.0, 0.5, 1.0]
replicas = 6
seed = 7
"#;

fn write_cfg(dir: &Path, content: &str) -> PathBuf {
    let path = dir.join("cfg.toml");
    fs::write(&path, content).expect("write config");
    path
}

#[test]
fn missing_config_flag_is_a_usage_error() {
    let out = bin().arg("sample").output().expect("run");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
}

#[test]
fn nonexistent_config_path_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = bin()
        .args(["sample", "--config", "/nonexistent/cfg.toml", "--out"])
        .arg(tmp.path())
        .output()
        .expect("run");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_keys_are_rejected_by_name() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(tmp.path(), &format!("{BASE_CFG}\ngoop = 1\n"));
    let out = bin().args(["bounds", "--config"]).arg(&cfg).arg("--out").arg(tmp.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("goop"));
}

#[test]
fn zero_threads_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(tmp.path(), BASE_CFG);
    let out = bin()
        .args(["sample", "--threads", "0", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_thread_env_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(tmp.path(), BASE_CFG);
    let out = bin()
        .env("FBM_LAB_THREADS", "banana")
        .args(["sample", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FBM_LAB_THREADS"));
}

#[test]
fn thread_env_is_accepted_when_valid() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(tmp.path(), BASE_CFG);
    let out = bin()
        .env("FBM_LAB_THREADS", "2")
        .args(["bounds", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("run"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = fs::read_to_string(tmp.path().join("run/manifest.json")).unwrap();
    assert!(manifest.contains("\"threads\": 2"));
}

fn run_sample(cfg: &Path, dir: &Path, seed: Option<&str>) {
    let mut cmd = bin();
    cmd.args(["sample", "--config"]).arg(cfg).arg("--out").arg(dir);
    if let Some(s) = seed {
        cmd.args(["--seed", s]);
    }
    let out = cmd.output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sampled_paths_are_seed_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(tmp.path(), BASE_CFG);
    run_sample(&cfg, &tmp.path().join("a"), None);
    run_sample(&cfg, &tmp.path().join("b"), None);
    run_sample(&cfg, &tmp.path().join("c"), Some("9"));
    let a = fs::read(tmp.path().join("a/path_000.csv")).unwrap();
    let b = fs::read(tmp.path().join("b/path_000.csv")).unwrap();
    let c = fs::read(tmp.path().join("c/path_000.csv")).unwrap();
    assert_eq!(a, b, "same seed must reproduce the same bytes");
    assert_ne!(a, c, "--seed must actually change the draw");
}

#[test]
fn integrate_writes_one_trajectory_per_persisted_replica() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(tmp.path(), BASE_CFG);
    let out = bin()
        .args(["integrate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("run"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for r in 0..6 {
        assert!(tmp.path().join(format!("run/trajectory_{r:03}.csv")).exists());
    }
    let first = fs::read_to_string(tmp.path().join("run/trajectory_000.csv")).unwrap();
    assert!(first.starts_with("t,comp_0\n"));
    // x0 = 0, so the trajectory starts at the origin.
    assert!(first.lines().nth(1).unwrap().ends_with(",0.0000000000000000e0"));
}

#[test]
fn report_requires_an_existing_run_directory() {
    let tmp = TempDir::new().unwrap();
    let out = bin().args(["report", "--out"]).arg(tmp.path().join("nope")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().arg("report").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_regenerates_plots_without_recomputing() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(tmp.path(), BASE_CFG);
    let run = tmp.path().join("run");
    let out = bin().args(["bounds", "--config"]).arg(&cfg).arg("--out").arg(&run).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let plot = run.join("plots/psi.svg");
    let original = fs::read(&plot).unwrap();
    fs::remove_file(&plot).unwrap();
    let out = bin().args(["report", "--out"]).arg(&run).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(&plot).unwrap(), original, "re-plotting must be deterministic");
    assert!(String::from_utf8_lossy(&out.stdout).contains("psi.csv"));
}

#[test]
fn json_format_writes_single_documents() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(tmp.path(), BASE_CFG);
    let run = tmp.path().join("run");
    let out = bin()
        .args(["bounds", "--format", "json", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&run)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(run.join("bounds.json").exists());
    assert!(!run.join("psi.csv").exists());
    let doc = fs::read_to_string(run.join("bounds.json")).unwrap();
    assert!(doc.trim_start().starts_with('{'));
    assert!(doc.contains("\"psi\"") && doc.contains("\"envelopes\""));
}

#[test]
fn verify_rejects_a_config_flag() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(tmp.path(), BASE_CFG);
    let out = bin().args(["verify", "--config"]).arg(&cfg).arg("--out").arg(tmp.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
