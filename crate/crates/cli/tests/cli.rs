use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn config(dir: &Path, discount: &str) -> PathBuf {
    let text = format!(
        r#"{{"model": {{"mu": 1, "sigma": 1, "alpha": 0, "k": 0.5, "theta": 0.15, "gamma": 0.3,
                     "discount": {discount}}},
            "grid": {{"n_r": 32, "n_z": 48}},
            "mc": {{"n_paths": 1000, "dt": 0.01, "t_max": 100}},
            "probe": {{"rates": [0.15], "levels": [0.5], "z0": 0.8, "r0": 0.15}},
            "outputs": "{}"}}"#,
        dir.join("out").display()
    );
    let path = dir.join("run.json");
    fs::write(&path, text).unwrap();
    path
}

fn linear(dir: &Path) -> PathBuf {
    config(dir, r#"{"kind": "linear_shift", "r0": 0.05}"#)
}

fn cirdiv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cirdiv")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn solve_writes_artifacts_and_nonincreasing_boundary() {
    let tmp = TempDir::new().unwrap();
    let cfg = linear(tmp.path());
    let out = cirdiv(&["solve", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("out");
    for f in ["ugrid.csv", "vgrid.csv", "boundary.csv", "residuals.json", "manifest.json"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let b: Vec<f64> = fs::read_to_string(dir.join("boundary.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(b.windows(2).all(|w| w[1] <= w[0]));
    let res: Value = serde_json::from_str(&fs::read_to_string(dir.join("residuals.json")).unwrap()).unwrap();
    for key in ["continuation_residual", "stopping_residual", "gradient_min", "neumann_residual", "isotonic_displacement"] {
        assert!(res.get(key).is_some(), "{key}");
    }
    let m: Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["grid"]["n_r"], 32);
    assert_eq!(m["inputs"][0]["blob"].as_str().unwrap().len(), 64);
    assert!(m["seed"].is_u64() && m["version"].is_string());
}

#[test]
fn rerun_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = linear(tmp.path());
    let dir = tmp.path().join("out");
    let read = |f: &str| fs::read(dir.join(f)).unwrap();
    assert_eq!(code(&cirdiv(&["solve", "-c", cfg.to_str().unwrap()])), 0);
    let first: Vec<Vec<u8>> = ["ugrid.csv", "vgrid.csv", "boundary.csv", "manifest.json"].map(read).to_vec();
    assert_eq!(code(&cirdiv(&["solve", "-c", cfg.to_str().unwrap()])), 0);
    let second: Vec<Vec<u8>> = ["ugrid.csv", "vgrid.csv", "boundary.csv", "manifest.json"].map(read).to_vec();
    assert_eq!(first, second);
}

#[test]
fn missing_key_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = linear(tmp.path());
    let text = fs::read_to_string(&cfg).unwrap().replace(r#""sigma": 1, "#, "");
    fs::write(&cfg, text).unwrap();
    let out = cirdiv(&["solve", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma"));
    let out = cirdiv(&["solve", "-c", cfg.to_str().unwrap(), "--set", "model.sigma=1", "--set", "model.mu=-1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn nonconvergence_exits_with_numerical_code() {
    let tmp = TempDir::new().unwrap();
    let cfg = linear(tmp.path());
    let out = cirdiv(&["solve", "-c", cfg.to_str().unwrap(), "--set", "solver.max_outer_iters=1", "--set", "solver.damping=0.5"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn verify_passes_then_catches_an_increasing_boundary() {
    let tmp = TempDir::new().unwrap();
    let cfg = linear(tmp.path());
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&cirdiv(&["solve", "-c", c])), 0);
    let out = cirdiv(&["verify", "-c", c]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("out");
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);

    // Raise b on two nodes so that it increases there.
    let text = fs::read_to_string(dir.join("boundary.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    for k in [10, 20] {
        let r = lines[k].split(',').next().unwrap().to_string();
        lines[k] = format!("{r},2.49");
    }
    let edited = tmp.path().join("edited.csv");
    fs::write(&edited, lines.join("\n") + "\n").unwrap();
    let out = cirdiv(&["verify", "-c", c, "--boundary", edited.to_str().unwrap()]);
    assert_eq!(code(&out), 4);
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.join("verify.json")).unwrap()).unwrap();
    let failed: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(failed.contains(&"boundary_nonincreasing"), "{failed:?}");
}

#[test]
fn verify_refuses_tiny_samples() {
    let tmp = TempDir::new().unwrap();
    let cfg = linear(tmp.path());
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&cirdiv(&["solve", "-c", c])), 0);
    let out = cirdiv(&["verify", "-c", c, "--set", "mc.n_paths=10"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("min_paths"));
}

#[test]
fn oracle_reproduces_constant_rate_barriers() {
    let z = |rho: f64| stdout_json(&cirdiv(&["oracle", "--rho0", &rho.to_string()]))["z_star"].as_f64().unwrap();
    assert!((z(0.05) - 3.56).abs() < 0.01);
    assert!((z(0.05f64.sqrt()) - 1.98).abs() < 0.01);
    assert_eq!(code(&cirdiv(&["oracle", "--rho0=-1"])), 2);
}

#[test]
fn simulate_degenerate_barriers() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), r#"{"kind": "sqrt_shift", "r0": 0.05}"#);
    let c = cfg.to_str().unwrap();
    let out = cirdiv(&["simulate", "-c", c, "--level", "0"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let j = stdout_json(&out);
    assert_eq!(j["dividends"]["mean"].as_f64().unwrap(), 0.8);
    assert_eq!(j["dividends"]["std_error"].as_f64().unwrap(), 0.0);
    let out = cirdiv(&["simulate", "-c", c, "--level", "inf", "--set", "mc.t_max=5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["dividends"]["mean"].as_f64().unwrap(), 0.0);
    assert!(tmp.path().join("out/simulate.json").exists());
}

#[test]
fn trace_writes_one_path() {
    let tmp = TempDir::new().unwrap();
    let cfg = linear(tmp.path());
    let c = cfg.to_str().unwrap();
    let out = cirdiv(&["trace", "-c", c, "--level", "1.2", "--set", "mc.t_max=2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("out/trace.csv")).unwrap();
    assert!(text.starts_with("t,R,Z,K,S,D,I\n"));
    assert!(text.lines().count() > 2);
}

#[test]
fn worker_count_does_not_change_results() {
    let tmp = TempDir::new().unwrap();
    let cfg = linear(tmp.path());
    let c = cfg.to_str().unwrap();
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_cirdiv"))
            .args(["simulate", "-c", c, "--level", "1.0", "--set", "mc.t_max=20"])
            .env("RUST_LOG", "warn")
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&out), 0);
        out.stdout
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn oracle_samples_are_smooth_at_the_barrier() {
    let j = stdout_json(&cirdiv(&["oracle", "--rho0", "0.05"]));
    let s = j["samples"].as_array().unwrap();
    assert_eq!(s.len(), 11);
    assert_eq!(s[0]["v"].as_f64().unwrap(), 0.0);
    assert!((s[5]["v_z"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((s[10]["v_z"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}
