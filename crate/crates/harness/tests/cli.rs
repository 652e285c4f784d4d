use std::path::Path;
use std::process::{Command, Output};

fn cpdsym(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cpdsym"));
    cmd.args(args);
    for var in ["CPDSYM_CONFIG", "CPDSYM_PRESET", "CPDSYM_OUT_DIR", "CPDSYM_JOBS", "CPDSYM_SEED"] {
        cmd.env_remove(var);
    }
    cmd.envs(envs.iter().copied());
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

const SMALL: &str = r#"{
  "experiment": "converge",
  "inline_problem": {"field": [0, 0, 1], "x0": [0.1, 0.2, 0.3], "v0": [0.5, -0.4, 0.2], "force_coeff": 0.5},
  "methods": ["SC1O2", "BORIS"],
  "h": [0.1, 0.05, 0.025],
  "eps": [0.5],
  "t_end": 1.0
}"#;

#[test]
fn lists_and_prints_presets() {
    let out = cpdsym(&["presets"], &[]);
    assert!(out.status.success());
    let names = String::from_utf8(out.stdout).unwrap();
    assert_eq!(names.lines().count(), 7);
    assert!(names.lines().any(|l| l == "p2-converge"));

    let out = cpdsym(&["presets", "p1-sweep"], &[]);
    assert!(out.status.success());
    let cfg = cpdsym_harness::parse_config(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg.eps, vec![1e-1, 1e-2, 1e-3]);
}

#[test]
fn unknown_preset_is_a_usage_error() {
    let out = cpdsym(&["presets", "p9"], &[]);
    assert_eq!(out.status.code(), Some(2));
    let out = cpdsym(&["converge", "--preset", "p9"], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_config_is_rejected_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("\"BORIS\"", "\"LEAPFROG\""));
    let out = cpdsym(&["converge", "--config", &cfg, "--out-dir", dir.path().to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("LEAPFROG"));

    let cfg = write_config(dir.path(), &SMALL.replace("\"eps\": [0.5]", "\"eps\": [2.0]"));
    let out = cpdsym(&["converge", "--config", &cfg], &[]);
    assert_eq!(out.status.code(), Some(2));

    let out = cpdsym(&["converge"], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn converge_writes_tables_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("run");
    let out = cpdsym(&["converge", "--config", &cfg, "--out-dir", out_dir.to_str().unwrap(), "--jobs", "2"], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let table = std::fs::read_to_string(out_dir.join("converge.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("method,eps,h,t,err_x,err_v,error,metric_scaled"));
    assert_eq!(lines.count(), 6);
    let slopes = std::fs::read_to_string(out_dir.join("slopes.csv")).unwrap();
    assert_eq!(slopes.lines().count(), 3);

    let md: serde_json::Value = serde_json::from_slice(&std::fs::read(out_dir.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(md["jobs"], 2);
    assert_eq!(md["failed_cells"], 0);
    assert_eq!(md["boris_variant"], "synchronized");
    assert_eq!(md["config_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn environment_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("env");
    let out = cpdsym(
        &["run"],
        &[("CPDSYM_PRESET", "p1-symplectic"), ("CPDSYM_OUT_DIR", out_dir.to_str().unwrap()), ("CPDSYM_SEED", "9")],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("symplectic.csv").exists());
    let md: serde_json::Value = serde_json::from_slice(&std::fs::read(out_dir.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(md["config"]["seed"], 9);
}

#[test]
fn oracle_disagreement_exits_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let body = SMALL.replace("\"t_end\": 1.0", "\"t_end\": 1.0, \"oracle\": {\"agreement_tol\": 0.0}");
    let cfg = write_config(dir.path(), &body);
    let out = cpdsym(&["converge", "--config", &cfg, "--out-dir", dir.path().join("o").to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let run = |jobs: &str| {
        let out_dir = dir.path().join(format!("j{jobs}"));
        let out = cpdsym(&["converge", "--config", &cfg, "--out-dir", out_dir.to_str().unwrap(), "--jobs", jobs], &[]);
        assert!(out.status.success());
        ["converge.csv", "slopes.csv"].map(|f| std::fs::read(out_dir.join(f)).unwrap())
    };
    assert_eq!(run("1"), run("3"));
}
