use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kit(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pinvit-kit"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("PINVIT_KIT_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn discrete_interval_lambda1(n: usize) -> f64 {
    let h = 1.0 / (n as f64 + 1.0);
    4.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2)
}

#[test]
fn solve_interval_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = kit(&["solve", "--problem", "interval", "--n", "63", "--tau", "1e-8"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path());
    let exact = discrete_interval_lambda1(63);
    let mu = s["mu"].as_f64().unwrap();
    assert!((mu - exact).abs() <= 1e-8 * exact, "mu = {mu}, exact = {exact}");
    assert!(s["rho"].as_f64().unwrap() <= 1e-8);
    assert_eq!(s["failed_bound_checks"].as_u64(), Some(0));
    let csv = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert!(csv.starts_with("step,mu,mu_eps,rho_eps,epsilon,halvings,bound_ok\n"));
    assert!(dir.path().join("convergence.json").exists());
}

#[test]
fn solve_single_node_returns_diagonal_entry() {
    let dir = tempfile::tempdir().unwrap();
    let out = kit(&["solve", "--problem", "interval", "--n", "1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(summary(dir.path())["mu"].as_f64(), Some(8.0));
}

#[test]
fn solve_lshape_coarse_is_near_reference() {
    let dir = tempfile::tempdir().unwrap();
    let out = kit(&["solve", "--problem", "lshape", "--h", "2^-4", "--tau", "1e-6"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mu = summary(dir.path())["mu"].as_f64().unwrap();
    assert!((mu - 9.639723844).abs() / 9.639723844 < 0.05, "mu = {mu}");
}

#[test]
fn solve_outputs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["solve", "--problem", "square", "--h", "2^-4", "--seed", "9"];
    assert!(kit(&args, a.path()).status.success());
    assert!(kit(&args, b.path()).status.success());
    for f in ["convergence.csv", "convergence.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn solve_reports_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = kit(&["solve", "--problem", "lshape", "--h", "0.3"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn manifest_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("run.conf");
    fs::write(&manifest, "# experiment\nproblem = interval\nn = 15\ntau = 1e-9\n").unwrap();
    let cfg = manifest.to_str().unwrap();
    assert!(kit(&["solve", "--config", cfg], dir.path()).status.success());
    assert_eq!(summary(dir.path())["dim"].as_u64(), Some(15));
    assert!(kit(&["solve", "--config", cfg, "--n", "7"], dir.path()).status.success());
    assert_eq!(summary(dir.path())["dim"].as_u64(), Some(7));
}

#[test]
fn out_dir_defaults_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_pinvit-kit"))
        .args(["solve", "--problem", "interval", "--n", "7"])
        .env("PINVIT_KIT_OUT_DIR", dir.path())
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn verify_reports_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["verify", "--trials", "100", "--seed", "11"];
    let ra = kit(&args, a.path());
    let rb = kit(&args, b.path());
    assert!(ra.status.success(), "{}", String::from_utf8_lossy(&ra.stdout));
    assert!(rb.status.success());
    assert_eq!(ra.stdout, rb.stdout);
    let name = "verify_report.json";
    assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
}

#[test]
fn verify_catches_injected_violation() {
    let dir = tempfile::tempdir().unwrap();
    let out = kit(&["verify", "--trials", "40", "--inject-violation"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let table = String::from_utf8_lossy(&out.stdout);
    let row = table.lines().find(|l| l.starts_with("residual-perturbation")).unwrap();
    assert!(row.ends_with("FAIL"), "{row}");
    let cx: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("counterexample.json")).unwrap()).unwrap();
    assert!(cx["v"].as_array().is_some_and(|v| !v.is_empty()));
    assert!(cx["eps"].as_f64().is_some());
    assert!(cx["a"].as_array().is_some_and(|a| !a.is_empty()));
}

#[test]
fn verify_with_zero_trials_passes_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let out = kit(&["verify", "--trials", "0"], dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("vacuously"));
}

#[test]
fn verify_fails_on_logged_bound_violation() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("bad.csv");
    fs::write(
        &log,
        "step,mu,mu_eps,rho_eps,epsilon,halvings,bound_ok\n0,2e0,2e0,1e-1,1e-2,3,true\n1,1.9e0,1.9e0,1e-1,1e-2,3,false\n",
    )
    .unwrap();
    let out = kit(&["verify", "--trials", "0", "--audit-log", log.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("steps [1]"));
}

fn sweep_rows(dir: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("param,lambda1_discrete,steps_to_tau,worst_ratio,q_squared"));
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn h_sweep_approaches_pi_squared_from_below() {
    let dir = tempfile::tempdir().unwrap();
    let out = kit(&["sweep", "--kind", "h", "--values", "2^-6,2^-3,2^-4,2^-5", "--jobs", "2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = sweep_rows(dir.path());
    let params: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(params, [0.015625, 0.03125, 0.0625, 0.125]);
    let lambdas: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    let pi2 = std::f64::consts::PI.powi(2);
    assert!(lambdas.iter().all(|&l| l < pi2));
    // smaller h first, so the values decrease down the table
    assert!(lambdas.windows(2).all(|w| w[0] > w[1]), "{lambdas:?}");
    assert!(dir.path().join("dof_vs_error.csv").exists());
}

#[test]
fn gamma_sweep_contraction_stays_below_q_squared() {
    let dir = tempfile::tempdir().unwrap();
    let out = kit(&["sweep", "--kind", "gamma", "--n", "31", "--values", "0.3,0.5,0.7,0.9"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = sweep_rows(dir.path());
    assert_eq!(rows.len(), 4);
    for r in rows {
        let worst: f64 = r[3].parse().unwrap();
        let q2: f64 = r[4].parse().unwrap();
        assert!(worst <= q2, "{r:?}");
    }
}

#[test]
fn empty_sweep_gives_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = kit(&["sweep", "--values", ""], dir.path());
    assert!(out.status.success());
    assert!(sweep_rows(dir.path()).is_empty());
}

#[test]
fn failed_sweep_point_keeps_other_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = kit(&["sweep", "--kind", "gamma", "--n", "15", "--values", "0.5,1.5"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(sweep_rows(dir.path()).len(), 1);
}
