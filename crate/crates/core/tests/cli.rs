use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const GA_CONFIG: &str = r#"
controller = "ga"
k1 = 1.0
k2 = 10.0
dt = 1e-2
t_end = 20.0
output_dir = "out"

[field]
kind = "quadratic"

[init]
poses = [[4.0, 3.0, 30.0], [-2.0, 1.0, 90.0]]
"#;

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_source-seek")).current_dir(dir).args(args).output().expect("spawn")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn simulate_writes_outputs_and_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "ga.toml", GA_CONFIG);
    let out = cli(dir.path(), &["simulate", "--config", "ga.toml", "--traj-out", "traj"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["summary.json", "boxplot.csv", "trials.csv", "overlay.csv"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
    let traj = fs::read_to_string(dir.path().join("traj/g0_trial0000.csv")).unwrap();
    assert_eq!(traj.lines().next(), Some("t,z1,z2,theta,u,omega,J,gx,gy"));
    assert_eq!(traj.lines().count(), 2002);
    assert!(dir.path().join("traj/g0_trial0001.csv").exists());
    let trials = fs::read_to_string(dir.path().join("out/trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 3);
}

#[test]
fn montecarlo_is_deterministic_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "ga.toml", &GA_CONFIG.replace("[init]\nposes = [[4.0, 3.0, 30.0], [-2.0, 1.0, 90.0]]\n", ""));
    let run = |seed: &str| {
        let out = cli(dir.path(), &["montecarlo", "--config", "ga.toml", "--trials", "12", "--seed", seed]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read(dir.path().join("out/summary.json")).unwrap()
    };
    let a = run("5");
    let b = run("5");
    let c = run("6");
    assert_eq!(a, b);
    assert_ne!(a, c);
    let summary: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(summary["trials"], 12);
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 64);
    let boxplot = fs::read_to_string(dir.path().join("out/boxplot.csv")).unwrap();
    assert_eq!(boxplot.lines().next(), Some("group,min,q1,median,q3,max"));
}

#[test]
fn config_errors_exit_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "empty.toml", "");
    write(dir.path(), "bad.toml", &GA_CONFIG.replace("k1 = 1.0", "k1 = -1.0"));
    write(dir.path(), "unknown.toml", &format!("{GA_CONFIG}\nbogus = 1\n"));
    for name in ["empty.toml", "bad.toml", "unknown.toml", "missing.toml"] {
        let out = cli(dir.path(), &["simulate", "--config", name]);
        assert_eq!(out.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(!dir.path().join("out").exists());
    let out = cli(dir.path(), &["gradcheck", "--field", "nope", "--points", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dither_step_violation_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let esc = GA_CONFIG.replace("controller = \"ga\"", "controller = \"esc\"\na = 0.2\nomega0 = 20.0\nh = 3.0\nc_z1 = 0.5\nc_z2 = 0.5");
    write(dir.path(), "fast.toml", &esc);
    let out = cli(dir.path(), &["simulate", "--config", "fast.toml"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "blocker", "");
    write(dir.path(), "ga.toml", &GA_CONFIG.replace("output_dir = \"out\"", "output_dir = \"blocker/out\""));
    let out = cli(dir.path(), &["simulate", "--config", "ga.toml"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn avgcheck_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = GA_CONFIG
        .replace("controller = \"ga\"", "controller = \"esc\"\na = 0.2\nomega0 = 10.0\nh = 3.0\nc_z1 = 0.5\nc_z2 = 0.5")
        .replace("dt = 1e-2", "dt = 1e-3");
    write(dir.path(), "esc.toml", &cfg);
    let out = cli(dir.path(), &["avgcheck", "--config", "esc.toml"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/avgcheck.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("tau,zt1,zt2,z1avg_full,z2avg_full,err"));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("out/avgcheck.json")).unwrap()).unwrap();
    assert!(json["sup_error"].as_f64().unwrap().is_finite());
}

#[test]
fn gradcheck_reports_each_field() {
    let dir = tempfile::tempdir().unwrap();
    for field in ["quadratic", "nonquad_a", "nonquad_b", "fan"] {
        let out = cli(dir.path(), &["gradcheck", "--field", field, "--points", "200"]);
        assert!(out.status.success(), "{field}: {}", String::from_utf8_lossy(&out.stdout));
        let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(report["pass"], true);
        assert_eq!(report["points"], 200);
    }
}
