use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(mode: &str, config: &str, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_telegraphnet"))
        .arg(mode)
        .arg("--config")
        .arg(configs().join(config))
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn run_ok(mode: &str, config: &str, out: &Path, extra: &[&str]) -> String {
    let o = run(mode, config, out, extra);
    assert!(
        o.status.success(),
        "{mode} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn read_rows(path: &Path) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap_or(f64::NAN)).collect())
        .collect()
}

#[test]
fn every_bundled_config_runs() {
    let cases = [
        ("simulate", "simulate.toml", vec!["simulate_trajectory.csv", "simulate_traces.csv", "simulate_voltage.svg"]),
        ("energy-check", "energy_check.toml", vec!["energy_check.csv", "energy_check_derivatives.csv", "energy_check.svg"]),
        ("carleman-check", "carleman_check.toml", vec!["carleman_check.csv", "carleman_check.svg"]),
        (
            "reconstruct-direct",
            "reconstruct_direct.toml",
            vec!["reconstruct_direct.csv", "reconstruct_direct_truth.csv", "reconstruct_direct.svg"],
        ),
        (
            "reconstruct-lsq",
            "reconstruct_lsq.toml",
            vec!["reconstruct_lsq.csv", "reconstruct_lsq_history.csv", "reconstruct_lsq_history.svg"],
        ),
        ("stability", "stability.toml", vec!["stability.csv", "stability.svg"]),
    ];
    for (mode, config, files) in cases {
        let dir = TempDir::new().unwrap();
        let stdout = run_ok(mode, config, dir.path(), &["--plot"]);
        assert!(stdout.starts_with(&format!("{mode}: ")), "{stdout}");
        for f in files {
            assert!(dir.path().join(f).is_file(), "{mode} did not write {f}");
        }
    }
}

#[test]
fn simulated_bump_travels_right() {
    let dir = TempDir::new().unwrap();
    run_ok("simulate", "simulate.toml", dir.path(), &[]);
    let rows = read_rows(&dir.path().join("simulate_trajectory.csv"));
    let t_end = rows.iter().map(|r| r[2]).fold(0.0, f64::max);
    assert_eq!(t_end, 0.5);
    let bump = |x: f64| (-(x - 0.6 - t_end).powi(2) / (2.0 * 0.06 * 0.06)).exp();
    let mut worst: f64 = 0.0;
    for r in rows.iter().filter(|r| r[2] == t_end) {
        worst = worst.max((r[3] - bump(r[1])).abs()).max((r[4] - bump(r[1])).abs());
    }
    assert!(worst < 0.02, "max deviation {worst}");
}

#[test]
fn violated_geometry_is_reported() {
    let dir = TempDir::new().unwrap();
    let o = run("carleman-check", "carleman_violated.toml", dir.path(), &[]);
    assert!(!o.status.success());
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.starts_with("error: carleman:"), "{stderr}");
    assert!(stderr.contains("Assumption 1"), "{stderr}");
    assert!(!dir.path().join("carleman_check.csv").exists());
}

#[test]
fn mode_mismatch_is_rejected() {
    let dir = TempDir::new().unwrap();
    let o = run("stability", "simulate.toml", dir.path(), &[]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: config:"));
}

#[test]
fn reruns_are_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    run_ok("reconstruct-lsq", "reconstruct_lsq.toml", a.path(), &["--threads", "1"]);
    run_ok("reconstruct-lsq", "reconstruct_lsq.toml", b.path(), &["--threads", "3"]);
    for f in ["reconstruct_lsq.csv", "reconstruct_lsq_history.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
}

#[test]
fn stability_table_has_one_row_per_epsilon() {
    let dir = TempDir::new().unwrap();
    let stdout = run_ok("stability", "stability.toml", dir.path(), &[]);
    assert!(stdout.contains("over 4 of 4 rows"), "{stdout}");
    let rows = read_rows(&dir.path().join("stability.csv"));
    let eps: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(eps, [0.01, 0.02, 0.05, 0.1]);
    assert!(rows.iter().all(|r| r[3] > 0.0 && r[3].is_finite()));
}

#[test]
fn thread_variable_must_be_a_count() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_telegraphnet"))
        .args(["simulate", "--config"])
        .arg(configs().join("simulate.toml"))
        .arg("--out")
        .arg(dir.path())
        .env("TELEGRAPHNET_THREADS", "many")
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("TELEGRAPHNET_THREADS"));
}
