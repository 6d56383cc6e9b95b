//! End-to-end subprocess tests of the `invwave` binary.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_invwave"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("invwave-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn simulate_then_estimate_roundtrip() {
    let dir = scratch("roundtrip");
    let bundle = dir.join("bundle");
    let status = bin()
        .args(["simulate", "--j-max", "7", "--delta", "1e-3", "--epsilon", "1e-5"])
        .args(["--seed", "4", "--out"])
        .arg(&bundle)
        .status()
        .unwrap();
    assert!(status.success());
    for file in ["operator.gmat", "data.csv", "truth.csv", "meta.json"] {
        assert!(bundle.join(file).exists(), "missing {file}");
    }

    let est = dir.join("est");
    let out = bin()
        .args(["estimate", "--method", "nl2", "--J", "invertible", "--bundle"])
        .arg(&bundle)
        .arg("--out")
        .arg(&est)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let diag: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(est.join("diagnostics.json")).unwrap())
            .unwrap();
    assert!(diag["rmse_vs_truth"].as_f64().unwrap() < 0.15);
    assert!(est.join("estimate.csv").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn experiment_from_config_file() {
    let dir = scratch("experiment");
    let config = dir.join("config.toml");
    std::fs::write(
        &config,
        r#"
j_max = 6
delta_grid = [1e-3]
epsilon_grid = [1e-4]
replications = 3
base_seed = 9

[kernel]
kind = "diagonal"
t = 1.0

[signal]
kind = "smooth"
frequency = 2

[[methods]]
kind = "linear"
j = 3
t = 1.0

[[methods]]
kind = "nl2"
j = { invertible_cap = 5 }
t = 1.0
"#,
    )
    .unwrap();
    let report = dir.join("report.json");
    let out = bin()
        .args(["experiment", "--format", "json", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&report)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed["cells"].as_array().unwrap().len(), 2);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn bad_config_exits_nonzero() {
    let dir = scratch("bad");
    let config = dir.join("bad.toml");
    std::fs::write(&config, "this is not an experiment\n").unwrap();
    let out = bin()
        .args(["experiment", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.join("r.csv"))
        .output()
        .unwrap();
    assert!(!out.status.success());

    // missing bundle directory
    let out = bin()
        .args(["estimate", "--method", "linear", "--j", "3", "--bundle"])
        .arg(dir.join("nope"))
        .arg("--out")
        .arg(dir.join("est"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn rates_reports_slope_near_theory() {
    let dir = scratch("rates");
    let report = dir.join("rates.csv");
    let out = bin()
        .args(["rates", "--reps", "20", "--points", "7", "--out"])
        .arg(&report)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let line = stdout
        .lines()
        .find(|l| l.starts_with("fitted slope"))
        .expect("slope line");
    let slope: f64 = line.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!((slope - 0.5).abs() < 0.2, "slope {slope}");
    assert!(report.exists());
    assert!(report.with_extension("fit.json").exists());
    std::fs::remove_dir_all(&dir).ok();
}
