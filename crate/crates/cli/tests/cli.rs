use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets").join(name)
}

fn htq(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_htq"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn htq")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap().iter().map(str::to_owned).collect()).collect()
}

const MINIMAL: &str = r#"{
  "version": 1,
  "seed": 3,
  "simulate": {
    "params": {"L": 1.0, "m": 2.0, "lambda": 0.0,
               "phi": {"kind": "dirac", "point": 0.0},
               "psi": {"kind": "dirac", "point": 1.0},
               "x0": [0.25], "q0": [0.5]},
    "horizon": 2.0
  }
}"#;

#[test]
fn minimal_simulate_writes_trace_and_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", MINIMAL);
    let out = htq(&["simulate", "--config", cfg.to_str().unwrap(), "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut files: Vec<String> = fs::read_dir(dir.path().join("o"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    assert_eq!(files, ["manifest.json", "summary.json", "trace.csv"]);
    let s = json(&dir.path().join("o/summary.json"));
    assert_eq!(s["departures"], 1);
    assert_eq!(s["arrivals"], 0);
    let trace = csv_rows(&dir.path().join("o/trace.csv"));
    let departures: Vec<_> = trace.iter().filter(|r| r[1] == "departure").collect();
    assert_eq!(departures.len(), 1);
    // one vehicle alone on a unit ring moves at speed 1
    let t: f64 = departures[0][0].parse().unwrap();
    assert!((t - 0.5).abs() < 1e-9, "{t}");
}

#[test]
fn linear_preset_busy_period_matches_oracle() {
    let dir = TempDir::new().unwrap();
    let p = preset("fig-linear-busy-period.json");
    let out = htq(&["simulate", "--config", p.to_str().unwrap(), "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(&dir.path().join("o/summary.json"));
    let est = &s["busy_periods"]["mean_duration"];
    let (lo, hi) = (est["ci95"]["lo"].as_f64().unwrap(), est["ci95"]["hi"].as_f64().unwrap());
    assert!(lo <= 2.0 && 2.0 <= hi, "CI {lo}..{hi}");
    assert_eq!(s["linear_oracle"]["mean_busy_period"], 2.0);
    assert!((s["idle_fraction"].as_f64().unwrap() - 0.5).abs() < 0.02);
}

#[test]
fn same_seed_gives_identical_trace() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"version": 1, "seed": 11, "simulate": {
            "params": {"L": 1.0, "m": 1.5, "lambda": 2.0,
                       "phi": {"kind": "uniform", "lo": 0.0, "hi": 1.0},
                       "psi": {"kind": "uniform", "lo": 0.0, "hi": 1.0}},
            "horizon": 10.0}}"#,
    );
    let c = cfg.to_str().unwrap();
    assert!(htq(&["simulate", "--config", c, "--out", "a"], dir.path()).status.success());
    assert!(htq(&["simulate", "--config", c, "--out", "b", "--jobs", "2"], dir.path()).status.success());
    let a = fs::read(dir.path().join("a/trace.csv")).unwrap();
    let b = fs::read(dir.path().join("b/trace.csv")).unwrap();
    assert!(a.len() > 1000);
    assert_eq!(a, b);
    assert!(htq(&["simulate", "--config", c, "--out", "c", "--seed", "12"], dir.path()).status.success());
    assert_ne!(a, fs::read(dir.path().join("c/trace.csv")).unwrap());
}

#[test]
fn manifest_reproduces_the_run() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", MINIMAL);
    assert!(htq(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "5", "--out", "a"], dir.path())
        .status
        .success());
    let m = json(&dir.path().join("a/manifest.json"));
    assert_eq!(m["seed"], 5);
    assert_eq!(m["manifest"]["tool"], "htq");
    assert_eq!(m["manifest"]["command"], "simulate");
    assert_eq!(m["manifest"]["tool_version"], env!("CARGO_PKG_VERSION"));
    // resolved defaults are echoed
    assert_eq!(m["simulate"]["reps"], 1);
    assert!(htq(&["simulate", "--config", "a/manifest.json", "--out", "b"], dir.path())
        .status
        .success());
    for f in ["trace.csv", "summary.json"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn superlinear_preset_curve_decreases() {
    let dir = TempDir::new().unwrap();
    let p = preset("fig-superlinear-empty.json");
    let out = htq(&["bounds", "--config", p.to_str().unwrap(), "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("o/superlinear.csv"));
    let lam: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(lam.len() >= 5);
    assert!(lam.iter().all(|&l| l > 0.0));
    assert!(lam.windows(2).all(|w| w[1] < w[0]), "{lam:?}");
}

#[test]
fn lambda_star_preset() {
    let dir = TempDir::new().unwrap();
    let p = preset("fig-lambda-star.json");
    let out = htq(&["bounds", "--config", p.to_str().unwrap(), "--out", "o"], dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("lambda_star = 0.5"));
    let rows = csv_rows(&dir.path().join("o/lambda_star.csv"));
    assert_eq!(rows[0][4].parse::<f64>().unwrap(), 0.5);
}

#[test]
fn sublinear_policy_curve_explodes_near_zero() {
    let dir = TempDir::new().unwrap();
    let p = preset("fig-sublinear-policy.json");
    assert!(htq(&["bounds", "--config", p.to_str().unwrap(), "--out", "o"], dir.path())
        .status
        .success());
    let rows = csv_rows(&dir.path().join("o/sublinear_perturbed.csv"));
    // eta = 3 exceeds 2R = 2; eta = 1 does not
    let curve = |eta: &str| -> Vec<f64> {
        rows.iter().filter(|r| r[1] == eta).map(|r| r[2].parse().unwrap()).collect()
    };
    let big = curve("3.0");
    assert!(big[0] > 1e20, "{big:?}");
    assert!(big.windows(2).all(|w| w[1] <= w[0]));
    assert!(curve("1.0").iter().all(|&l| l == 2.0));
}

#[test]
fn plot_from_bounds_output_and_overlay() {
    let dir = TempDir::new().unwrap();
    let p = preset("fig-sublinear-policy.json");
    assert!(htq(&["bounds", "--config", p.to_str().unwrap(), "--out", "b"], dir.path())
        .status
        .success());
    let out = htq(
        &["plot", "b/sublinear_perturbed.csv", "--group-by", "eta", "--log-y", "--out", "p"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let svg = fs::read_to_string(dir.path().join("p/sublinear_perturbed.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 4);
    assert!(svg.contains("eta=10"));

    write(dir.path(), "bound.csv", "m,lambda\n1.5,0.2\n2,0.1\n");
    write(dir.path(), "simulation.csv", "m,lambda\n1.5,0.9\n2,0.7\n");
    let out = htq(
        &["plot", "bound.csv", "simulation.csv", "--y", "lambda", "--overlay", "--out", "p"],
        dir.path(),
    );
    assert!(out.status.success());
    let svg = fs::read_to_string(dir.path().join("p/overlay.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains(">bound<") && svg.contains(">simulation<"));
}

#[test]
fn plot_errors() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "empty.csv", "m,lambda_lower\n");
    let out = htq(&["plot", "empty.csv", "--out", "p"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no rows"));

    write(dir.path(), "t.csv", "m,y\n1,2\n");
    let out = htq(&["plot", "t.csv", "--out", "p"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing column `lambda_lower`"));
}

#[test]
fn validate_passes_by_default() {
    let dir = TempDir::new().unwrap();
    let out = htq(&["validate", "--out", "v"], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(!stdout.contains("FAIL"));
    assert!(stdout.contains("pinsker_m0.9") && stdout.contains("[report-only]"));
    assert!(dir.path().join("v/validate.json").exists());
}

#[test]
fn validate_catches_a_loose_integrator() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"version": 1, "validate": {"rtol": 1e-2}}"#);
    let out = htq(&["validate", "--config", cfg.to_str().unwrap(), "--out", "v"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let line = stdout.lines().find(|l| l.contains("sim.rate_monotone")).unwrap();
    assert!(line.starts_with("FAIL"), "{line}");
}

#[test]
fn tandem_preset_respects_the_bound() {
    let dir = TempDir::new().unwrap();
    let p = preset("fig-tandem-superlinear.json");
    let out = htq(&["tandem", "--config", p.to_str().unwrap(), "--out", "t"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(&dir.path().join("t/summary.json"));
    let w = s["perturbation"]["estimate"]["ci95"]["hi"].as_f64().unwrap();
    assert!(w <= s["waiting_bound"].as_f64().unwrap());
    for f in ["waits.csv", "batches.csv", "occupancy.csv"] {
        assert!(csv_rows(&dir.path().join("t").join(f)).len() > 10, "{f}");
    }
}

#[test]
fn config_errors_name_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"version": 1, "simulate": {"params": {"L": 1.0, "m": 2.0, "lambda": "fast",
            "phi": {"kind": "dirac", "point": 0.0}, "psi": {"kind": "dirac", "point": 1.0}}, "horizon": 1.0}}"#,
    );
    let out = htq(&["simulate", "--config", cfg.to_str().unwrap(), "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("simulate.params.lambda"));

    let out = htq(&["simulate", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing `simulate` block"));
}

#[test]
fn invalid_parameters_are_config_errors() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"version": 1, "bounds": {"lambda_star": {"ell": -1.0, "m": 2.0, "R": 1.0, "F": 1.0}}}"#);
    let out = htq(&["bounds", "--config", cfg.to_str().unwrap(), "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn busy_dist_writes_densities_and_masses() {
    let dir = TempDir::new().unwrap();
    let p = preset("fig-linear-busy-period.json");
    assert!(htq(&["busy-dist", "--config", p.to_str().unwrap(), "--out", "o"], dir.path())
        .status
        .success());
    let masses = csv_rows(&dir.path().join("o/masses.csv"));
    // deterministic service 1 at rate 0.5: P(N = 1) = e^-0.5
    assert_eq!(masses[0][0], "1");
    let m1: f64 = masses[0][1].parse().unwrap();
    assert!((m1 - (-0.5f64).exp()).abs() < 1e-9, "{m1}");
    assert_eq!(masses[0][2].parse::<f64>().unwrap(), 1.0);
    let s = json(&dir.path().join("o/summary.json"));
    assert!((s["total_mass"].as_f64().unwrap() - 1.0).abs() < 1e-4);
}
