use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn biphoton(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biphoton")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&stdout(&biphoton(args))).unwrap()
}

fn csv_rows(text: &str) -> Vec<(f64, f64)> {
    text.lines()
        .skip(1)
        .map(|l| {
            let (x, r) = l.split_once(',').unwrap();
            (x.parse().unwrap(), r.parse().unwrap())
        })
        .collect()
}

fn bench_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/bench").join(name)
}

#[test]
fn default_dip_scan() {
    let text = stdout(&biphoton(&["dip-scan"]));
    assert!(text.starts_with("tau1,rate\n"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 201);
    let (_, r) = rows.iter().find(|(t, _)| (t - 0.5).abs() < 1e-9).unwrap();
    assert!(*r <= 0.01, "R(0.5) = {r}");
}

#[test]
fn dip_is_flat_beyond_t0() {
    let rows = csv_rows(&stdout(&biphoton(&["dip-scan", "--tau-min", "1.2", "--tau-max", "2.0"])));
    assert!(rows.iter().all(|(_, r)| (r - 1.0).abs() <= 0.01));
}

#[test]
fn one_step_is_a_usage_error() {
    let o = biphoton(&["dip-scan", "--steps", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("steps must be ≥ 2"));
}

#[test]
fn dip_json_is_versioned() {
    let j = json(&["dip-scan", "--grid-n", "256", "--steps", "5", "--format", "json"]);
    assert_eq!(j["schema_version"], "1.0");
    assert_eq!(j["rates"].as_array().unwrap().len(), 5);
}

#[test]
fn overlap_inside_and_beyond_t0() {
    let inside = json(&["overlap", "--tau1", "0.5"]);
    assert_eq!(inside["interferes"], true);
    let beyond = json(&["overlap", "--tau1", "1.5"]);
    assert_eq!(beyond["interferes"], false);
    assert_eq!(beyond["pointwise_overlap_mass"].as_f64(), Some(0.0));
}

#[test]
fn narrow_window_suppresses_overlap() {
    let mass = |w: &str| json(&["overlap", "--tau1", "0.5", "--window", w])["pointwise_overlap_mass"].as_f64().unwrap();
    assert!(mass("0.1") < mass("4"));
}

#[test]
fn overlap_rejects_csv() {
    assert_eq!(biphoton(&["overlap", "--tau1", "0.5", "--format", "csv"]).status.code(), Some(2));
}

#[test]
fn grid_too_small_is_a_physics_error() {
    let o = biphoton(&["overlap", "--tau1", "1.5", "--grid-n", "65", "--t-min", "-1", "--t-max", "1"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn separable_state_has_no_entropy() {
    let j = json(&["schmidt", "--separable", "--grid-n", "256"]);
    assert_eq!(j["rank"], 1);
    assert!(j["entropy"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn broad_pump_is_entangled() {
    let j = json(&["schmidt", "--sigma-p", "0.1"]);
    let coeffs: Vec<f64> = j["coeffs"].as_array().unwrap().iter().map(|c| c.as_f64().unwrap()).collect();
    assert!(j["schmidt_number"].as_f64().unwrap() > 1.0);
    assert!((coeffs.iter().map(|c| c * c).sum::<f64>() - 1.0).abs() <= 1e-9);
}

#[test]
fn threshold_limits_rank() {
    let j = json(&["schmidt", "--sigma-p", "2", "--grid-n", "256", "--threshold", "0.5"]);
    let above = j["coeffs"].as_array().unwrap().iter().filter(|c| c.as_f64().unwrap() > 0.5).count();
    assert_eq!(j["rank"].as_u64(), Some(above as u64));
    assert!(above >= 1);
}

#[test]
fn regions_csv_layout() {
    let text = stdout(&biphoton(&["regions", "--tau1", "0.5"]));
    assert_eq!(text.lines().next(), Some("term,vertex_index,t_prime,t_minus"));
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn bench_check() {
    let ok = biphoton(&["bench", "check", bench_file("dip.bench").to_str().unwrap()]);
    assert!(stdout(&ok).contains("OK"));
    let bad = biphoton(&["bench", "check", bench_file("malformed/duplicate_pump.bench").to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("line 7"));
}

#[test]
fn bench_run_compensation_scan() {
    let dir = tempfile::tempdir().unwrap();
    let file = bench_file("compensation.bench");
    let run = |out: &Path| {
        stdout(&biphoton(&["bench", "run", file.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]));
        std::fs::read_to_string(out.join("compensation.csv")).unwrap()
    };
    let first = run(dir.path());
    assert!(first.starts_with("delta,rate\n"));
    let rows = csv_rows(&first);
    let (d_min, _) = rows.iter().copied().fold((f64::NAN, f64::INFINITY), |m, (d, r)| if r < m.1 { (d, r) } else { m });
    // One scan step plus half a grid step, since delays snap to the n = 256 grid.
    let tol = 0.01 + 0.5 * 9.0 / 255.0;
    assert!((d_min - 1.0).abs() <= tol, "minimum at {d_min}");
    assert!(dir.path().join("compensation.manifest.json").exists());

    let again = tempfile::tempdir().unwrap();
    assert_eq!(run(again.path()), first);
}

#[test]
fn repeated_runs_are_identical() {
    let args = ["dip-scan", "--grid-n", "256", "--steps", "21", "--format", "json"];
    assert_eq!(stdout(&biphoton(&args)), stdout(&biphoton(&args)));
}
