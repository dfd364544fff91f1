use std::fs;
use std::process::{Command, Output};

use cohom1::cli::output::{parse_trajectory_csv, RunSummary, CSV_HEADER};

fn cohom1(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cohom1"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

#[test]
fn integrate_writes_files_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ah");
    let o = cohom1(&[
        "integrate",
        "--m",
        "1",
        "--k",
        "1",
        "--epsilon",
        "1",
        "--theta",
        "pi/2",
        "--s4",
        "0",
        "--s5",
        "1",
        "--output-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let json = fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(json.contains(r#""label":"AH""#));
    assert!(json.contains(r#""limit_point":"q0""#));
    let summary: RunSummary = serde_json::from_str(&json).unwrap();
    assert_eq!((summary.m, summary.k, summary.epsilon), (1, 1, 1));

    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(CSV_HEADER));
    let rows = parse_trajectory_csv(&csv).unwrap();
    assert_eq!(rows.len(), summary.samples);
    assert!(rows.iter().all(|r| r.t.is_some()));

    let o = cohom1(&["verify", "--replay", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));

    // existing outputs are kept unless forced
    let again = [
        "integrate",
        "--m",
        "1",
        "--k",
        "1",
        "--output-dir",
        out.to_str().unwrap(),
    ];
    assert_eq!(code(&cohom1(&again)), 2);
    let mut forced = again.to_vec();
    forced.push("--force");
    assert_eq!(code(&cohom1(&forced)), 0);
}

#[test]
fn no_reconstruct_leaves_metric_columns_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bare");
    let o = cohom1(&[
        "integrate",
        "--m",
        "1",
        "--k",
        "1",
        "--theta",
        "pi/2",
        "--s4",
        "1",
        "--no-reconstruct",
        "--output-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let line = csv.lines().nth(1).unwrap();
    assert!(line.ends_with(",,,,,"), "{line}");
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# steady run\nm = 1\nk = 1\ntheta = pi/2\ns4 = 1\n").unwrap();
    let o = cohom1(&["classify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["label"], "ACP");

    let o = cohom1(&["classify", "--config", cfg.to_str().unwrap(), "--s4", "0"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["label"], "ALC");
    assert_eq!(v["limit_point"], "q2");
}

#[test]
fn bad_config_exits_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "m = 1\nsigma = 2\n").unwrap();
    let o = cohom1(&["classify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    fs::write(&cfg, "s4 = nan\n").unwrap();
    assert_eq!(
        code(&cohom1(&["classify", "--config", cfg.to_str().unwrap()])),
        2
    );
    assert_eq!(code(&cohom1(&["classify", "--k", "0"])), 2);
    assert_eq!(code(&cohom1(&["classify", "--theta", "4"])), 2);
}

#[test]
fn critical_points_json() {
    let o = cohom1(&["critical-points", "--m", "2", "--epsilon", "1", "--json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let ids: Vec<&str> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["id"].as_str().unwrap())
        .collect();
    for id in ["p0", "p1", "p2", "q1", "q2", "q0"] {
        assert!(ids.contains(&id), "{id} missing from {ids:?}");
    }
    let o = cohom1(&["critical_points", "--m", "1"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn search_commands_emit_json() {
    let o = cohom1(&[
        "search-alpha",
        "--m",
        "0",
        "--k",
        "3",
        "--theta",
        "pi",
        "--tol",
        "1e-2",
        "--no-audit",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["alpha_hat"].as_f64().unwrap() > 1e-3);
    assert!(v["probes"].as_array().unwrap().len() > 5);

    let o = cohom1(&["search_theta", "--m", "1", "--k", "3", "--tol", "1e-10"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["nu2"].as_f64().unwrap() - 0.2).abs() < 1e-2);

    let o = cohom1(&["search-beta", "--m", "1", "--k", "2", "--theta", "0"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["beta_hat"].as_f64(), Some(0.0));

    // an empty bracket is a usage error
    let o = cohom1(&[
        "search-alpha",
        "--m",
        "1",
        "--k",
        "5",
        "--theta",
        "0.05",
        "--hi",
        "1",
        "--no-audit",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn atlas_writes_grid_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("atlas");
    let o = cohom1(&[
        "--jobs",
        "2",
        "atlas",
        "--m",
        "1",
        "--k",
        "1",
        "--thetas",
        "0,pi/2",
        "--s4",
        "0,1",
        "--s5",
        "0",
        "--plots",
        "--output-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("atlas.json")).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 4);
    let svg = fs::read_to_string(out.join("atlas.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("ALC"));
    let plots = fs::read_dir(out.join("plots")).unwrap().count();
    assert_eq!(plots, 8);
}
