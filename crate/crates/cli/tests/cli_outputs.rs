use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use kdvfd_cli::{convergence_sweep, run_experiment, ExperimentPreset, RunSummary};

fn kdvfd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdvfd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_csv(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

fn snapshot_names(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("snap_t"))
        .collect();
    names.sort();
    names
}

#[test]
fn run_writes_snapshots_diagnostics_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = kdvfd(&["run", "--preset", "soliton1", "--n", "200", "--record-every", "10", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let summary: RunSummary =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.preset, "soliton1");
    assert_eq!(summary.n_cells, 200);
    assert!(summary.all_ok);
    assert!(summary.e_percent.unwrap() > 0.0);
    assert_eq!(summary.compare_time, 1.0);

    let names = snapshot_names(&out);
    assert_eq!(names.len(), summary.steps.div_ceil(10) + 1);
    assert!(names.contains(&"snap_t-1.0000000000000000e0.csv".to_string()));
    assert!(names.contains(&"snap_t1.0000000000000000e0.csv".to_string()));

    let (header, rows) = read_csv(&out.join("snap_t-1.0000000000000000e0.csv"));
    assert_eq!(header, "x,u");
    assert_eq!(rows.len(), 200);
    assert_eq!(rows[0][0], -10.0);
    assert!((rows[199][0] - 9.9).abs() < 1e-12);
    for r in &rows {
        assert_eq!(r[1], kdvfd_core::one_soliton(r[0], -1.0));
    }

    let text = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "step,t,l2,sup,mass,dissipation,l2_ok,entropy_ok");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), names.len());
    assert!(rows.iter().all(|r| r.ends_with("true,true")));
}

#[test]
fn zero_length_run_writes_only_the_initial_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"x_left": -1, "x_right": 1, "n_cells": 16, "t_end": 0, "initial_data": "zero"}"#,
    );
    let out = tmp.path().join("out");
    let o = kdvfd(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(snapshot_names(&out), ["snap_t0.0000000000000000e0.csv"]);
    let (_, rows) = read_csv(&out.join("snap_t0.0000000000000000e0.csv"));
    assert_eq!(rows.len(), 16);
    assert!(rows.iter().all(|r| r[1] == 0.0));
}

#[test]
fn oracle_table_has_zero_errors() {
    let o = kdvfd(&["table", "--preset", "soliton1", "--n", "100,200,400", "--oracle"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "N,E,rate");
    assert_eq!(lines.len(), 4);
    for line in &lines[1..] {
        let e: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(e, 0.0, "{line}");
    }
}

#[test]
fn two_resolutions_give_one_rate() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("tables/t.csv");
    let o = kdvfd(&["table", "--n", "500,1000", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(&path).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "500");
    assert_eq!(rows[0][2], "");
    let rate: f64 = rows[1][2].parse().unwrap();
    assert!(rate > 0.5 && rate < 1.2, "{rate}");
}

#[test]
fn reruns_are_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let o = kdvfd(&["run", "--preset", "l2data", "--n", "128", "--record-every", "5", "--out", dir.to_str().unwrap()]);
        assert!(o.status.success());
    }
    let names = snapshot_names(&a);
    assert_eq!(names, snapshot_names(&b));
    for name in names.iter().map(String::as_str).chain(["diagnostics.csv", "summary.json"]) {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn sweep_does_not_depend_on_order_of_completion() {
    let base = ExperimentPreset::soliton1(100);
    let forward = convergence_sweep(&base, &[100, 200, 400], false).unwrap();
    let again = convergence_sweep(&base, &[100, 200, 400], false).unwrap();
    assert_eq!(forward, again);
    assert!(forward.ledger_ok);
}

#[test]
fn ledger_failure_gives_exit_code_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"preset": "soliton1", "n_cells": 200, "dt_rule": "k2", "k": 50}"#,
    );
    let out = tmp.path().join("out");
    let o = kdvfd(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let summary: RunSummary =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(!summary.all_ok);
    assert!(summary.entropy_failures > 0);
}

#[test]
fn bad_input_gives_exit_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = kdvfd(&["run", "--preset", "soliton7", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("soliton7"));

    let cfg = write_config(tmp.path(), r#"{"preset": "soliton1", "cfl_delta": 1.5}"#);
    let o = kdvfd(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cfl_delta"));

    let o = kdvfd(&["table", "--preset", "l2data", "--n", "100"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn library_run_matches_binary_output() {
    let tmp = tempfile::tempdir().unwrap();
    let lib_dir = tmp.path().join("lib");
    let bin_dir = tmp.path().join("bin");
    let mut p = ExperimentPreset::soliton2(400);
    p.config.record_every = 50;
    let report = run_experiment(&p, &lib_dir).unwrap();
    let o = kdvfd(&["run", "--preset", "soliton2", "--n", "400", "--record-every", "50", "--out", bin_dir.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(
        fs::read(lib_dir.join("summary.json")).unwrap(),
        fs::read(bin_dir.join("summary.json")).unwrap()
    );
    assert_eq!(report.snapshot_files.len(), snapshot_names(&bin_dir).len());
}
