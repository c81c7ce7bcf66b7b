use std::path::PathBuf;
use std::process::{Command, Output};

fn case(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../cases")
        .join(name)
        .display()
        .to_string()
}

fn mase(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mase"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn column<'a>(header: &[String], rows: &'a [Vec<String>], name: &str) -> Vec<&'a str> {
    let i = header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("missing column {name}"));
    rows.iter().map(|r| r[i].as_str()).collect()
}

#[test]
fn gen_measurements_is_deterministic_and_counts_rows() {
    let c = case("case14.m");
    let a = mase(&["gen-measurements", "--case", &c, "--seed", "4"]);
    let b = mase(&["gen-measurements", "--case", &c, "--seed", "4"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let rows: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 3 * 14 + 4 * 20);
}

#[test]
fn run_json_reports_repeats_and_warm_up_mean() {
    let out = mase(&[
        "run",
        "--case",
        &case("case14.m"),
        "--method",
        "centralized",
        "--repeats",
        "3",
        "--output-format",
        "json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let runs = v["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    let totals: Vec<f64> = runs
        .iter()
        .map(|r| r["timings"]["total"].as_f64().unwrap())
        .collect();
    let mean = v["mean"]["total"].as_f64().unwrap();
    assert!((mean - (totals[1] + totals[2]) / 2.0).abs() < 1e-15);
    assert_eq!(v["converged"], true);
}

#[test]
fn single_repeat_mean_is_the_run() {
    let out = mase(&[
        "run",
        "--case",
        &case("case14.m"),
        "--repeats",
        "1",
        "--output-format",
        "json",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["mean"]["total"], v["runs"][0]["timings"]["total"]);
}

#[test]
fn run_csv_has_per_run_and_mean_rows() {
    let out = mase(&[
        "run",
        "--case",
        &case("case14.m"),
        "--k",
        "3",
        "--repeats",
        "2",
    ]);
    assert!(out.status.success());
    let (header, rows) = csv_rows(&stdout(&out));
    assert_eq!(column(&header, &rows, "run"), ["1", "2", "mean"]);
    for name in [
        "iterations",
        "objective",
        "residual_norm",
        "total_s",
        "boundary_dim",
    ] {
        column(&header, &rows, name);
    }
}

#[test]
fn methods_agree_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let meas = dir.path().join("m.csv");
    let part = dir.path().join("p.json");
    let c = case("case14.m");
    assert!(mase(&[
        "gen-measurements",
        "--case",
        &c,
        "--seed",
        "9",
        "--out",
        meas.to_str().unwrap()
    ])
    .status
    .success());
    assert!(mase(&[
        "partition",
        "--case",
        &c,
        "--k",
        "3",
        "--seed",
        "2",
        "--out",
        part.to_str().unwrap()
    ])
    .status
    .success());
    let objective = |method: &str| {
        let out = mase(&[
            "run",
            "--case",
            &c,
            "--measurements",
            meas.to_str().unwrap(),
            "--partition",
            part.to_str().unwrap(),
            "--method",
            method,
            "--repeats",
            "1",
            "--output-format",
            "json",
        ]);
        assert!(out.status.success());
        serde_json::from_slice::<serde_json::Value>(&out.stdout).unwrap()["objective"]
            .as_f64()
            .unwrap()
    };
    let (a, b) = (objective("centralized"), objective("multiarea"));
    assert!((a - b).abs() <= 1e-6 * a.abs());
}

#[test]
fn sweep_k_table() {
    let out = mase(&[
        "sweep-k",
        "--case",
        &case("case118.m"),
        "--k",
        "1,2,3,4,6",
        "--repeats",
        "2",
    ]);
    assert!(out.status.success());
    let (header, rows) = csv_rows(&stdout(&out));
    let dims: Vec<usize> = column(&header, &rows, "boundary_dim")
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    let cuts: Vec<usize> = column(&header, &rows, "cut_branches")
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!((dims[0], cuts[0]), (0, 0));
    let shares = column(&header, &rows, "coordinator_share");
    assert!(shares[0].parse::<f64>().unwrap() < 0.05);
    for i in 0..rows.len() {
        let share: f64 = shares[i].parse().unwrap();
        assert!((0.0..=1.0).contains(&share));
        for j in 0..rows.len() {
            if cuts[i] < cuts[j] {
                assert!(
                    dims[i] < dims[j],
                    "k rows {i},{j}: cuts {cuts:?} dims {dims:?}"
                );
            }
        }
    }
}

#[test]
fn sweep_k_skips_infeasible_k() {
    let out = mase(&[
        "sweep-k",
        "--case",
        &case("case14.m"),
        "--k",
        "2,99",
        "--repeats",
        "1",
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("k=99"));
    let (header, rows) = csv_rows(&stdout(&out));
    assert!(column(&header, &rows, "status")[1].starts_with("infeasible"));
}

#[test]
fn mask_table_counts_removed_rows() {
    let out = mase(&[
        "mask",
        "--case",
        &case("case14.m"),
        "--repeats",
        "1",
        "--output-format",
        "json",
    ]);
    assert!(out.status.success());
    let rows: Vec<serde_json::Value> = serde_json::from_slice(&out.stdout).unwrap();
    let fam: Vec<_> = rows
        .iter()
        .map(|r| r["family"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(fam, ["None", "Pf", "Pt", "Qf", "Qt"]);
    assert_eq!(rows[0]["removed_rows"], 0);
    for r in &rows[1..] {
        assert_eq!(r["removed_rows"], 20);
        assert_eq!(r["converged"], true);
    }
}

#[test]
fn compare_reports_diffs() {
    let out = mase(&[
        "compare",
        "--case",
        &case("case14.m"),
        "--k",
        "3",
        "--repeats",
        "1",
    ]);
    assert!(out.status.success());
    let (header, rows) = csv_rows(&stdout(&out));
    assert_eq!(
        column(&header, &rows, "method"),
        ["centralized", "multiarea"]
    );
    let diff: f64 = column(&header, &rows, "max_state_diff")[0].parse().unwrap();
    assert!(diff < 1e-9);
}

#[test]
fn nonconvergence_sets_exit_code() {
    let out = mase(&[
        "run",
        "--case",
        &case("case14.m"),
        "--max-iters",
        "1",
        "--repeats",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_case_is_a_diagnosed_failure() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.m");
    std::fs::write(
        &bad,
        "mpc.baseMVA = 100;\nmpc.bus = [1 3 0 0 0 0 1 1 0 1;\n",
    )
    .unwrap();
    let out = mase(&["run", "--case", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}
