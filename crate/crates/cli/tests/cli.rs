use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fractal_spectra::asympt::DEFAULT_PHASE_TOL;
use fractal_spectra::spectral::log_grid;
use fractal_spectra::*;
use serde_json::Value;
use tempfile::TempDir;

const THREE_PIECE: &str =
    r#"{"a": ["1/3", "1/3", "1/3"], "d": [-0.5, 0, -0.5], "beta": [0, 0.5, 0.5]}"#;
const LEBESGUE: &str = r#"{"a": [0.5, 0.5], "d": [0.5, 0.5], "beta": [0, 0.5]}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fractal-spectra"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn csv_rows(text: &[u8]) -> Vec<Vec<String>> {
    let text = String::from_utf8(text.to_vec()).unwrap();
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn meta_reports_order_and_moments() {
    let dir = TempDir::new().unwrap();
    let params = write(&dir, "p.json", THREE_PIECE);
    let meta = stdout_json(&run(&["meta", "--params", s(&params)]));
    assert!((meta["D_half"].as_f64().unwrap() - 0.386853).abs() < 1e-6);
    assert!((meta["M0"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert_eq!(meta["classification"]["kind"], "degenerate_arithmetic");
    assert_eq!(meta["parity"][0], "odd");

    let params = write(&dir, "l.json", LEBESGUE);
    let meta = stdout_json(&run(&["meta", "--params", s(&params)]));
    assert!((meta["D"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn exit_codes_distinguish_failure_kinds() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", r#"{"a": [0.5, "#);
    assert_eq!(run(&["meta", "--params", s(&bad)]).status.code(), Some(2));

    let mismatch = write(
        &dir,
        "m.json",
        r#"{"a": [0.5, 0.25], "d": [0.1, 0.1], "beta": [0, 0]}"#,
    );
    let out = run(&["meta", "--params", s(&mismatch)]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "validation");

    let missing = dir.path().join("missing.json");
    assert_eq!(
        run(&["meta", "--params", s(&missing)]).status.code(),
        Some(4)
    );
    assert_eq!(run(&["meta", "--bogus"]).status.code(), Some(2));

    let params = write(&dir, "p.json", THREE_PIECE);
    let out = run(&[
        "eigen",
        "--params",
        s(&params),
        "--count",
        "3",
        "--depth-max",
        "2",
        "--tol",
        "1e-9",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn table1_rows_carry_ratios() {
    let dir = TempDir::new().unwrap();
    let params = write(&dir, "p.json", THREE_PIECE);
    let out = run(&["table1", "--params", s(&params)]);
    assert!(out.status.success());
    let rows = csv_rows(&out.stdout);
    assert_eq!(rows.len(), 24);
    let row = |n: &str| rows.iter().find(|r| r[0] == n).unwrap().clone();
    let first = row("1");
    assert!((first[1].parse::<f64>().unwrap() - 6.72).abs() < 0.07);
    assert!((first[3].parse::<f64>().unwrap() - 0.478).abs() < 0.002);
    let far = row("-11");
    assert!((far[1].parse::<f64>().unwrap() + 1.69e4).abs() < 0.02 * 1.69e4);
    assert!((far[3].parse::<f64>().unwrap() - 0.254).abs() < 0.002);
}

#[test]
fn table1_on_lebesgue_weight_approaches_weyl_constant() {
    let dir = TempDir::new().unwrap();
    let params = write(&dir, "l.json", LEBESGUE);
    let out = run(&["table1", "--params", s(&params), "--count", "6"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv_rows(&out.stdout);
    assert_eq!(rows.len(), 6, "negative ray is empty");
    for r in rows {
        let ratio: f64 = r[3].parse().unwrap();
        assert!((ratio - 1.0 / std::f64::consts::PI).abs() < 1e-3);
    }
}

#[test]
fn outputs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let params = write(&dir, "p.json", THREE_PIECE);
    let args = [
        "counting",
        "--params",
        s(&params),
        "--side",
        "neg",
        "--lmax",
        "1e5",
        "--points",
        "120",
        "--depth",
        "9",
    ];
    let a = run(&args);
    let b = bin()
        .args(args)
        .env("FRACTAL_SPECTRA_THREADS", "1")
        .output()
        .unwrap();
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);

    let t1 = run(&["eigen", "--params", s(&params), "--count", "5"]);
    let t2 = bin()
        .args(["eigen", "--params", s(&params), "--count", "5"])
        .env("FRACTAL_SPECTRA_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(t1.stdout, t2.stdout);
}

#[test]
fn rejects_bad_thread_count() {
    let dir = TempDir::new().unwrap();
    let params = write(&dir, "p.json", THREE_PIECE);
    let out = bin()
        .args(["meta", "--params", s(&params)])
        .env("FRACTAL_SPECTRA_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn counting_csv_round_trips_through_s_estimate() {
    let dir = TempDir::new().unwrap();
    let params_path = write(&dir, "p.json", THREE_PIECE);
    let meta_path = dir.path().join("meta.json");
    let pos_path = dir.path().join("pos.csv");
    let neg_path = dir.path().join("neg.csv");
    assert!(
        run(&["meta", "--params", s(&params_path), "--out", s(&meta_path)])
            .status
            .success()
    );
    for (side, path) in [("pos", &pos_path), ("neg", &neg_path)] {
        let out = run(&[
            "counting",
            "--params",
            s(&params_path),
            "--side",
            side,
            "--points",
            "300",
            "--depth",
            "10",
            "--out",
            s(path),
        ]);
        assert!(out.status.success());
    }
    let report = stdout_json(&run(&[
        "s-estimate",
        "--series",
        s(&pos_path),
        "--series",
        s(&neg_path),
        "--meta",
        s(&meta_path),
    ]));

    // the same computation in-process on the printed grid
    let params = SelfSimilarParams::three_piece_example();
    let meta = compute_meta(&params).unwrap();
    let pencil = assemble_pencil(&params, &meta, 10).unwrap();
    let grid: Vec<f64> = log_grid(1e2, 1e7, 300)
        .unwrap()
        .into_iter()
        .map(|x| format!("{x:.5e}").parse().unwrap())
        .collect();
    let pos = counting_series(&pencil, &meta, Side::Positive, &grid).unwrap();
    let neg = counting_series(&pencil, &meta, Side::Negative, &grid).unwrap();
    let expected = estimate_periodic_s(&pos, &[0.0, 1.0], DEFAULT_PHASE_TOL).unwrap();
    assert_eq!(
        report["estimates"][0],
        serde_json::to_value(&expected).unwrap()
    );
    let check = period_doubling_check(&pos, &neg, &[0.0, 1.0], DEFAULT_PHASE_TOL).unwrap();
    assert_eq!(
        report["period_doubling"]["max_rel_discrepancy"]
            .as_f64()
            .unwrap(),
        check.max_rel_discrepancy
    );
    assert_eq!(report["period_doubling"]["doubling_observed"], true);
}

#[test]
fn s_estimate_uses_constant_mode_for_nonarithmetic_weights() {
    let dir = TempDir::new().unwrap();
    let params = write(
        &dir,
        "p.json",
        r#"{"a": ["1/3", "1/3", "1/3"], "d": [0.5, -0.4, 0.6], "beta": [0, 0.5, 0.4]}"#,
    );
    let meta = dir.path().join("meta.json");
    assert!(run(&["meta", "--params", s(&params), "--out", s(&meta)])
        .status
        .success());
    let mut series = Vec::new();
    for side in ["pos", "neg"] {
        let path = dir.path().join(format!("{side}.csv"));
        let out = run(&[
            "counting",
            "--params",
            s(&params),
            "--side",
            side,
            "--lmin",
            "1e3",
            "--lmax",
            "1e6",
            "--points",
            "40",
            "--depth",
            "11",
            "--out",
            s(&path),
        ]);
        assert!(out.status.success());
        series.push(path);
    }
    let report = stdout_json(&run(&[
        "s-estimate",
        "--series",
        s(&series[0]),
        "--series",
        s(&series[1]),
        "--meta",
        s(&meta),
    ]));
    assert_eq!(report["classification"]["kind"], "nonarithmetic");
    assert_eq!(report["estimates"][0]["mode"]["kind"], "constant");
    assert!(report["agreement"]["consistent"].as_bool().unwrap());
}

#[test]
fn renewal_discrete_reproduces_toy_limits() {
    let dir = TempDir::new().unwrap();
    let system = write(
        &dir,
        "d.json",
        r#"{"u": [0, 0.5], "v": [0.5, 0], "x1": [1], "x2": [0]}"#,
    );
    let out = run(&["renewal-discrete", "--system", s(&system), "--n-max", "80"]);
    let rows = csv_rows(&out.stdout);
    let last = &rows[80];
    assert_eq!(last[0], "80");
    assert!((last[1].parse::<f64>().unwrap() - 2.0 / 3.0).abs() < 1e-5);
    assert_eq!(last[3], "6.66667e-1");
    let header = String::from_utf8(out.stdout).unwrap();
    assert!(header.starts_with("n,Z1,Z2,predicted_limit\n"));
}

#[test]
fn renewal_nonarith_checks_the_step() {
    let dir = TempDir::new().unwrap();
    let system = write(
        &dir,
        "n.json",
        r#"{"u": [0.3, 0], "v": [0, 0.7], "delays": [1, 1.618033988749895],
            "x1": {"kind": "gaussian", "center": 5, "width": 1, "mass": 1},
            "t_min": -5, "t_max": 60}"#,
    );
    let out = run(&["renewal-nonarith", "--system", s(&system), "--step", "0.5"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&[
        "renewal-nonarith",
        "--system",
        s(&system),
        "--stride",
        "1000",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("t,Z1,Z2,predicted_limit\n"));
    let last: Vec<f64> = text
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    assert!((last[1] - last[3]).abs() < 1e-3);
    assert!((last[3] - 0.349010).abs() < 1e-6);
}

#[test]
fn renewal_lattice_rejects_bad_tables() {
    let dir = TempDir::new().unwrap();
    let system = write(
        &dir,
        "l.json",
        r#"{"u": [0, 0.5], "v": [0.5, 0], "x1": {"kind": "table", "t": [0, 1, 0.5], "x": [0, 1, 0]}}"#,
    );
    assert_eq!(
        run(&["renewal-lattice", "--system", s(&system)])
            .status
            .code(),
        Some(2)
    );
}
