//! End-to-end tests of the command-line binary: exit codes, output
//! contracts, and determinism across reruns.

use std::path::Path;
use std::process::{Command, Output};

use faan::fixtures;
use faan::io;

const BIN: &str = env!("CARGO_BIN_EXE_faan");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn faan binary")
}

fn write_demo_6x6(dir: &Path) -> String {
    let path = dir.join("m6.csv");
    io::write_matrix_csv(&path, fixtures::demo_scm_6x6().entries()).unwrap();
    path.to_string_lossy().into_owned()
}

fn write_demo_5x5(dir: &Path) -> String {
    let path = dir.join("m5.csv");
    io::write_matrix_csv(&path, fixtures::demo_scm_5x5().entries()).unwrap();
    path.to_string_lossy().into_owned()
}

fn write_identity(dir: &Path, n: usize) -> String {
    let path = dir.join("eye.csv");
    io::write_matrix_csv(&path, &nalgebra::DMatrix::<f64>::identity(n, n)).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let m6 = write_demo_6x6(dir.path());
    let m5 = write_demo_5x5(dir.path());
    let eye = write_identity(dir.path(), 4);
    let out = dir.path().join("fit.json");
    let out = out.to_str().unwrap();

    // 0: clean convergent feasible fit
    let r = run(&["fit", &eye, "--rank", "1", "--out", out]);
    assert_eq!(r.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&r.stderr));

    // 2: converged but infeasible (negative diagonal entries)
    let r = run(&["fit", &m6, "--method", "fnm_o", "--rank", "2", "--out", out]);
    assert_eq!(r.status.code(), Some(2));

    // 3: iteration cap reached before the tolerance
    let r = run(&[
        "fit", &m5, "--rank", "3", "--epsilon", "1e-14", "--max-iter", "50", "--out", out,
    ]);
    assert_eq!(r.status.code(), Some(3));

    // 1: runtime failure (matrix not a valid model input)
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1.0,2.0\n3.0,4.0\n").unwrap();
    let r = run(&["fit", bad.to_str().unwrap(), "--rank", "1", "--out", out]);
    assert_eq!(r.status.code(), Some(1));

    // 64: missing input file
    let r = run(&["fit", "no-such-file.csv", "--rank", "1", "--out", out]);
    assert_eq!(r.status.code(), Some(64));

    // 64: usage error (unknown flag)
    let r = run(&["fit", &eye, "--rank", "1", "--out", out, "--bogus"]);
    assert_eq!(r.status.code(), Some(64));

    // 0: help and version
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn fit_report_contract_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let m6 = write_demo_6x6(dir.path());
    let out1 = dir.path().join("a.json");
    let out2 = dir.path().join("b.json");
    for out in [&out1, &out2] {
        let r = run(&[
            "fit", &m6, "--method", "fnm", "--rank", "2",
            "--epsilon", "1e-10", "--max-iter", "100000",
            "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(r.status.code(), Some(0));
    }
    let a = std::fs::read(&out1).unwrap();
    let b = std::fs::read(&out2).unwrap();
    assert_eq!(a, b, "reruns must be byte-identical");

    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["method"], "fnm");
    assert_eq!(v["rank"], 2);
    assert_eq!(v["converged"], true);
    assert_eq!(v["feasible"], true);
    assert_eq!(v["sigma_sq"].as_array().unwrap().len(), 6);
    assert_eq!(v["ssT"].as_array().unwrap().len(), 36, "row-major n*n entries");
    let sigma: Vec<f64> =
        v["sigma_sq"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    for (got, want) in sigma.iter().zip([0.7771, 1.5755, 2.8302, 0.0, 5.0082, 0.0]) {
        assert!((got - want).abs() < 1e-3, "sigma {got} vs {want}");
    }
}

#[test]
fn random_init_requires_seed() {
    let dir = tempfile::tempdir().unwrap();
    let eye = write_identity(dir.path(), 4);
    let out = dir.path().join("fit.json");
    let r = run(&["fit", &eye, "--rank", "1", "--sigma-init", "random", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
    let r = run(&[
        "fit", &eye, "--rank", "1", "--sigma-init", "random", "--seed", "7",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(0));
}

#[test]
fn bounds_output_lines() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(&["bounds", "--n", "6", "--rank", "3"]);
    assert_eq!(r.status.code(), Some(0));
    let text = String::from_utf8(r.stdout).unwrap();
    assert!(text.contains("r_L = 3"), "{text}");
    assert!(text.contains("class = locally identifiable"), "{text}");

    let r = run(&["bounds", "--n", "15"]);
    let text = String::from_utf8(r.stdout).unwrap();
    assert!(text.contains("resolvable sources: isotropic 7, anisotropic 5"), "{text}");

    // a perfectly diagonal matrix carries no common factors
    let eye = write_identity(dir.path(), 6);
    let r = run(&["bounds", &eye]);
    let text = String::from_utf8(r.stdout).unwrap();
    assert!(text.contains("r_G = 0"), "{text}");
}

#[test]
fn rank_scan_json() {
    let dir = tempfile::tempdir().unwrap();
    let returns = dir.path().join("ret.csv");
    let r = run(&[
        "synth", "--kind", "returns", "--n", "12", "--rank", "2", "--rows", "300",
        "--seed", "3", "--out", returns.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(0));
    // build a covariance from the synthetic returns
    let (_, data) = io::read_returns_csv(&returns).unwrap();
    let scm = faan::sample_covariance(&data.transpose(), true).unwrap();
    let mat = dir.path().join("scm.csv");
    io::write_matrix_csv(&mat, scm.entries()).unwrap();

    let out = dir.path().join("scan.json");
    let r = run(&[
        "rank", mat.to_str().unwrap(), "--N", "300", "--rmax", "6",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["chosen"], 2);
    assert_eq!(v["candidates"].as_array().unwrap().len(), 6);
    assert_eq!(v["scores"].as_array().unwrap().len(), 6);
    assert_eq!(v["chosen_fit"]["rank"], 2);
}

#[test]
fn synth_frisch_inverse_is_nonnegative() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("frisch.csv");
    let r = run(&["synth", "--kind", "frisch", "--n", "5", "--seed", "11", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0));
    let m = io::read_matrix_csv(&out).unwrap();
    assert_eq!(m.nrows(), 5);
    let inv = m.try_inverse().unwrap();
    assert!(inv.iter().all(|&v| v >= -1e-9), "inverse has negative entries");
}

#[test]
fn backtest_reports_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let returns = dir.path().join("ret.csv");
    run(&[
        "synth", "--kind", "returns", "--n", "8", "--rank", "2", "--rows", "260",
        "--seed", "5", "--out", returns.to_str().unwrap(),
    ]);
    let out = dir.path().join("bt.json");
    let csv = dir.path().join("bt.csv");
    let r = run(&[
        "backtest", returns.to_str().unwrap(), "--lookback", "60",
        "--estimator", "scm", "--out", out.to_str().unwrap(),
        "--csv-out", csv.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["median_std"].as_f64().unwrap() > 0.0);
    assert!(!v["dates"].as_array().unwrap().is_empty());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("lookback_N,estimator,median_std\n60,scm,"), "{text}");
}

#[test]
fn doa_sim_sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let r = run(&[
        "doa-sim", "--sweep", "n", "--values", "40,80", "--trials", "5",
        "--seed", "1", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("N,method,rmse,trials"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4, "two values x two methods: {text}");
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 4);
        assert!(cols[2].parse::<f64>().unwrap().is_finite());
    }
}
