use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lcirt::io::{read_data, read_item_map, FitReport, RunConfig};
use lcirt::model::{count_parameters, log_likelihood};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures/tiny")
        .join(name)
        .display()
        .to_string()
}

fn lcirt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcirt"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn fit_args<'a>(cmd: &'a str, out: &'a str) -> Vec<&'a str> {
    vec![cmd, "--out", out]
}

fn tiny(cmd: &str, out: &Path, extra: &[&str]) -> Output {
    let (data, items, cfg) = (fixture("data.csv"), fixture("items.csv"), fixture("run.toml"));
    let out = out.display().to_string();
    let mut args = fit_args(cmd, &out);
    args.extend(["--data", &data, "--items", &items, "--config", &cfg]);
    args.extend(extra);
    lcirt(&args)
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{}: {e}", dir.join(name).display()))
}

fn same_files(a: &Path, b: &Path) {
    let mut names: Vec<_> = std::fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(!names.is_empty());
    for n in names {
        let n = n.to_str().unwrap();
        assert_eq!(read(a, n), read(b, n), "{n} differs");
    }
}

#[test]
fn fit_writes_a_consistent_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny("fit", dir.path(), &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["fit.json", "parameters.csv", "items.csv", "support.csv", "coefficients.csv", "summary.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let report: FitReport = lcirt::io::read_json(dir.path().join("fit.json")).unwrap();
    let map = read_item_map(fixture("items.csv")).unwrap();
    let cfg = RunConfig::load(fixture("run.toml")).unwrap();
    let data = read_data(fixture("data.csv"), &map, cfg.covariates.as_deref()).unwrap();
    let p = report.to_parameters(&map.design).unwrap();
    assert_eq!(log_likelihood(&p, &map.design, &data.data).unwrap(), report.loglik);
    assert_eq!(report.npar, count_parameters(&report.model).unwrap());
    assert_eq!(report.n_subjects, 8);
    assert_eq!(report.missing_cells, 5);

    let rasch = tempfile::tempdir().unwrap();
    assert_eq!(code(&tiny("fit", rasch.path(), &["--parametrization", "rasch"])), 0);
    let r: FitReport = lcirt::io::read_json(rasch.path().join("fit.json")).unwrap();
    assert!(r.npar < report.npar);
}

#[test]
fn fit_is_byte_identical_across_runs_and_workers() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(code(&tiny("fit", a.path(), &["--workers", "1"])), 0);
    assert_eq!(code(&tiny("fit", b.path(), &["--workers", "3"])), 0);
    same_files(a.path(), b.path());
}

#[test]
fn select_reports_npar_from_the_parameter_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny("select", dir.path(), &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(read(dir.path(), "selection.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let mut rows = 0;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        let spec = lcirt::model::ModelSpec::new(
            1,
            cells[col("k1")].parse().unwrap(),
            cells[col("k2")].parse().unwrap(),
            3,
            1,
            cells[col("parametrization")].parse().unwrap(),
            cells[col("missing_mode")].parse().unwrap(),
        )
        .unwrap();
        assert_eq!(cells[col("npar")].parse::<usize>().unwrap(), count_parameters(&spec).unwrap());
        rows += 1;
    }
    assert_eq!(rows, 4);
    assert!(dir.path().join("lr_tests.csv").exists());
}

#[test]
fn bootstrap_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let extra = ["--replicates", "4", "--bootstrap-seed", "9"];
    let first = tiny("bootstrap", a.path(), &extra);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(code(&tiny("bootstrap", b.path(), &extra)), 0);
    same_files(a.path(), b.path());
    assert!(a.path().join("bootstrap.csv").exists());
}

fn rows_and_header(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

#[test]
fn simulate_writes_the_scenario_layout() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = dir.path().display().to_string();
        assert_eq!(code(&lcirt(&["simulate", "--scenario", "1", "--seed", "4", "--out", &out])), 0);
    }
    same_files(a.path(), b.path());
    let (header, rows) = rows_and_header(&a.path().join("data.csv"));
    assert_eq!(rows.len(), 1000);
    assert_eq!(header.iter().filter(|h| h.starts_with("item")).count(), 20);
    assert_eq!(header.iter().filter(|h| h.starts_with('x')).count(), 2);
    assert!(rows.iter().flatten().all(|c| c != "NA"));
    assert!(a.path().join("truth.json").exists());

    let c = tempfile::tempdir().unwrap();
    let out = c.path().display().to_string();
    assert_eq!(code(&lcirt(&["simulate", "--scenario", "3", "--out", &out])), 0);
    let (_, rows) = rows_and_header(&c.path().join("data.csv"));
    assert!(rows.iter().flatten().any(|c| c == "NA"));

    // The simulated files feed straight back into `fit`.
    let fitdir = tempfile::tempdir().unwrap();
    let fo = fitdir.path().display().to_string();
    let data = c.path().join("data.csv").display().to_string();
    let items = c.path().join("items.csv").display().to_string();
    let out = lcirt(&["fit", "--data", &data, "--items", &items, "--out", &fo, "--max-iter", "20"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn recovery_tables_are_written_and_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for (dir, workers) in [(&a, "1"), (&b, "2")] {
        let out = dir.path().display().to_string();
        let o = lcirt(&["recovery", "--scenario", "1", "--replications", "2", "--workers", workers, "--out", &out]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["recovery.json", "support.csv", "coefficients.csv", "items.csv"] {
        assert!(a.path().join(f).exists(), "{f}");
    }
    same_files(a.path(), b.path());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let items = fixture("items.csv");
    let missing = lcirt(&["fit", "--data", "/nonexistent.csv", "--items", &items, "--out", &out]);
    assert_eq!(code(&missing), 2);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nonexistent"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[model]\nwhatever = 1\n").unwrap();
    let cfg = bad.display().to_string();
    let data = fixture("data.csv");
    assert_eq!(code(&lcirt(&["fit", "--data", &data, "--items", &items, "--config", &cfg, "--out", &out])), 2);

    assert_eq!(code(&lcirt(&["simulate", "--scenario", "13", "--out", &out])), 2);
    // One ability class: no spread to standardize.
    assert_eq!(code(&tiny("fit", dir.path(), &["--k1", "1"])), 3);
    assert_eq!(code(&tiny("fit", dir.path(), &["--strict", "--max-iter", "2"])), 4);
    assert_eq!(code(&tiny("fit", dir.path(), &["--max-iter", "2"])), 0);
}
