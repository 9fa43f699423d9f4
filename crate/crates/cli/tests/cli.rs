use std::path::Path;
use std::process::{Command, Output};

use polyloom_cli::report::{read_csv, ResultRow, SweepCsvRow, RESULTS_SCHEMA, SWEEP_SCHEMA};

fn polyloom(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_polyloom"));
    c.args(args).env_remove("POLYLOOM_WORKERS");
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "stdout:\n{}\nstderr:\n{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    o
}

#[test]
fn schedules_are_live_and_deterministic() {
    let a = stdout(&ok(polyloom(&["schedules"], &[])));
    assert!(a.contains("S1: (j, i, 0)"));
    assert!(a.contains("i/N, i%N"));
    assert!(a.contains("(h) split i P"));
    assert_eq!(a.matches("S2: ").count(), 8);
    assert_eq!(a, stdout(&ok(polyloom(&["schedules"], &[]))));
}

fn sweep(dir: &Path, trials: &str) -> Vec<SweepCsvRow> {
    let out = dir.to_str().unwrap();
    let args = [
        "sweep", "--out", out, "--trials", trials, "--densities", "0.01,0.3,1", "--in-features", "4",
        "--out-features", "8", "--height", "12", "--width", "12",
    ];
    ok(polyloom(&args, &[]));
    read_csv(&dir.join("sweep.csv"), SWEEP_SCHEMA).unwrap()
}

#[test]
fn sweep_writes_versioned_csv_and_valid_svg() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let one = sweep(a.path(), "1");
    let many = sweep(b.path(), "5");
    assert_eq!(one.len(), 3);
    let sums = |rows: &[SweepCsvRow]| rows.iter().map(|r| r.checksum.clone()).collect::<Vec<_>>();
    assert_eq!(sums(&one), sums(&many));
    assert!(many.iter().all(|r| r.rel_err <= 1e-5));
    let svg = std::fs::read_to_string(b.path().join("sweep.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).expect("well-formed SVG");
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    let first = many.iter().find(|r| r.ratio >= 1.0);
    match first {
        Some(r) => assert!(svg.contains(&format!("crossover {:.1}%", r.density * 100.0))),
        None => assert!(!svg.contains("crossover")),
    }
}

#[test]
fn rejected_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let o = polyloom(&["sweep", "--out", out.to_str().unwrap(), "--trials", "0"], &[]);
    assert!(!o.status.success());
    let o = polyloom(&["lstm", "--out", out.to_str().unwrap(), "--steps", "1"], &[("POLYLOOM_WORKERS", "none")]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("POLYLOOM_WORKERS"));
    assert!(!out.exists());
}

#[test]
fn verify_passes_and_catches_corrupt_csr() {
    let o = ok(polyloom(&["verify"], &[]));
    let text = stdout(&o);
    assert_eq!(text.matches("PASS").count(), 6, "{text}");
    assert!(text.contains("cases)"));
    let bad = polyloom(&["verify", "--corrupt-csr"], &[]);
    assert_eq!(bad.status.code(), Some(2), "{}", stdout(&bad));
    assert!(stdout(&bad).contains("csr-invariants         FAIL"));
}

fn lstm(dir: &Path, env: &[(&str, &str)], extra: &[&str]) -> Vec<ResultRow> {
    let out = dir.to_str().unwrap();
    let mut args =
        vec!["lstm", "--out", out, "--layers", "3", "--steps", "12", "--hidden", "48", "--input-dim", "16", "--trials", "31"];
    args.extend_from_slice(extra);
    ok(polyloom(&args, env));
    read_csv(&dir.join("lstm.csv"), RESULTS_SCHEMA).unwrap()
}

#[test]
fn lstm_records_speedup_and_matching_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let rows = lstm(dir.path(), &[], &["--workers", "1"]);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].checksum, rows[1].checksum);
    assert!((rows[1].speedup - 1.0).abs() <= 0.1, "workers=1 speedup {}", rows[1].speedup);
    let rows = lstm(dir.path(), &[("POLYLOOM_WORKERS", "2")], &["--density", "0.25"]);
    assert!(rows[1].params.ends_with("workers=2"));
    assert_eq!(rows[0].checksum, rows[1].checksum);
}

#[test]
fn conv_reads_back_its_own_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = ["conv", "--out", d.to_str().unwrap(), "--trials", "2", "--height", "8", "--width", "8", "--density", "0.3"];
    ok(polyloom(&args, &[]));
    let first: Vec<ResultRow> = read_csv(&d.join("conv.csv"), RESULTS_SCHEMA).unwrap();
    assert_eq!(first.iter().map(|r| r.experiment.as_str()).collect::<Vec<_>>(), ["conv-dense", "conv-sparse", "conv-relu-maxpool-fused"]);
    let again = dir.path().join("again");
    let input = d.join("conv_input.pltn");
    let weights = d.join("conv_weights.plcs");
    let args = [
        "conv", "--out", again.to_str().unwrap(), "--trials", "1",
        "--input", input.to_str().unwrap(), "--weights", weights.to_str().unwrap(),
    ];
    ok(polyloom(&args, &[]));
    let second: Vec<ResultRow> = read_csv(&again.join("conv.csv"), RESULTS_SCHEMA).unwrap();
    let sums = |rows: &[ResultRow]| rows.iter().map(|r| r.checksum.clone()).collect::<Vec<_>>();
    assert_eq!(sums(&first), sums(&second));
    assert!(!again.join("conv_input.pltn").exists());
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("res");
    let cfg = dir.path().join("bench.toml");
    let text = format!(
        "trials = 1\nout_dir = {:?}\ndensities = [0.1, 0.9]\n[conv]\nin_features = 2\nout_features = 2\nheight = 6\nwidth = 6\n",
        out.to_str().unwrap()
    );
    std::fs::write(&cfg, text).unwrap();
    ok(polyloom(&["sweep", "--config", cfg.to_str().unwrap()], &[]));
    let rows: Vec<SweepCsvRow> = read_csv(&out.join("sweep.csv"), SWEEP_SCHEMA).unwrap();
    assert_eq!(rows.iter().map(|r| r.density).collect::<Vec<_>>(), [0.1, 0.9]);
    std::fs::write(&cfg, "bogus = 1\n").unwrap();
    assert!(!polyloom(&["sweep", "--config", cfg.to_str().unwrap()], &[]).status.success());
}
