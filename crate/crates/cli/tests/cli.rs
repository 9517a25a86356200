use std::path::Path;
use std::process::{Command, Output};

use entdetect::detector::{self, DetectConfig};
use entdetect::posmap::{BuiltinMap, PositiveMapSpec};
use entdetect::qstate;
use entdetect::sweep::{self, Family};
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entdetect"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn run_json(args: &[&str]) -> Value {
    serde_json::from_str(&run_ok(args)).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen_file(dir: &Path, name: &str, args: &[&str]) -> String {
    let path = dir.join(name);
    let mut full = vec!["gen"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", path_str(&path)]);
    run_ok(&full);
    path_str(&path).to_string()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

#[test]
fn gen_bell_has_corner_pattern() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen_file(dir.path(), "bell.json", &["--family", "bell", "--which", "0"]);
    let text = std::fs::read_to_string(&path).unwrap();
    let rho = qstate::read_state_json(&text).unwrap();
    assert_eq!(rho.dims(), &[2, 2]);
    for i in 0..4 {
        for j in 0..4 {
            let corner = (i == 0 || i == 3) && (j == 0 || j == 3);
            let want = if corner { 0.5 } else { 0.0 };
            assert!(close(rho.matrix()[(i, j)].re, want, 1e-12));
            assert!(close(rho.matrix()[(i, j)].im, 0.0, 1e-12));
        }
    }
    let file: Value = serde_json::from_str(&text).unwrap();
    assert!(file["version"].is_string());
    assert_eq!(file["config"]["state"]["family"], "bell");
}

#[test]
fn gen_werner_has_expected_negativity() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen_file(dir.path(), "w.json", &["--family", "werner", "--q", "0.5"]);
    let rho = qstate::read_state_json(&std::fs::read_to_string(path).unwrap()).unwrap();
    let oracle = detector::ppt_oracle(&rho).unwrap();
    assert!(close(oracle.min_pt_eigenvalue, -0.125, 1e-12));
}

#[test]
fn gen_random_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--family", "random", "--dim", "3", "--seed", "7"];
    let a = gen_file(dir.path(), "a.json", &args);
    let b = gen_file(dir.path(), "b.json", &args);
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn spa_info_examples() {
    let t2 = run_json(&["spa-info", "--map", "transpose", "--d", "2"]);
    assert!(close(num(&t2["spa"]["identity_coefficient"]), 2.0 / 9.0, 1e-12));
    assert!(close(num(&t2["spa"]["map_coefficient"]), 1.0 / 9.0, 1e-12));
    assert!(close(num(&t2["spa"]["threshold"]), 2.0 / 9.0, 1e-12));
    let t3 = run_json(&["spa-info", "--map", "transpose", "--d", "3"]);
    assert!(close(num(&t3["spa"]["identity_coefficient"]), 3.0 / 28.0, 1e-12));
    assert!(close(num(&t3["spa"]["map_coefficient"]), 1.0 / 28.0, 1e-12));
    let id = run_json(&["spa-info", "--map", "identity", "--d", "2"]);
    assert_eq!(num(&id["spa"]["lambda"]), 0.0);
    assert_eq!(num(&id["spa"]["threshold"]), 0.0);
    assert!(id["version"].is_string());
    assert_eq!(id["config"]["d"], 2);
}

#[test]
fn spa_info_reads_map_files() {
    let dir = tempfile::tempdir().unwrap();
    let map = PositiveMapSpec::builtin(BuiltinMap::Transpose, 2).unwrap();
    let path = dir.path().join("mine.json");
    std::fs::write(&path, map.to_json_text()).unwrap();
    let info = run_json(&["spa-info", "--map-file", path_str(&path), "--d", "2"]);
    assert_eq!(info["spa"]["map"], "mine");
    assert!(close(num(&info["spa"]["threshold"]), 2.0 / 9.0, 1e-12));
}

#[test]
fn detect_exact_examples() {
    let dir = tempfile::tempdir().unwrap();
    let bell = gen_file(dir.path(), "bell.json", &["--family", "bell"]);
    let out = run_json(&["detect", "--state", &bell, "--mode", "exact"]);
    assert_eq!(out["report"]["verdict"], "ENTANGLED");
    assert!(close(num(&out["report"]["lambda_min_estimate"]), 1.0 / 6.0, 1e-12));
    assert!(close(num(&out["eof_bounds"]["lambda_prime"]), 0.5, 1e-12));

    let mixed = gen_file(dir.path(), "mixed_id.json", &["--family", "maximally-mixed"]);
    let out = run_json(&["detect", "--state", &mixed, "--mode", "exact"]);
    assert_eq!(out["report"]["verdict"], "SEPARABLE");
    assert!(close(num(&out["report"]["lambda_min_estimate"]), 0.25, 1e-12));
}

#[test]
fn detect_report_is_flat_with_fixed_fields() {
    let out = run_json(&["detect", "--family", "werner", "--q", "0.2"]);
    let report = out["report"].as_object().unwrap();
    let mut keys: Vec<&str> = report.keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(
        keys,
        [
            "copies_consumed",
            "lambda_min_estimate",
            "lambda_min_std_error",
            "margin",
            "mode",
            "rescale_factor",
            "seed",
            "shots_per_power_sum",
            "test_name",
            "threshold",
            "timestamp",
            "verdict"
        ]
    );
    assert!(report.values().all(|v| !v.is_object()));
    assert!(out["version"].is_string());
    assert_eq!(out["config"]["source"]["family"]["family"], "werner");
}

#[test]
fn detect_sampled_bell() {
    let dir = tempfile::tempdir().unwrap();
    let bell = gen_file(dir.path(), "bell.json", &["--family", "bell"]);
    let out = run_json(&["detect", "--state", &bell, "--mode", "sampled", "--shots", "1000000", "--seed", "1"]);
    let report = &out["report"];
    assert_eq!(num(&report["shots_per_power_sum"]), 1e6);
    assert_eq!(num(&report["copies_consumed"]), 9e6);
    assert_eq!(report["verdict"], "ENTANGLED", "report: {report}");
    assert!(num(&report["margin"]) > 3.0);
}

#[test]
fn gen_file_detect_matches_in_process() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen_file(dir.path(), "r.json", &["--family", "random", "--dim", "2", "--seed", "11"]);
    let out = run_json(&["detect", "--state", &path, "--mode", "sampled", "--shots", "20000", "--seed", "5"]);
    let rho = qstate::random_density(&[2, 2], 4, 11).unwrap();
    let t = PositiveMapSpec::builtin(BuiltinMap::Transpose, 2).unwrap();
    let local = detector::detect(&rho, &t, &DetectConfig::sampled(20_000, 5)).unwrap();
    let report = &out["report"];
    assert_eq!(num(&report["lambda_min_estimate"]).to_bits(), local.lambda_min_estimate.to_bits());
    assert_eq!(num(&report["lambda_min_std_error"]).to_bits(), local.lambda_min_std_error.to_bits());
    assert_eq!(num(&report["margin"]).to_bits(), local.margin.to_bits());
    assert_eq!(report["verdict"], serde_json::to_value(local.verdict).unwrap());
}

fn parse_csv(text: &str) -> (Vec<String>, Vec<csv::StringRecord>) {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = reader.headers().unwrap().iter().map(str::to_string).collect();
    let rows = reader.records().map(Result::unwrap).collect();
    (header, rows)
}

fn field(row: &csv::StringRecord, i: usize) -> Option<f64> {
    let s = row.get(i).unwrap();
    (!s.is_empty()).then(|| s.parse().unwrap())
}

#[test]
fn werner_sweep_csv() {
    let text = run_ok(&["sweep", "--family", "werner", "--from", "0", "--to", "1", "--points", "101"]);
    assert!(text.starts_with("# version: "));
    assert!(text.lines().nth(1).unwrap().starts_with("# config: {"));
    let (header, rows) = parse_csv(&text);
    assert_eq!(header, entdetect_cli::SWEEP_HEADER);
    assert_eq!(rows.len(), 101);
    for (i, row) in rows.iter().enumerate() {
        let want = if i <= 33 { "SEPARABLE" } else { "ENTANGLED" };
        assert_eq!(&row[1], want, "row {i}");
    }
    let first = &rows[0];
    assert!(close(field(first, 2).unwrap(), 0.25, 1e-12));
    assert_eq!(field(first, 6), Some(0.0));
    assert_eq!((field(first, 7), field(first, 8)), (Some(0.0), Some(0.0)));
    let last = &rows[100];
    assert!(close(field(last, 6).unwrap(), 0.5, 1e-12));
    assert!(close(field(last, 7).unwrap(), 1.0, 1e-12));
    assert!(close(field(last, 8).unwrap(), 1.0, 1e-12));
}

#[test]
fn sweep_csv_round_trips_exactly() {
    let text = run_ok(&[
        "sweep", "--family", "werner", "--points", "21", "--mode", "sampled", "--shots", "10000", "--seed", "3",
    ]);
    let (_, rows) = parse_csv(&text);
    let t = PositiveMapSpec::builtin(BuiltinMap::Transpose, 2).unwrap();
    let params = sweep::grid(0.0, 1.0, 21).unwrap();
    let local = sweep::sweep(Family::Werner, &params, &t, &DetectConfig::sampled(10_000, 3)).unwrap();
    for (row, want) in rows.iter().zip(&local) {
        let numbers = [
            Some(want.param),
            None,
            Some(want.lambda_min),
            Some(want.std_error),
            Some(want.threshold),
            Some(want.rescale),
            want.lambda_prime,
            want.eof_lower,
            want.eof_upper,
        ];
        for (i, expected) in numbers.iter().enumerate() {
            if i == 1 {
                continue;
            }
            assert_eq!(field(row, i).map(f64::to_bits), expected.map(f64::to_bits), "column {i}");
        }
    }
}

#[test]
fn isotropic_sweep_leaves_eof_columns_empty() {
    let text = run_ok(&["sweep", "--family", "isotropic", "--dim", "3", "--from", "0.5", "--to", "0.9", "--points", "3"]);
    let (_, rows) = parse_csv(&text);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[6].is_empty() && r[7].is_empty() && r[8].is_empty()));
}

#[test]
fn spectrum_examples_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let mixed = gen_file(dir.path(), "mixed.json", &["--family", "maximally-mixed"]);
    let out = run_json(&["spectrum", "--state", &mixed]);
    let spectrum = &out["spectrum"];
    assert!(spectrum["eigenvalues"].as_array().unwrap().iter().all(|x| close(num(x), 0.25, 1e-12)));
    assert_eq!(spectrum["degenerate_warning"], true);

    let bell = gen_file(dir.path(), "bell.json", &["--family", "bell"]);
    let out = run_json(&["spectrum", "--state", &bell, "--spa"]);
    let eig: Vec<f64> = out["spectrum"]["eigenvalues"].as_array().unwrap().iter().map(num).collect();
    for (a, b) in eig.iter().zip([1.0 / 6.0, 5.0 / 18.0, 5.0 / 18.0, 5.0 / 18.0]) {
        assert!(close(*a, b, 1e-10), "{eig:?}");
    }

    let out = run_json(&["spectrum", "--state", &bell]);
    let eig: Vec<f64> = out["spectrum"]["eigenvalues"].as_array().unwrap().iter().map(num).collect();
    for (a, b) in eig.iter().zip([0.0, 0.0, 0.0, 1.0]) {
        assert!(close(*a, b, 1e-10), "{eig:?}");
    }
    assert!(out["version"].is_string());
}

#[test]
fn sampled_spectrum_reports_uncertainty() {
    let out = run_json(&["spectrum", "--family", "werner", "--q", "0.5", "--spa", "--mode", "sampled", "--shots", "100000"]);
    assert!(num(&out["spectrum"]["lambda_min_std_error"]) > 0.0);
    assert_eq!(num(&out["copies_consumed"]), 9e5);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["detect", "--family", "werner"]).status.code(), Some(2));
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
    assert_eq!(run(&["detect", "--map", "nope", "--family", "bell"]).status.code(), Some(2));
    assert_eq!(run(&["detect", "--state", "/nonexistent/state.json"]).status.code(), Some(2));
    assert_eq!(run(&["gen", "--family", "werner", "--q", "1.5"]).status.code(), Some(2));
    assert_eq!(
        run(&["detect", "--family", "isotropic", "--f", "0.5", "--dim", "3", "--mode", "sampled", "--backend", "circuit"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(run(&["spa-info", "--d", "20"]).status.code(), Some(3));
    // A non-detection is a result, not a failure.
    let out = run_json(&["detect", "--family", "isotropic", "--f", "0.2", "--dim", "3"]);
    assert_eq!(out["report"]["verdict"], "NOT_DETECTED");
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
