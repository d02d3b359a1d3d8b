use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use naed_core::experiment::{read_csv_rows, CSV_COLUMNS, SWEEP_SCHEMA};

fn naedsim(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_naedsim"));
    cmd.args(args).stdin(std::process::Stdio::null());
    match threads {
        Some(t) => cmd.env("NAEDSIM_THREADS", t),
        None => cmd.env_remove("NAEDSIM_THREADS"),
    };
    cmd.output().expect("run naedsim")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

const NOISY_CELL: &[&str] =
    &["run", "--n", "2", "--q", "2", "--shots", "8192", "--reps", "3", "--seed", "5", "--p-gate", "0.02"];

#[test]
fn run_output_is_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (i, threads) in [None, Some("1"), Some("3")].into_iter().enumerate() {
        let out = path(dir.path(), &format!("run{i}.json"));
        let mut args = NOISY_CELL.to_vec();
        args.extend(["--out", &out]);
        let o = naedsim(&args, threads);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
}

#[test]
fn sweep_json_matches_published_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "sweep.json");
    let o = naedsim(
        &["sweep", "--n", "2,3", "--q", "1,2", "--shots", "256", "--reps", "2", "--gamma", "0.05", "--out", &out],
        None,
    );
    assert!(o.status.success());
    let schema: serde_json::Value = serde_json::from_str(SWEEP_SCHEMA).unwrap();
    let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(&value).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");

    // The schema must actually constrain something.
    let mut broken = value.clone();
    broken["rows"][0].as_object_mut().unwrap().remove("rb");
    assert!(!validator.is_valid(&broken));
}

#[test]
fn noiseless_default_grid_then_plotdata() {
    let dir = tempfile::tempdir().unwrap();
    let csv = path(dir.path(), "grid.csv");
    let o = naedsim(&["sweep", "--shots", "512", "--reps", "2", "--out", &csv], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.lines().all(|l| l.split(',').count() == CSV_COLUMNS.len()));
    let rows = read_csv_rows(&text).unwrap();
    assert_eq!(rows.len(), 20 * 2 + 20);
    for r in &rows {
        assert_eq!((r.mu_full, r.mu_naed, r.p_kept), (100.0, Some(100.0), 100.0), "{r:?}");
    }

    let m = naedsim(&["plotdata", &csv, "--metric", "p_kept"], None);
    assert!(m.status.success());
    let matrix = String::from_utf8(m.stdout).unwrap();
    let lines: Vec<&str> = matrix.lines().collect();
    assert_eq!(lines[0], "N\\Q,1,2,3,4,5");
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[1], "2,100,100,100,100,100");
    assert!(lines[4].starts_with("5,"));
}

#[test]
fn plotdata_reads_json_too() {
    let dir = tempfile::tempdir().unwrap();
    let json = path(dir.path(), "s.json");
    assert!(naedsim(&["sweep", "--n", "2", "--q", "1,2,3", "--shots", "64", "--reps", "1", "--out", &json], None)
        .status
        .success());
    let m = naedsim(&["plotdata", &json, "--metric", "mu_naed"], None);
    assert_eq!(String::from_utf8(m.stdout).unwrap(), "N\\Q,1,2,3\n2,100,100,100\n");
}

#[test]
fn lower_reproduces_bell_example_circuit() {
    let dir = tempfile::tempdir().unwrap();
    let src = path(dir.path(), "ghz2.dsl");
    fs::write(&src, "qubits 2\nh q0\ncx q0 q1\n").unwrap();
    let o = naedsim(&["lower", &src, "--q", "2", "--s", "1"], None);
    assert_eq!(
        String::from_utf8(o.stdout).unwrap(),
        "qubits 4\nx q1\nu3 1.5707963267948966 0 3.141592653589793 q0\ncx q0 q1\ncx q0 q2\ncx q1 q3\n"
    );
    let o = naedsim(&["lower", &src, "--q", "2", "--s", "1", "--no-simplify"], None);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("cx")).count(), 2 + 2);
}

#[test]
fn verify_passes() {
    let o = naedsim(&["verify"], Some("2"));
    assert_eq!(o.status.code(), Some(0));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.contains("engine vs oracle"));
    assert!(!table.contains("FAIL"));
}

#[test]
fn inject_reports_certain_rejection_for_x() {
    let o = naedsim(&["inject", "--n", "3", "--q", "2", "--error", "X"], None);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4 * 6);
    assert!(rows.iter().all(|r| r["accepted"] == 0.0));

    let o = naedsim(&["inject", "--n", "2", "--q", "2", "--error", "phase", "--theta", "0.7", "--format", "csv"], None);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("site,qubit,rejection,accepted,corruption,accepted_deviation\n"));
}

#[test]
fn config_errors_exit_2() {
    let o = naedsim(&["sweep", "--n", "5,6", "--q", "4,5", "--reps", "1"], None);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("(6,5)") && !err.contains("(5,5)"), "{err}");

    let bell = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/01_bell.dsl");
    for args in [
        &["run", "--n", "2", "--q", "2", "--p-gate", "1.5"][..],
        &["run", "--n", "1", "--q", "2"][..],
        &["run", "--n", "2", "--q", "2", "--reps", "0"][..],
        &["plotdata", "/nonexistent.csv"][..],
        &["inject", "--n", "2", "--q", "2", "--error", "W"][..],
        &["lower", bell, "--q", "2", "--s", "7"][..],
        &["lower", bell, "--q", "2", "--s", "0,x"][..],
        &["run", "--bogus"][..],
    ] {
        let o = naedsim(args, None);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = naedsim(&["verify"], Some("zero"));
    assert_eq!(o.status.code(), Some(2));
}
