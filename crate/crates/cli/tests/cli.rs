//! Exit codes and error-path behavior of the command-line interface.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nvcharge"))
}

fn run(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = bin().args(args).current_dir(dir).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stderr).to_string(),
    )
}

#[test]
fn unknown_preset_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(dir.path(), &["simulate", "--preset", "S9"]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("unknown preset"), "{err}");
}

#[test]
fn missing_input_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(
        dir.path(),
        &["imbalance", "--curve", "nope.csv", "--out", "o.json"],
    );
    assert_eq!(code, 3, "{err}");
}

#[test]
fn malformed_csv_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.csv"),
        "frequency_mhz,contrast\n2870.0,0.5\n2870.1,not-a-number\n",
    )
    .unwrap();
    let (code, err) = run(
        dir.path(),
        &[
            "fit-single",
            "--data",
            "bad.csv",
            "--phi-mw",
            "0",
            "--out",
            "o.json",
        ],
    );
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("bad.csv:3"), "{err}");
    assert!(err.contains("column 2"), "{err}");
}

#[test]
fn missing_required_column_is_diagnosed() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cols.csv"), "freq,amp\n1,2\n2,3\n").unwrap();
    let (code, err) = run(
        dir.path(),
        &[
            "fit-single",
            "--data",
            "cols.csv",
            "--phi-mw",
            "0",
            "--out",
            "o.json",
        ],
    );
    assert_eq!(code, 2);
    assert!(err.contains("frequency_mhz"), "{err}");
}

#[test]
fn empty_file_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.csv"), "").unwrap();
    let (code, err) = run(
        dir.path(),
        &[
            "fit-single",
            "--data",
            "empty.csv",
            "--phi-mw",
            "0",
            "--out",
            "o.json",
        ],
    );
    assert_eq!(code, 2, "{err}");
}

#[test]
fn future_schema_major_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("future.csv"),
        "# nvcharge-curve v2\nphi_mw_deg,imbalance\n0,0.1\n30,0.2\n45,0.0\n90,-0.1\n",
    )
    .unwrap();
    let (code, err) = run(
        dir.path(),
        &["imbalance", "--curve", "future.csv", "--out", "o.json"],
    );
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("unsupported schema"), "{err}");
}

#[test]
fn insufficient_curve_span_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("short.csv"),
        "phi_mw_deg,imbalance\n0,0.1\n10,0.2\n20,0.3\n",
    )
    .unwrap();
    let (code, err) = run(
        dir.path(),
        &["imbalance", "--curve", "short.csv", "--out", "o.json"],
    );
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("spanning"), "{err}");
}

#[test]
fn zero_field_localization_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(
        dir.path(),
        &[
            "localize",
            "--pi-z",
            "0",
            "--pi-perp",
            "0",
            "--phi-e",
            "0",
            "--out",
            "o.json",
        ],
    );
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("field is zero"), "{err}");
}

#[test]
fn grid_too_coarse_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(
        dir.path(),
        &[
            "simulate",
            "--rho-c",
            "0.1",
            "--gamma",
            "0.05",
            "--grid",
            "2860:2880:21",
            "--realizations",
            "5x5",
            "--out",
            "s.csv",
        ],
    );
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("too coarse"), "{err}");
}

#[test]
fn bad_toml_config_is_diagnosed() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[simulate]\nrho_c = \"plenty\"\n").unwrap();
    let (code, err) = run(
        dir.path(),
        &["--config", "bad.toml", "simulate", "--out", "s.csv"],
    );
    assert_eq!(code, 2, "{err}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("typo.toml"), "[simulate]\nrho_sea = 1.0\n").unwrap();
    let (code, err) = run(
        dir.path(),
        &["--config", "typo.toml", "simulate", "--out", "s.csv"],
    );
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("rho_sea") || err.contains("unknown"), "{err}");
}
