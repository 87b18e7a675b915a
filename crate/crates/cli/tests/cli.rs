//! End-to-end checks of the binary: document formats, determinism, config
//! precedence, and the documented exit codes.

use std::io::Write as _;
use std::process::{Command, Output};

use serde_json::Value;

fn ehcap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ehcap"))
        .args(args)
        .output()
        .expect("binary launches")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is utf8")
}

fn code_of(out: &Output) -> i32 {
    out.status.code().expect("process exits normally")
}

// ---------------------------------------------------------------------------
// Document formats
// ---------------------------------------------------------------------------

#[test]
fn sweep_csv_header_is_pinned_and_rows_are_binary() {
    let out = ehcap(&[
        "sweep", "--axis", "pon", "--fixed", "2.25", "--lo", "0.2", "--hi", "1.0", "--steps", "5",
    ]);
    assert_eq!(code_of(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout_of(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("axis,c_causal_nats,c_si_both_nats,c_battery_nats,support_size"),
        "header row is pinned"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5, "one row per grid point");
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 5, "five columns in {row:?}");
        assert_eq!(fields[4], "2", "binary support on every row: {row:?}");
        let causal: f64 = fields[1].parse().expect("causal parses");
        let si_both: f64 = fields[2].parse().expect("si_both parses");
        let battery: f64 = fields[3].parse().expect("battery parses");
        assert!(causal >= -1e-9 && causal <= si_both + 1e-9 && si_both <= battery + 1e-9,
            "ordering chain on {row:?}");
    }
    assert!(text.ends_with('\n'), "trailing newline");
    assert!(!text.contains('\r'), "unix line endings");
}

#[test]
fn sweep_csv_is_byte_deterministic() {
    let args = [
        "sweep", "--axis", "energy", "--fixed", "0.5", "--lo", "1.0", "--hi", "2.0", "--steps",
        "4",
    ];
    let first = ehcap(&args);
    let second = ehcap(&args);
    assert_eq!(code_of(&first), 0);
    assert_eq!(first.stdout, second.stdout, "repeated runs emit identical bytes");
}

#[test]
fn sweep_json_round_trips_to_identical_bytes() {
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("sweep.json");
    let out = ehcap(&[
        "sweep", "--axis", "pon", "--fixed", "1.0", "--lo", "0.5", "--hi", "1.0", "--steps", "3",
        "--format", "json", "--out", path.to_str().expect("utf8 path"),
    ]);
    assert_eq!(code_of(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let raw = std::fs::read_to_string(&path).expect("document written");
    let parsed: Value = serde_json::from_str(&raw).expect("document parses");
    let mut reemitted = serde_json::to_string_pretty(&parsed).expect("re-emission");
    reemitted.push('\n');
    assert_eq!(reemitted, raw, "parse then re-emit is the identity on bytes");

    let rows = parsed["rows"].as_array().expect("rows array");
    assert_eq!(rows.len(), 3);
    for row in rows {
        for key in ["axis", "c_battery_nats", "c_causal_nats", "c_si_both_nats", "support_size"] {
            assert!(row.get(key).is_some(), "row has {key}");
        }
    }
    assert_eq!(parsed["meta"]["axis_name"], "p_on");
}

#[test]
fn ucurve_emits_pinned_thresholds() {
    let out = ehcap(&["ucurve", "--grid", "0.5,1.0"]);
    assert_eq!(code_of(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout_of(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "p_on,u_threshold", "header row is pinned");
    assert_eq!(lines.len(), 3);
    let u_half: f64 = lines[1].split(',').nth(1).expect("u column").parse().expect("parses");
    let u_one: f64 = lines[2].split(',').nth(1).expect("u column").parse().expect("parses");
    assert!((u_half - 1.74).abs() <= 0.02, "U(0.5) = {u_half}");
    assert!((u_one - 1.66).abs() <= 0.02, "U(1.0) = {u_one}");
    assert!(u_one <= u_half, "nonincreasing");
}

#[test]
fn smith_report_names_the_binary_support() {
    let out = ehcap(&["smith", "--amplitude", "1.5"]);
    assert_eq!(code_of(&out), 0);
    let text = stdout_of(&out);
    assert!(text.contains("capacity:"), "capacity line present:\n{text}");
    assert!(text.contains("0.526777307"), "frozen capacity value:\n{text}");
    assert!(text.contains("2 points"), "binary support:\n{text}");
    assert!(text.contains("+1.500000000") && text.contains("-1.500000000"),
        "support at the corners:\n{text}");
}

#[test]
fn smith_zero_amplitude_has_zero_capacity() {
    let out = ehcap(&["smith", "--amplitude", "0"]);
    assert_eq!(code_of(&out), 0);
    let text = stdout_of(&out);
    assert!(text.contains("capacity:   0.000000000 nats"), "zero capacity:\n{text}");
}

#[test]
fn bits_flag_adds_converted_values() {
    let out = ehcap(&["smith", "--amplitude", "1.5", "--bits"]);
    let text = stdout_of(&out);
    let nats = 0.526777306521f64;
    let expected = format!("({:.9} bits)", nats / std::f64::consts::LN_2);
    assert!(text.contains(&expected), "bits conversion shown: {text}");
}

#[test]
fn onoff_json_reduces_to_static_at_pon_one() {
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("onoff.json");
    let out = ehcap(&[
        "onoff", "--pon", "1", "--energy", "2.25", "--out",
        path.to_str().expect("utf8 path"),
    ]);
    assert_eq!(code_of(&out), 0);
    assert!(stdout_of(&out).contains("c_causal:"), "human report still on stdout");
    let doc: Value =
        serde_json::from_str(&std::fs::read_to_string(&path).expect("written")).expect("parses");
    let causal = doc["solution"]["capacity_nats"].as_f64().expect("causal");
    let si_both = doc["baselines"]["c_si_both_nats"].as_f64().expect("si_both");
    assert!(
        (causal - si_both).abs() <= 1e-9,
        "p_on = 1 collapses the gap: causal {causal}, si_both {si_both}"
    );
}

// ---------------------------------------------------------------------------
// Config precedence
// ---------------------------------------------------------------------------

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let mut file = tempfile::NamedTempFile::new().expect("temp file");
    writeln!(file, "tol = 1e-4\nseed = 11").expect("write config");
    let config = file.path().to_str().expect("utf8 path");

    let out = ehcap(&["smith", "--amplitude", "1.0", "--format", "json", "--config", config]);
    let doc: Value = serde_json::from_str(&stdout_of(&out)).expect("json to stdout");
    assert_eq!(doc["meta"]["tol"], 1e-4, "config value lands in meta");
    assert_eq!(doc["meta"]["seed"], 11, "config seed lands in meta");

    let out = ehcap(&[
        "smith", "--amplitude", "1.0", "--format", "json", "--config", config, "--tol", "1e-5",
    ]);
    let doc: Value = serde_json::from_str(&stdout_of(&out)).expect("json to stdout");
    assert_eq!(doc["meta"]["tol"], 1e-5, "explicit flag beats the config value");
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let mut file = tempfile::NamedTempFile::new().expect("temp file");
    writeln!(file, "tolerance = 1e-4").expect("write config");
    let out = ehcap(&[
        "smith", "--amplitude", "1.0", "--config", file.path().to_str().expect("utf8"),
    ]);
    assert_eq!(code_of(&out), 2, "unknown key rejected");
}

// ---------------------------------------------------------------------------
// Exit codes
// ---------------------------------------------------------------------------

#[test]
fn exhausted_cardinality_cap_exits_three() {
    let out = ehcap(&["smith", "--amplitude", "2.0", "--kmax", "2"]);
    assert_eq!(code_of(&out), 3, "non-convergence is exit 3");
    assert!(String::from_utf8_lossy(&out.stderr).contains("support size 2"));
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["onoff", "--pon", "0", "--energy", "1"][..],
        &["onoff", "--pon", "1.5", "--energy", "1"][..],
        &["smith", "--amplitude", "-1"][..],
        &["smith", "--amplitude", "1", "--format", "csv"][..],
        &["sweep", "--axis", "pon", "--fixed", "1", "--lo", "0.5", "--hi", "1.0", "--steps", "1"][..],
        &["sweep", "--axis", "pon", "--fixed", "1", "--lo", "0", "--hi", "1.0", "--steps", "3"][..],
        &["ucurve", "--grid", "0.5,0.5"][..],
        &["smith", "--amplitude", "1", "--no-such-flag"][..],
    ] {
        let out = ehcap(args);
        assert_eq!(code_of(&out), 2, "usage error for {args:?}");
    }
}

// ---------------------------------------------------------------------------
// Validate
// ---------------------------------------------------------------------------

#[test]
fn validate_reports_are_byte_identical_for_a_fixed_seed() {
    let first = ehcap(&["validate", "--seed", "7"]);
    let second = ehcap(&["validate", "--seed", "7"]);
    assert_eq!(code_of(&first), 0, "stderr: {}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(first.stdout, second.stdout, "same seed, same report bytes");
    let text = stdout_of(&first);
    assert_eq!(text.matches("PASS").count(), 5, "all five checks pass:\n{text}");
    assert!(text.contains("validate: 5/5 checks passed"));
}

#[test]
fn validate_fails_when_tightened_below_the_lattice_gap() {
    let out = ehcap(&["validate", "--oracle-tol", "1e-9"]);
    assert_eq!(code_of(&out), 1, "tightened oracle tolerance must fail");
    let text = stdout_of(&out);
    assert!(text.contains("FAIL"), "failing checks are reported:\n{text}");
    assert!(
        text.contains("check static-oracle     FAIL"),
        "the oracle gap check is the one that fails:\n{text}"
    );
}
