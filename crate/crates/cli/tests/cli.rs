use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nzgate::schema::{self, Table};

fn nzgate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nzgate")).args(args).env("RUST_LOG", "error").output().unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    let line = String::from_utf8_lossy(&out.stderr).lines().last().unwrap_or_default().to_string();
    serde_json::from_str(&line).unwrap_or_else(|e| panic!("stderr `{line}`: {e}"))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(nzgate(&["bogus"]).status.code(), Some(2));
}

#[test]
fn missing_scenario_exits_2_with_record() {
    let out = nzgate(&["spectrum", "--scenario", "no-such-scenario"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "Scenario");
}

#[test]
fn unknown_parameter_path_exits_2() {
    let out = nzgate(&["spectrum", "--set", "system.nope=1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn domain_errors_exit_1_with_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = nzgate(&["calibrate", "--out", path(dir.path()), "--set", "idle.range.0=10", "--set", "idle.range.1=10.5"]);
    assert_eq!(out.status.code(), Some(1));
    let rec = error_json(&out);
    assert_eq!(rec["error"], "NoNullInRange");
    assert!(rec["message"].as_str().unwrap().contains("10.5"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for (d, workers) in [(&a, "1"), (&b, "2")] {
        let out = nzgate(&["overlap-scan", "--out", path(d.path()), "--workers", workers, "--seed", "7"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["overlap-scan.csv", "overlap-scan.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn csv_has_schema_header_and_unix_newlines() {
    let dir = tempfile::tempdir().unwrap();
    let out = nzgate(&["spectrum", "--out", path(dir.path()), "--svg"]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert!(!text.contains('\r'));
    assert!(text.ends_with('\n'));
    assert_eq!(text.lines().next().unwrap(), schema::SPECTRUM.columns.join(","));
    let t = Table::read_csv(schema::SPECTRUM, &text).unwrap();
    assert_eq!(t.rows.len(), 141 * 27);
    let svg = fs::read_to_string(dir.path().join("spectrum.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("spectrum.json")).unwrap()).unwrap();
    assert_eq!(meta["schemas"][0]["version"], schema::SPECTRUM.version);
    assert!(!dir.path().join(".parts-spectrum").exists());
}

#[test]
fn uncoupled_device_has_no_zz_anywhere() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("uncoupled.toml");
    fs::write(
        &scenario,
        "extends = \"device-2q\"\nname = \"uncoupled\"\n\n[system]\ng_1c = 0.0\ng_2c = 0.0\ng_12 = 0.0\n\n\
         [[sweeps.zz-map]]\npath = \"system.omega_c\"\nstart = 6.0\nstop = 12.0\nsteps = 13\n",
    )
    .unwrap();
    let out = nzgate(&["zz-map", "--scenario", path(&scenario), "--out", path(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = Table::read_csv(schema::ZZ_MAP, &fs::read_to_string(dir.path().join("zz-map.csv")).unwrap()).unwrap();
    assert_eq!(t.rows.len(), 13);
    for c in ["gtilde", "zeta_exact", "zeta_perturbative"] {
        assert!(t.numbers(c).unwrap().iter().all(|x| x.abs() < 1e-12), "{c}");
    }
}
