//! Command-line front end of the simulator: scenario-driven sweeps that
//! write versioned CSV tables, optional SVG plots and golden-file checks.

pub mod commands;
pub mod goldens;
pub mod plots;
pub mod runner;
pub mod svg;

pub use commands::{Command, Mask};
pub use runner::{compute, run, Artifacts, RunOptions};

use nzgate::Error;

/// Process exit status for an error: 2 for unusable input, 1 for failures
/// inside the computation.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Scenario(_) => 2,
        _ => 1,
    }
}

/// One-line JSON error record.
pub fn error_record(e: &Error) -> String {
    serde_json::json!({ "error": e.kind(), "message": e.to_string() }).to_string()
}

/// Parses `path=value`.
pub fn parse_assignment(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected PATH=VALUE, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("`{v}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}
