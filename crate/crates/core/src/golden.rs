//! Tolerance comparison of regenerated CSV artifacts against committed goldens.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_REL_TOL: f64 = 1e-9;

/// Accepts `|a - b| <= abs + rel * max(|a|, |b|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    #[serde(default = "default_rel")]
    pub rel: f64,
    #[serde(default)]
    pub abs: f64,
}

fn default_rel() -> f64 {
    DEFAULT_REL_TOL
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rel: DEFAULT_REL_TOL, abs: 0.0 }
    }
}

impl Tolerance {
    pub fn accepts(&self, a: f64, b: f64) -> bool {
        if a.is_nan() || b.is_nan() {
            return a.is_nan() && b.is_nan();
        }
        if a == b {
            return true;
        }
        (a - b).abs() <= self.abs + self.rel * a.abs().max(b.abs())
    }
}

/// One golden artifact: which subcommand produces it and how closely it must match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldenEntry {
    pub command: String,
    pub file: String,
    #[serde(default)]
    pub tolerance: Tolerance,
}

/// `manifest.toml` of a golden directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldenManifest {
    /// Scenario file (relative to the manifest) or built-in name.
    pub scenario: String,
    #[serde(default, rename = "file")]
    pub files: Vec<GoldenEntry>,
}

impl GoldenManifest {
    pub const FILE: &'static str = "manifest.toml";

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(Self::FILE);
        let text = std::fs::read_to_string(&path)?;
        toml::from_str(&text).map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))
    }
}

/// Outcome of comparing one file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileCheck {
    pub file: String,
    pub identical: bool,
    pub rows: usize,
    pub mismatched_cells: usize,
    /// Largest `|a - b| / max(|a|, |b|)` over numeric cells.
    pub max_rel_diff: f64,
    /// First offending cell or structural problem.
    pub first: Option<String>,
}

impl FileCheck {
    pub fn passed(&self) -> bool {
        self.identical || (self.mismatched_cells == 0 && self.first.is_none())
    }
}

impl fmt::Display for FileCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.identical {
            return write!(f, "{}: identical ({} rows)", self.file, self.rows);
        }
        write!(f, "{}: {} of {} rows, max rel diff {:.3e}", self.file, self.mismatched_cells, self.rows, self.max_rel_diff)?;
        if let Some(x) = &self.first {
            write!(f, "; {x}")?;
        }
        Ok(())
    }
}

fn split(text: &str) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    r.records().filter_map(|x| x.ok()).map(|rec| rec.iter().map(str::to_string).collect()).collect()
}

/// Compares two CSV texts: byte-identical files pass immediately, otherwise
/// the headers and non-numeric cells must match exactly and numeric cells
/// within `tol`.
pub fn compare_csv(file: &str, expected: &str, actual: &str, tol: Tolerance) -> FileCheck {
    let exp = split(expected);
    let act = split(actual);
    let mut check = FileCheck {
        file: file.to_string(),
        identical: expected == actual,
        rows: exp.len().saturating_sub(1),
        mismatched_cells: 0,
        max_rel_diff: 0.0,
        first: None,
    };
    if check.identical {
        return check;
    }
    if exp.len() != act.len() {
        check.first = Some(format!("row count {} vs {}", exp.len().saturating_sub(1), act.len().saturating_sub(1)));
        return check;
    }
    if exp.first() != act.first() {
        check.first = Some(format!("header {:?} vs {:?}", exp.first(), act.first()));
        return check;
    }
    let header = exp.first().cloned().unwrap_or_default();
    for (i, (re, ra)) in exp.iter().zip(&act).enumerate().skip(1) {
        if re.len() != ra.len() {
            check.mismatched_cells += 1;
            check.first.get_or_insert_with(|| format!("row {i}: {} vs {} cells", re.len(), ra.len()));
            continue;
        }
        for (j, (e, a)) in re.iter().zip(ra).enumerate() {
            let ok = match (e.parse::<f64>(), a.parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    let scale = x.abs().max(y.abs());
                    if scale > 0.0 && x.is_finite() && y.is_finite() {
                        check.max_rel_diff = check.max_rel_diff.max((x - y).abs() / scale);
                    }
                    tol.accepts(x, y)
                }
                _ => e == a,
            };
            if !ok {
                check.mismatched_cells += 1;
                let col = header.get(j).map_or("?", String::as_str);
                check.first.get_or_insert_with(|| format!("row {i} `{col}`: expected {e}, got {a}"));
            }
        }
    }
    check
}

/// Checks of every file in a golden directory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldenReport {
    pub files: Vec<FileCheck>,
}

impl GoldenReport {
    pub fn passed(&self) -> bool {
        self.files.iter().all(FileCheck::passed)
    }

    /// `GoldenMismatch` naming the failing files with their diff summaries.
    pub fn into_result(self) -> Result<Self> {
        let bad: Vec<&FileCheck> = self.files.iter().filter(|f| !f.passed()).collect();
        if bad.is_empty() {
            return Ok(self);
        }
        Err(Error::GoldenMismatch {
            file: bad.iter().map(|f| f.file.as_str()).collect::<Vec<_>>().join(", "),
            detail: bad.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(" | "),
        })
    }
}

impl fmt::Display for GoldenReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.files {
            writeln!(f, "{} {c}", if c.passed() { "ok  " } else { "FAIL" })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: &str = "x,y,tag\n1,2.5,a\n3,0,b\n";

    #[test]
    fn identical_files_pass() {
        let c = compare_csv("a.csv", A, A, Tolerance::default());
        assert!(c.identical && c.passed());
    }

    #[test]
    fn within_tolerance_passes() {
        let b = "x,y,tag\n1,2.5000000000001,a\n3,0,b\n";
        let c = compare_csv("a.csv", A, b, Tolerance::default());
        assert!(!c.identical && c.passed(), "{c}");
        assert!(c.max_rel_diff > 0.0);
    }

    #[test]
    fn numeric_and_text_mismatches_fail() {
        let b = "x,y,tag\n1,2.51,a\n3,0,c\n";
        let c = compare_csv("a.csv", A, b, Tolerance::default());
        assert_eq!(c.mismatched_cells, 2);
        assert!(c.first.as_deref().unwrap().contains("`y`"));
        let report = GoldenReport { files: vec![c] };
        assert!(matches!(report.into_result(), Err(Error::GoldenMismatch { .. })));
    }

    #[test]
    fn structure_mismatch_fails() {
        assert!(!compare_csv("a", A, "x,y,tag\n1,2.5,a\n", Tolerance::default()).passed());
        assert!(!compare_csv("a", A, "x,z,tag\n1,2.5,a\n3,0,b\n", Tolerance::default()).passed());
    }

    #[test]
    fn absolute_floor_near_zero() {
        let t = Tolerance { rel: 1e-9, abs: 1e-12 };
        assert!(t.accepts(0.0, 5e-13));
        assert!(!Tolerance::default().accepts(0.0, 5e-13));
        assert!(t.accepts(f64::NAN, f64::NAN));
        assert!(!t.accepts(f64::NAN, 0.0));
    }

    #[test]
    fn manifest_parses() {
        let m: GoldenManifest = toml::from_str(
            "scenario = \"s.toml\"\n[[file]]\ncommand = \"zz-map\"\nfile = \"zz-map.csv\"\ntolerance = { abs = 1e-12 }\n",
        )
        .unwrap();
        assert_eq!(m.files[0].tolerance, Tolerance { rel: DEFAULT_REL_TOL, abs: 1e-12 });
    }
}
