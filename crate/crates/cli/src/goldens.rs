//! Regenerating committed artifacts and checking them against the goldens.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nzgate::golden::{compare_csv, GoldenManifest, GoldenReport};
use nzgate::scenario::Scenario;
use nzgate::schema::Table;
use nzgate::{Error, Result};

use crate::commands::Command;
use crate::runner::{compute, write_atomic};

/// The manifest's scenario, resolved relative to the golden directory.
pub fn golden_scenario(dir: &Path, manifest: &GoldenManifest) -> Result<Scenario> {
    let local = dir.join(&manifest.scenario);
    if local.is_file() {
        Scenario::load(&local.to_string_lossy())
    } else {
        Scenario::load(&manifest.scenario)
    }
}

fn regenerate(manifest: &GoldenManifest, sc: &Scenario) -> Result<BTreeMap<String, String>> {
    let mut cache: BTreeMap<&str, Vec<Table>> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for e in &manifest.files {
        let cmd = Command::from_name(&e.command).ok_or_else(|| Error::Scenario(format!("unknown command `{}`", e.command)))?;
        if !cache.contains_key(e.command.as_str()) {
            cache.insert(&e.command, compute(cmd, sc, None)?.0);
        }
        let stem = e.file.trim_end_matches(".csv");
        let table = cache[e.command.as_str()]
            .iter()
            .find(|t| t.schema.name == stem)
            .ok_or_else(|| Error::Scenario(format!("`{}` does not produce {}", e.command, e.file)))?;
        out.insert(e.file.clone(), table.to_csv_string()?);
    }
    Ok(out)
}

/// Recomputes every golden file of `dir`, with `tweak` applied to the scenario
/// first, and compares each with the committed copy at its declared tolerance.
pub fn verify_goldens(dir: &Path, tweak: &[(String, f64)]) -> Result<GoldenReport> {
    let manifest = GoldenManifest::load(dir)?;
    let mut sc = golden_scenario(dir, &manifest)?;
    for (path, v) in tweak {
        sc.set_path(path, *v)?;
    }
    let fresh = regenerate(&manifest, &sc)?;
    let mut files = Vec::new();
    for e in &manifest.files {
        let expected = fs::read_to_string(dir.join(&e.file))?;
        files.push(compare_csv(&e.file, &expected, &fresh[&e.file], e.tolerance));
    }
    Ok(GoldenReport { files })
}

/// Rewrites the golden files of `dir` from the current build.
pub fn update_goldens(dir: &Path) -> Result<Vec<String>> {
    let manifest = GoldenManifest::load(dir)?;
    let sc = golden_scenario(dir, &manifest)?;
    let fresh = regenerate(&manifest, &sc)?;
    for (file, text) in &fresh {
        write_atomic(&dir.join(file), text.as_bytes())?;
    }
    Ok(fresh.into_keys().collect())
}
