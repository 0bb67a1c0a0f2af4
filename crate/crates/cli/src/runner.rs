//! Sweep execution and artifact writing.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nzgate::scenario::{Scenario, TIME_AXIS};
use nzgate::schema::{Schema, Table};
use nzgate::{Error, Result};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::commands::{check_axes, run_point, Command, Point};
use crate::plots;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub svg: bool,
}

/// What a command produced and where it went.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub tables: Vec<Table>,
    pub meta: Value,
    pub files: Vec<PathBuf>,
}

impl Artifacts {
    pub fn table(&self, schema: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.schema.name == schema)
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Cartesian product of the command's axes, first axis slowest.
pub fn grid(cmd: Command, sc: &Scenario) -> Vec<Point> {
    let mut points: Vec<Point> = vec![Vec::new()];
    for axis in sc.axes(cmd.name()).iter().filter(|a| a.path != TIME_AXIS) {
        let values = axis.values();
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push((axis.path.clone(), v));
                    q
                })
            })
            .collect();
    }
    points
}

fn evaluate(cmd: Command, sc: &Scenario, point: &Point) -> Result<(Vec<Table>, Value)> {
    let mut s = sc.clone();
    for (path, v) in point {
        s.set_path(path, *v)?;
    }
    run_point(cmd, &s, point)
}

fn part_path(parts: &Path, index: usize, schema: &Schema) -> PathBuf {
    parts.join(format!("{index:06}.{}.csv", schema.name))
}

/// Runs every grid point on the current rayon pool. With `parts`, each
/// point's rows are written to their own file as soon as they exist, and the
/// merged tables are read back from those files in grid order.
pub fn compute(cmd: Command, scenario: &Scenario, parts: Option<&Path>) -> Result<(Vec<Table>, Value)> {
    check_axes(cmd, scenario)?;
    let sc = scenario.for_command(cmd.name())?;
    let points = grid(cmd, &sc);
    let results: Vec<Result<(Vec<Table>, Value)>> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let out = evaluate(cmd, &sc, p)?;
            if let Some(dir) = parts {
                for t in &out.0 {
                    write_atomic(&part_path(dir, i, &t.schema), t.to_csv_string()?.as_bytes())?;
                }
            }
            Ok(out)
        })
        .collect();
    let mut merged: Vec<Table> = cmd.schemas().iter().map(|&s| Table::new(s)).collect();
    let mut metas = Vec::with_capacity(points.len());
    for (i, r) in results.into_iter().enumerate() {
        let (tables, meta) = r?;
        for (slot, t) in merged.iter_mut().zip(tables) {
            match parts {
                Some(dir) => slot.extend(Table::read_csv(slot.schema, &fs::read_to_string(part_path(dir, i, &slot.schema))?)?)?,
                None => slot.extend(t)?,
            }
        }
        metas.push(meta);
    }
    let meta = if metas.iter().all(Value::is_null) { Value::Null } else { Value::Array(metas) };
    Ok((merged, meta))
}

/// Computes `cmd` and writes `<out>/<schema>.csv` per table, `<out>/<command>.json`
/// with the run metadata, and optionally `<out>/<command>.svg`.
pub fn run(cmd: Command, scenario: &Scenario, opts: &RunOptions) -> Result<Artifacts> {
    fs::create_dir_all(&opts.out)?;
    let parts = opts.out.join(format!(".parts-{}", cmd.name()));
    if parts.exists() {
        fs::remove_dir_all(&parts)?;
    }
    let result = compute(cmd, scenario, Some(&parts));
    let _ = fs::remove_dir_all(&parts);
    let (tables, extra) = result?;
    let mut files = Vec::new();
    for t in &tables {
        let path = opts.out.join(format!("{}.csv", t.schema.name));
        write_atomic(&path, t.to_csv_string()?.as_bytes())?;
        files.push(path);
    }
    let meta = json!({
        "command": cmd.name(),
        "scenario": scenario.name,
        "seed": scenario.seed,
        "schemas": tables.iter().map(|t| json!({ "name": t.schema.name, "version": t.schema.version })).collect::<Vec<_>>(),
        "axes": scenario.axes(cmd.name()),
        "points": extra,
    });
    let path = opts.out.join(format!("{}.json", cmd.name()));
    write_atomic(&path, (serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n").as_bytes())?;
    files.push(path);
    if opts.svg {
        if let Some(svg) = plots::render(cmd, &tables) {
            let path = opts.out.join(format!("{}.svg", cmd.name()));
            write_atomic(&path, svg.as_bytes())?;
            files.push(path);
        }
    }
    Ok(Artifacts { tables, meta, files })
}
