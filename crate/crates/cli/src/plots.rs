//! Which plot each command draws from its tables.

use std::collections::BTreeMap;

use nzgate::schema::Table;

use crate::commands::Command;
use crate::svg::{heat_map, line_plot, Series};

fn column(t: &Table, name: &str) -> Vec<f64> {
    t.numbers(name).unwrap_or_default()
}

fn lines(t: &Table, x: &str, ys: &[&str]) -> Vec<Series> {
    let xs = column(t, x);
    ys.iter()
        .map(|&y| Series { name: y.to_string(), points: xs.iter().copied().zip(column(t, y)).collect() })
        .collect()
}

/// Series of `y` against `x`, one per distinct value of the text column `by`.
fn grouped(t: &Table, x: &str, y: &str, by: &str) -> Vec<Series> {
    let (Some(ix), Some(iy), Some(ib)) = (t.column(x), t.column(y), t.column(by)) else { return Vec::new() };
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &t.rows {
        let p = (r[ix].parse().unwrap_or(f64::NAN), r[iy].parse().unwrap_or(f64::NAN));
        groups.entry(r[ib].clone()).or_default().push(p);
    }
    groups.into_iter().map(|(name, points)| Series { name, points }).collect()
}

fn sorted_unique(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(f64::total_cmp);
    u.dedup();
    u
}

/// Axis of a spectrum sweep: whichever frequency column varies.
fn varying(t: &Table, candidates: &[&'static str]) -> &'static str {
    candidates.iter().copied().find(|c| sorted_unique(&column(t, c)).len() > 1).unwrap_or(candidates[0])
}

pub fn render(cmd: Command, tables: &[Table]) -> Option<String> {
    let t = tables.first()?;
    if t.rows.is_empty() {
        return None;
    }
    Some(match cmd {
        Command::Spectrum => {
            let x = varying(t, &["omega_c", "omega_q1", "omega_q2"]);
            let mut s = grouped(t, x, "energy", "level");
            s.sort_by_key(|s| s.name.parse::<usize>().unwrap_or(0));
            for s in &mut s {
                s.name = format!("level {}", s.name);
            }
            line_plot("Dressed levels", &format!("{x} (GHz)"), "energy (GHz)", &s, false)
        }
        Command::ZzMap => {
            let (x, y) = (column(t, "omega_c"), column(t, "g_12"));
            let (xs, ys) = (sorted_unique(&x), sorted_unique(&y));
            let mut z = vec![vec![f64::NAN; xs.len()]; ys.len()];
            for ((xv, yv), zv) in x.iter().zip(&y).zip(column(t, "zeta_exact")) {
                let i = xs.partition_point(|&a| a < *xv);
                let j = ys.partition_point(|&a| a < *yv);
                z[j][i] = zv;
            }
            heat_map("Static ZZ rate (GHz)", "omega_c (GHz)", "g_12 (GHz)", &xs, &ys, &z)
        }
        Command::OverlapScan => line_plot(
            "Coupler admixture",
            "omega_c (GHz)",
            "overlap",
            &lines(t, "omega_c", &["overlap_100_010", "overlap_101_110_011", "overlap_closed_form"]),
            true,
        ),
        Command::SwapScan => {
            line_plot("CZ exchange rate", "omega_c (GHz)", "gtilde (GHz)", &lines(t, "omega_c", &["gtilde_fit", "gtilde_gap"]), false)
        }
        Command::ZzRamsey => line_plot(
            "Conditional Ramsey angle",
            "time (ns)",
            "angle (rad)",
            &grouped(t, "time", "angle", "omega_c").into_iter().chain(lines(t, "time", &["angle_static"]).into_iter().take(1)).collect::<Vec<_>>(),
            false,
        ),
        Command::Leakage => line_plot("Coherent leakage", "t_p (ns)", "population", &lines(t, "t_p", &["p_010", "p_110_011", "p_partner"]), true),
        Command::GateError(_) => line_plot("Gate error", "duration (ns)", "1 - F", &grouped(t, "duration", "error", "mask"), true),
        Command::Xeb => line_plot("XEB decay", "depth", "XEB fidelity", &grouped(t, "depth", "xeb", "sequence"), false),
        Command::Calibrate => return None,
    })
}
