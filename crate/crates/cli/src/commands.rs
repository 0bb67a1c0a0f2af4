//! The sweep subcommands: one grid point in, rows of a CSV table out.

use std::f64::consts::PI;

use nzgate::calibrate::{calibrate_gate, leakage_sweep};
use nzgate::dynamics::NoiseModel;
use nzgate::hilbert::{pair_splitting, xy_coupling, zz_exact, DressedBasis, Spectrum};
use nzgate::metrics::{gate_error, ramsey_zz_curve, swap_rate, SwapVariant, SwapWindow};
use nzgate::perturbation::{leakage_overlap_closed_form, zeta_perturbative};
use nzgate::scenario::{Scenario, TIME_AXIS};
use nzgate::schema::{self, fmt_f64, Schema, Table};
use nzgate::xeb::{cycle_error, run_xeb, Estimate, Interleave, XebCurve, XebReport, D};
use nzgate::{BareLabel, Element, Error, Result, SystemParams};
use serde::Serialize;
use serde_json::{json, Value};

/// Which elements decohere in `gate-error`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mask {
    #[default]
    All,
    Q1,
    Q2,
    Coupler,
}

impl Mask {
    pub fn name(self) -> &'static str {
        match self {
            Mask::All => "all",
            Mask::Q1 => "q1",
            Mask::Q2 => "q2",
            Mask::Coupler => "coupler",
        }
    }

    pub fn apply(self, noise: &NoiseModel) -> NoiseModel {
        match self {
            Mask::All => noise.clone(),
            Mask::Q1 => noise.only(&[Element::Q1]),
            Mask::Q2 => noise.only(&[Element::Q2]),
            Mask::Coupler => noise.only(&[Element::Coupler]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    ZzMap,
    OverlapScan,
    SwapScan,
    ZzRamsey,
    Leakage,
    GateError(Mask),
    Calibrate,
    Xeb,
}

impl Command {
    /// Name used on the command line, in scenario keys and as the output stem.
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::ZzMap => "zz-map",
            Command::OverlapScan => "overlap-scan",
            Command::SwapScan => "swap-scan",
            Command::ZzRamsey => "zz-ramsey",
            Command::Leakage => "leakage",
            Command::GateError(_) => "gate-error",
            Command::Calibrate => "calibrate",
            Command::Xeb => "xeb",
        }
    }

    pub fn from_name(name: &str) -> Option<Command> {
        Some(match name {
            "spectrum" => Command::Spectrum,
            "zz-map" => Command::ZzMap,
            "overlap-scan" => Command::OverlapScan,
            "swap-scan" => Command::SwapScan,
            "zz-ramsey" => Command::ZzRamsey,
            "leakage" => Command::Leakage,
            "gate-error" => Command::GateError(Mask::All),
            "calibrate" => Command::Calibrate,
            "xeb" => Command::Xeb,
            _ => return None,
        })
    }

    pub fn schemas(self) -> &'static [Schema] {
        match self {
            Command::Spectrum => &[schema::SPECTRUM],
            Command::ZzMap => &[schema::ZZ_MAP],
            Command::OverlapScan => &[schema::OVERLAP_SCAN],
            Command::SwapScan => &[schema::SWAP_SCAN],
            Command::ZzRamsey => &[schema::ZZ_RAMSEY],
            Command::Leakage => &[schema::LEAKAGE],
            Command::GateError(_) => &[schema::GATE_ERROR],
            Command::Calibrate => &[schema::CALIBRATE],
            Command::Xeb => &[schema::XEB_CURVE, schema::XEB_SUMMARY],
        }
    }

    /// Whether grid axes are accepted; `xeb` runs once per scenario.
    pub fn sweepable(self) -> bool {
        !matches!(self, Command::Xeb)
    }
}

/// Coordinates of one grid point: `(path, value)` per swept axis.
pub type Point = Vec<(String, f64)>;

/// Device parameters for a point: the coupler idles per the scenario's policy
/// unless the grid sets its frequency explicitly.
pub fn system_for(sc: &Scenario, point: &Point) -> Result<SystemParams> {
    if point.iter().any(|(p, _)| p == "system.omega_c") {
        sc.system.validate()?;
        Ok(sc.system.clone())
    } else {
        sc.idle_system()
    }
}

fn label_text(l: BareLabel) -> String {
    format!("{}{}{}", l.n_q1, l.n_c, l.n_q2)
}

fn spectrum(sys: &SystemParams) -> Result<Table> {
    let basis = DressedBasis::new(sys);
    let mut label_of = vec![BareLabel::new(0, 0, 0); basis.eigen_of.len()];
    for l in BareLabel::all() {
        label_of[basis.eigen_of[l.index()]] = l;
    }
    let mut t = Table::new(schema::SPECTRUM);
    for (k, &e) in basis.spectrum.energies.iter().enumerate() {
        let l = label_of[k];
        t.push(vec![
            fmt_f64(sys.omega_q1),
            fmt_f64(sys.omega_c),
            fmt_f64(sys.omega_q2),
            k.to_string(),
            fmt_f64(e),
            label_text(l),
            fmt_f64(basis.spectrum.overlap(l, k)),
        ])?;
    }
    Ok(t)
}

fn zz_map(sys: &SystemParams) -> Result<Table> {
    let mut t = Table::new(schema::ZZ_MAP);
    t.push_numbers(&[sys.g_12, sys.omega_c, xy_coupling(sys), zz_exact(sys)?, zeta_perturbative(sys)?.total])?;
    Ok(t)
}

/// Exchange partner of |101> for the higher qubit moving down onto it.
fn cz_partner(sys: &SystemParams) -> BareLabel {
    if sys.omega_q1 >= sys.omega_q2 {
        BareLabel::new(2, 0, 0)
    } else {
        BareLabel::new(0, 0, 2)
    }
}

fn overlap_scan(sys: &SystemParams) -> Result<Table> {
    let s = Spectrum::of_params(sys);
    let (k1, _) = s.best_match(BareLabel::new(1, 0, 0));
    let (k2, _) = s.best_match(BareLabel::new(1, 0, 1));
    let single = s.overlap(BareLabel::new(0, 1, 0), k1);
    let double = s.overlap(BareLabel::new(1, 1, 0), k2) + s.overlap(BareLabel::new(0, 1, 1), k2);
    let closed = leakage_overlap_closed_form(sys);
    let mut t = Table::new(schema::OVERLAP_SCAN);
    t.push_numbers(&[
        sys.omega_c,
        single,
        double,
        pair_splitting(sys, BareLabel::new(1, 0, 1), cz_partner(sys)),
        closed.overlap_1photon,
        closed.gtilde_approx,
    ])?;
    Ok(t)
}

fn swap_scan(sc: &Scenario, sys: &SystemParams) -> Result<Table> {
    let tuned = sc.gate.pulsed(sys);
    let p = swap_rate(sys, sys.omega_c, SwapVariant::Cz, tuned, SwapWindow::default())?;
    let mut t = Table::new(schema::SWAP_SCAN);
    t.push_numbers(&[p.omega_c, p.omega_c - p.resonance, p.resonance, p.gtilde_fit, p.gtilde_gap, p.contrast])?;
    Ok(t)
}

fn zz_ramsey(sys: &SystemParams, times: &[f64]) -> Result<Table> {
    let angles = ramsey_zz_curve(sys, times)?;
    let zeta = zz_exact(sys)?;
    let mut t = Table::new(schema::ZZ_RAMSEY);
    for (&time, &a) in times.iter().zip(&angles) {
        t.push_numbers(&[sys.omega_c, time, a, 2.0 * PI * zeta * time, zeta])?;
    }
    Ok(t)
}

fn leakage(sc: &Scenario, sys: &SystemParams) -> Result<Table> {
    let p = leakage_sweep(sys, &sc.gate, &[sc.gate.t_p])?[0];
    let mut t = Table::new(schema::LEAKAGE);
    t.push_numbers(&[p.t_p, sc.gate.total_duration(), p.v, p.coupler_on_freq, p.coupler_inset, p.p_010, p.p_110_011, p.p_partner])?;
    Ok(t)
}

fn gate_error_row(sc: &Scenario, sys: &SystemParams, mask: Mask) -> Result<Table> {
    let cal = calibrate_gate(sys, &sc.gate, sc.target_phi)?;
    let e = gate_error(sys, &cal.params, &mask.apply(&sc.noise))?;
    let mut t = Table::new(schema::GATE_ERROR);
    t.push(vec![
        fmt_f64(sc.gate.t_p),
        fmt_f64(e.duration),
        mask.name().to_string(),
        fmt_f64(e.error),
        fmt_f64(e.coherent_error),
        fmt_f64(e.decoherence_error),
        fmt_f64(e.phi_2q),
    ])?;
    Ok(t)
}

fn calibrate(sc: &Scenario, point: &Point) -> Result<(Table, Value)> {
    let (sys, null) = if point.iter().any(|(p, _)| p == "system.omega_c") {
        (system_for(sc, point)?, None)
    } else {
        sc.idle_point()?
    };
    let cal = calibrate_gate(&sys, &sc.gate, sc.target_phi)?;
    let zeta = null.map_or_else(|| zz_exact(&sys), |n| Ok(n.zeta))?;
    let xy = null.map_or_else(|| xy_coupling(&sys), |n| n.xy_coupling);
    let mut t = Table::new(schema::CALIBRATE);
    t.push_numbers(&[
        sys.omega_c,
        zeta,
        xy,
        cal.exchange.v,
        cal.exchange.coupler_on_freq,
        cal.exchange.coupler_inset,
        cal.phase.a_int,
        sc.target_phi,
        cal.phase.phi_2q,
        cal.exchange.residual,
        cal.exchange.swap_error,
        cal.phase.duration,
    ])?;
    Ok((t, json!({ "omega_c_off": sys.omega_c, "gate": cal.params })))
}

fn estimate_row(t: &mut Table, seq: &str, quantity: &str, e: Estimate) -> Result<()> {
    t.push(vec![seq.into(), quantity.into(), fmt_f64(e.value), fmt_f64(e.lo), fmt_f64(e.hi)])
}

fn point_row(t: &mut Table, seq: &str, quantity: &str, v: f64) -> Result<()> {
    estimate_row(t, seq, quantity, Estimate { value: v, lo: v, hi: v })
}

fn curve_rows(curve_t: &mut Table, summary: &mut Table, seq: &str, c: &XebCurve) -> Result<()> {
    for (i, &d) in c.depths.iter().enumerate() {
        curve_t.push(vec![seq.into(), d.to_string(), fmt_f64(c.xeb[i]), fmt_f64(c.purity[i]), fmt_f64(c.leakage[i])])?;
    }
    estimate_row(summary, seq, "a", c.fit.a)?;
    estimate_row(summary, seq, "p", c.fit.p)?;
    estimate_row(summary, seq, "b", c.fit.b)?;
    let p = c.fit.p;
    estimate_row(
        summary,
        seq,
        "cycle_error",
        Estimate { value: c.cycle_error, lo: cycle_error(p.hi, D), hi: cycle_error(p.lo, D) },
    )?;
    point_row(summary, seq, "purity_error", c.purity_error)?;
    point_row(summary, seq, "leakage_error", c.leakage_error)
}

fn xeb(sc: &Scenario) -> Result<(Vec<Table>, Value)> {
    let sys = sc.idle_system()?;
    let gate = match sc.xeb.interleave {
        Interleave::Calibrated => Some(calibrate_gate(&sys, &sc.gate, sc.target_phi)?.params),
        _ => None,
    };
    let report: XebReport = run_xeb(&sys, &sc.xeb, gate.as_ref())?;
    let mut curve = Table::new(schema::XEB_CURVE);
    let mut summary = Table::new(schema::XEB_SUMMARY);
    curve_rows(&mut curve, &mut summary, "reference", &report.reference)?;
    if let Some(c) = &report.interleaved {
        curve_rows(&mut curve, &mut summary, "interleaved", c)?;
    }
    for (name, v) in [("gate_fidelity", report.gate_fidelity), ("decoherence_error", report.decoherence_error), ("phi_2q", report.phi_2q)] {
        if let Some(v) = v {
            point_row(&mut summary, "gate", name, v)?;
        }
    }
    Ok((vec![curve, summary], json!({ "omega_c_off": sys.omega_c, "gate": gate })))
}

/// Default time axis of `zz-ramsey` (ns).
pub const RAMSEY_TIMES: (f64, f64, usize) = (0.0, 2000.0, 101);

/// Rows produced by one grid point, plus command-specific metadata.
pub fn run_point(cmd: Command, sc: &Scenario, point: &Point) -> Result<(Vec<Table>, Value)> {
    let one = |t: Result<Table>| t.map(|t| (vec![t], Value::Null));
    match cmd {
        Command::Spectrum => one(spectrum(&system_for(sc, point)?)),
        Command::ZzMap => one(zz_map(&system_for(sc, point)?)),
        Command::OverlapScan => one(overlap_scan(&system_for(sc, point)?)),
        Command::SwapScan => one(swap_scan(sc, &system_for(sc, point)?)),
        Command::ZzRamsey => {
            let times = match sc.axes(cmd.name()).iter().find(|a| a.path == TIME_AXIS) {
                Some(a) => a.values(),
                None => nzgate::scenario::SweepAxis::new(TIME_AXIS, RAMSEY_TIMES.0, RAMSEY_TIMES.1, RAMSEY_TIMES.2).values(),
            };
            one(zz_ramsey(&system_for(sc, point)?, &times))
        }
        Command::Leakage => one(leakage(sc, &system_for(sc, point)?)),
        Command::GateError(mask) => one(gate_error_row(sc, &system_for(sc, point)?, mask)),
        Command::Calibrate => calibrate(sc, point).map(|(t, v)| (vec![t], v)),
        Command::Xeb => xeb(sc),
    }
}

/// Checks that the scenario's axes fit the command.
pub fn check_axes(cmd: Command, sc: &Scenario) -> Result<()> {
    let axes = sc.axes(cmd.name());
    if !cmd.sweepable() && !axes.is_empty() {
        return Err(Error::Scenario(format!("`{}` does not accept sweep axes", cmd.name())));
    }
    if cmd != Command::ZzRamsey && axes.iter().any(|a| a.path == TIME_AXIS) {
        return Err(Error::Scenario(format!("`{TIME_AXIS}` is only an axis of zz-ramsey")));
    }
    Ok(())
}
