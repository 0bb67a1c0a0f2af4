//! Calibration of the strong-pulse amplitude, the coupler dip, and the
//! weak-pulse amplitude that sets the conditional phase.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::Propagator;
use crate::error::{Error, Result};
use crate::hilbert::{bare_resonance, pair_splitting, DressedBasis};
use crate::linalg::{CMatrix, SplitMatrix};
use crate::metrics::{computational_block, extract_phases, wrap_phase, GateSimulation};
use crate::optimize::{brent_root, golden_min, grid_then_golden, nelder_mead};
use crate::params::{BareLabel, Element, SystemParams, DIM};
use crate::pulse::{coupler_dip_envelope, flattop_envelope, gate_schedule, modulated_params, GateProtocolParams, Schedule};

pub use crate::hilbert::{find_xy_null, find_zz_null, ZzNull};

const G101: BareLabel = BareLabel::new(1, 0, 1);

/// Result of the strong-pulse calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExchangeCalibration {
    pub v: f64,
    pub coupler_on_freq: f64,
    pub coupler_inset: f64,
    /// `1 - p(partner)` after the first strong pulse.
    pub residual: f64,
    /// |100~> -> |001~> population after the first strong pulse.
    pub swap_error: f64,
    pub evaluations: usize,
}

impl ExchangeCalibration {
    pub fn apply(&self, gp: &GateProtocolParams) -> GateProtocolParams {
        GateProtocolParams { v: self.v, coupler_on_freq: self.coupler_on_freq, coupler_inset: self.coupler_inset, ..gp.clone() }
    }
}

fn first_pulse(schedule: &Schedule) -> Result<Schedule> {
    let seg = schedule.segment("strong_plus").ok_or_else(|| Error::invalid("schedule", "no strong pulse"))?;
    Ok(schedule.window(seg.start, seg.end))
}

/// Population of the dressed exchange partner at the end of the first strong
/// pulse, starting from dressed |101>.
pub fn partner_population(sys: &SystemParams, gp: &GateProtocolParams) -> Result<f64> {
    let basis = DressedBasis::new(sys);
    partner_population_in(sys, gp, &basis)
}

fn partner_population_in(sys: &SystemParams, gp: &GateProtocolParams, basis: &DressedBasis) -> Result<f64> {
    Ok(first_pulse_transfers(sys, gp, basis)?.partner)
}

const COUPLER_LEAKAGE: [BareLabel; 3] = [BareLabel::new(0, 1, 0), BareLabel::new(1, 1, 0), BareLabel::new(0, 1, 1)];
const COUPLER_WEIGHT: f64 = 10.0;

/// Dressed-basis populations after the first strong pulse.
struct Transfers {
    partner: f64,
    swap: f64,
    coupler: f64,
}

fn first_pulse_transfers(sys: &SystemParams, gp: &GateProtocolParams, basis: &DressedBasis) -> Result<Transfers> {
    let s = first_pulse(&gate_schedule(sys, gp)?)?;
    let (g100, g001) = (BareLabel::new(1, 0, 0), BareLabel::new(0, 0, 1));
    let mut cols = CMatrix::zeros(DIM, 2);
    cols.set_column(0, &basis.vector(G101));
    cols.set_column(1, &basis.vector(g100));
    let out = Propagator::new(sys, &s).evolve_columns(&SplitMatrix::from_complex(&cols)).to_complex();
    let p = |to: BareLabel, col: usize| (basis.vector(to).adjoint() * out.column(col))[(0, 0)].norm_sqr();
    Ok(Transfers {
        partner: p(gp.exchange_partner(sys), 0),
        swap: p(g001, 1),
        coupler: COUPLER_LEAKAGE.iter().map(|&l| p(l, 0)).sum(),
    })
}

/// Strong-pulse amplitude maximizing the exchange after step one, with the
/// coupler dip held fixed: coarse grid over `[lo, hi]` then golden section.
pub fn calibrate_exchange_amplitude(sys: &SystemParams, gp: &GateProtocolParams, lo: f64, hi: f64, grid: usize) -> Result<ExchangeCalibration> {
    if !(lo < hi) || grid < 3 {
        return Err(Error::invalid("bracket", "need lo < hi and at least three grid points"));
    }
    let basis = DressedBasis::new(sys);
    let eval = |v: f64| -> Result<f64> { partner_population_in(sys, &GateProtocolParams { v, ..gp.clone() }, &basis) };
    let xs: Vec<f64> = (0..grid).map(|i| lo + (hi - lo) * i as f64 / (grid - 1) as f64).collect();
    let pops = xs.par_iter().map(|&v| eval(v)).collect::<Result<Vec<f64>>>()?;
    let best = (0..grid).max_by(|&i, &j| pops[i].total_cmp(&pops[j])).unwrap();
    if pops[best] < 0.5 {
        return Err(Error::NoExchangeFound { best: pops[best] });
    }
    let a = xs[best.saturating_sub(1)];
    let b = xs[(best + 1).min(grid - 1)];
    let mut count = grid;
    let (v, f) = golden_min(
        |v| {
            count += 1;
            1.0 - eval(v).unwrap_or(0.0)
        },
        a,
        b,
        1e-7,
    );
    let v = if f <= 1.0 - pops[best] { v } else { xs[best] };
    let g = GateProtocolParams { v, ..gp.clone() };
    let t = first_pulse_transfers(sys, &g, &basis)?;
    Ok(ExchangeCalibration {
        v,
        coupler_on_freq: gp.coupler_on_freq,
        coupler_inset: gp.coupler_inset,
        residual: 1.0 - t.partner,
        swap_error: t.swap,
        evaluations: count,
    })
}

/// Spectroscopic starting point for the strong pulse: the coupler depth whose
/// plateau coupling makes a quarter-cycle exchange over the envelope area,
/// and the excursion that puts |101> on resonance there. Couplings follow
/// the schedule's modulation setting.
pub fn exchange_guess(sys: &SystemParams, gp: &GateProtocolParams) -> Result<(f64, f64)> {
    let pulsed = gp.pulsed(sys);
    let partner = gp.exchange_partner(sys);
    let area: f64 = coupler_dip_envelope(gp).iter().sum::<f64>() * gp.sample_dt;
    let want = 0.25 / area;
    let at = |wc: f64, wq: f64| {
        let mut f = sys.frequencies();
        f[Element::Coupler.slot()] = wc;
        f[pulsed.slot()] = wq;
        if gp.modulate_couplings {
            modulated_params(sys, f)
        } else {
            sys.with_frequency(Element::Coupler, wc).with_frequency(pulsed, wq)
        }
    };
    let resonance = |wc: f64| -> Option<(f64, f64)> {
        let x0 = bare_resonance(sys, G101, partner, pulsed)?;
        let (x, g, edge) = grid_then_golden(|w| pair_splitting(&at(wc, w), G101, partner), x0 - 0.3, x0 + 0.3, 61, 1e-9);
        (!edge).then_some((x, g))
    };
    let gap = |wc: f64| resonance(wc).map_or(f64::NAN, |r| r.1 - want);
    let hi = sys.omega_c - 0.05;
    let mut lo = sys.omega_q1.max(sys.omega_q2) + 0.3;
    while lo < hi && gap(lo).is_nan() {
        lo += 0.1;
    }
    let wc = match brent_root(gap, lo, hi, 1e-6, 100) {
        Some(w) => w,
        None => {
            let best = resonance(lo).map_or(0.0, |r| r.1);
            return Err(Error::NoExchangeFound { best: (best / want).min(1.0) });
        }
    };
    let (x, _) = resonance(wc).ok_or(Error::NoResonance { a: G101, b: partner, lo, hi })?;
    Ok((sys.frequency(pulsed) - x, wc))
}

/// Joint Nelder-Mead search over the strong-pulse amplitude, coupler depth
/// and coupler inset, starting from [`exchange_guess`] and the inset in `gp`.
///
/// The cost is the population missing from the exchange partner plus the
/// population swapped between |100~> and |001~>. The latter comes from
/// non-adiabatic transitions on the coupler ramps and is suppressed by the
/// timing of the coupler dip relative to the qubit excursion. The inset is
/// rounded to the sample grid.
pub fn calibrate_exchange(sys: &SystemParams, gp: &GateProtocolParams) -> Result<ExchangeCalibration> {
    let (v0, wc0) = exchange_guess(sys, gp)?;
    let basis = DressedBasis::new(sys);
    let dt = gp.sample_dt;
    let max_inset = ((0.5 * gp.t_p - 2.0 * dt) / dt).floor() * dt;
    let inset = |x: f64| ((x / dt).round() * dt).clamp(0.0, max_inset);
    let params = |x: &[f64]| GateProtocolParams { v: x[0], coupler_on_freq: x[1], coupler_inset: inset(x[2]), ..gp.clone() };
    let cost = |x: &[f64]| -> f64 {
        match first_pulse_transfers(sys, &params(x), &basis) {
            Ok(t) => 1.0 - t.partner + t.swap + COUPLER_WEIGHT * t.coupler,
            Err(_) => 2.0,
        }
    };
    let s = nelder_mead(cost, &[v0, wc0, gp.coupler_inset], &[0.005, 0.05, 0.2], 1e-9, 200);
    let g = params(&s.x);
    let t = first_pulse_transfers(sys, &g, &basis)?;
    if t.partner < 0.5 {
        return Err(Error::NoExchangeFound { best: t.partner });
    }
    Ok(ExchangeCalibration {
        v: g.v,
        coupler_on_freq: g.coupler_on_freq,
        coupler_inset: g.coupler_inset,
        residual: 1.0 - t.partner,
        swap_error: t.swap,
        evaluations: s.evaluations,
    })
}

/// Gate propagator with the weak-pulse segment recomputed per amplitude.
pub struct PhaseScanner<'a> {
    sys: &'a SystemParams,
    gp: GateProtocolParams,
    basis: DressedBasis,
    pre: SplitMatrix,
    post: SplitMatrix,
    range: (usize, usize),
}

impl<'a> PhaseScanner<'a> {
    pub fn new(sys: &'a SystemParams, gp: &GateProtocolParams) -> Result<Self> {
        let s = gate_schedule(sys, gp)?;
        let w = s.segment("weak").ok_or_else(|| Error::invalid("t_weak", "the schedule has no weak pulse"))?;
        let range = (w.start, w.end);
        let pre = Propagator::new(sys, &s.window(0, range.0)).unitary();
        let post = Propagator::new(sys, &s.window(range.1, s.intervals())).unitary();
        Ok(PhaseScanner { sys, gp: gp.clone(), basis: DressedBasis::new(sys), pre, post, range })
    }

    pub fn unitary(&self, a_int: f64) -> Result<CMatrix> {
        let s = gate_schedule(self.sys, &GateProtocolParams { a_int, ..self.gp.clone() })?;
        let weak = Propagator::new(self.sys, &s.window(self.range.0, self.range.1)).unitary();
        Ok(self.post.mul(&weak.mul(&self.pre)).to_complex())
    }

    /// Wrapped conditional phase at `a_int`.
    pub fn phi_2q(&self, a_int: f64) -> Result<f64> {
        Ok(extract_phases(&computational_block(&self.unitary(a_int)?, &self.basis))?.phi_2q)
    }

    /// `(a_int, unwrapped phi_2q)` along `amplitudes`, which must be ordered.
    pub fn sweep(&self, amplitudes: &[f64]) -> Result<Vec<(f64, f64)>> {
        let raw = amplitudes.par_iter().map(|&a| self.phi_2q(a)).collect::<Result<Vec<f64>>>()?;
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (&a, &p) in amplitudes.iter().zip(&raw) {
            let v = match out.last() {
                Some(&(_, prev)) => prev + wrap_phase(p - prev),
                None => p,
            };
            out.push((a, v));
        }
        Ok(out)
    }
}

/// Weak-pulse amplitude that gives a full turn of conditional phase, with
/// ten percent margin, estimated from the pulse area and the sweet-spot
/// response (`phi_2q` shifts by `2 pi a` times the absolute lobe area).
pub fn phase_amplitude_span(gp: &GateProtocolParams) -> f64 {
    let lobe: f64 = flattop_envelope(gp.t_weak() / 2.0, gp.sigma(), gp.sample_dt).iter().sum::<f64>() * gp.sample_dt;
    1.1 / (2.0 * lobe)
}

/// Result of the conditional-phase calibration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseCalibration {
    pub a_int: f64,
    pub target: f64,
    /// Wrapped conditional phase reached.
    pub phi_2q: f64,
    pub duration: f64,
    /// The sweep used to bracket the target: `(a_int, unwrapped phi_2q)`.
    pub sweep: Vec<(f64, f64)>,
}

/// Weak-pulse amplitude in `[0, a_max]` giving conditional phase `target`
/// (mod 2 pi). The sweep must be monotone on `[0, a_max]`; the first crossing
/// is refined with Brent's method on the wrapped phase difference.
pub fn calibrate_phase_amplitude(sys: &SystemParams, gp: &GateProtocolParams, target: f64, a_max: f64, points: usize) -> Result<PhaseCalibration> {
    let scanner = PhaseScanner::new(sys, gp)?;
    let amps: Vec<f64> = (0..points.max(3)).map(|i| a_max * i as f64 / (points.max(3) - 1) as f64).collect();
    let sweep = scanner.sweep(&amps)?;
    let (phi0, phi_end) = (sweep[0].1, sweep[sweep.len() - 1].1);
    let dir = (phi_end - phi0).signum();
    let (lo_phi, hi_phi) = if dir >= 0.0 { (phi0, phi_end) } else { (phi_end, phi0) };
    // Smallest excursion from phi(0), along the sweep's direction, that lands on the target.
    let offset = (dir * (target - phi0)).rem_euclid(2.0 * PI);
    let want = phi0 + dir * offset;
    if !(want >= lo_phi - 1e-12 && want <= hi_phi + 1e-12) {
        return Err(Error::TargetOutOfRange { target, lo: lo_phi, hi: hi_phi });
    }
    let k = sweep.windows(2).position(|w| (w[0].1 - want) * (w[1].1 - want) <= 0.0).ok_or(Error::TargetOutOfRange {
        target,
        lo: lo_phi,
        hi: hi_phi,
    })?;
    let (a0, a1) = (sweep[k].0, sweep[k + 1].0);
    let a_int = if offset == 0.0 && k == 0 {
        0.0
    } else {
        let f = |a: f64| scanner.phi_2q(a).map(|p| wrap_phase(p - target)).unwrap_or(f64::NAN);
        brent_root(f, a0, a1, 1e-10, 100).ok_or(Error::TargetOutOfRange { target, lo: lo_phi, hi: hi_phi })?
    };
    let phi_2q = scanner.phi_2q(a_int)?;
    Ok(PhaseCalibration { a_int, target, phi_2q, duration: gp.total_duration(), sweep })
}

/// Calibrated strong pulses plus the weak amplitude for one conditional phase.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateCalibration {
    pub exchange: ExchangeCalibration,
    pub phase: PhaseCalibration,
    /// The input protocol with all calibrated values filled in.
    pub params: GateProtocolParams,
}

/// [`calibrate_exchange`] followed by [`calibrate_phase_amplitude`] over one
/// full turn of conditional phase.
pub fn calibrate_gate(sys: &SystemParams, gp: &GateProtocolParams, target: f64) -> Result<GateCalibration> {
    let exchange = calibrate_exchange(sys, gp)?;
    let g = exchange.apply(gp);
    let phase = calibrate_phase_amplitude(sys, &g, target, phase_amplitude_span(&g), 12)?;
    let params = GateProtocolParams { a_int: phase.a_int, ..g };
    Ok(GateCalibration { exchange, phase, params })
}

/// One gate duration of a leakage sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeakagePoint {
    pub t_p: f64,
    pub v: f64,
    pub coupler_on_freq: f64,
    pub coupler_inset: f64,
    /// Population of |010~> after the gate, starting in |100~>.
    pub p_010: f64,
    /// Population of |110~> plus |011~> after the gate, starting in |101~>.
    pub p_110_011: f64,
    /// Population left in the exchange partner after the gate, starting in |101~>.
    pub p_partner: f64,
}

/// Calibrates a gate at each strong-pulse duration and records coupler leakage.
pub fn leakage_sweep(sys: &SystemParams, gp: &GateProtocolParams, durations: &[f64]) -> Result<Vec<LeakagePoint>> {
    durations
        .par_iter()
        .map(|&t_p| {
            let scale = |s: f64| s * t_p / gp.t_p;
            let g = GateProtocolParams { t_p, sigma: gp.sigma.map(scale), coupler_sigma: gp.coupler_sigma.map(scale), coupler_inset: (scale(gp.coupler_inset) / gp.sample_dt).round() * gp.sample_dt, ..gp.clone() };
            let cal = calibrate_exchange(sys, &g)?;
            let g = cal.apply(&g);
            let sim = GateSimulation::run(sys, &g)?;
            let pop = |from: BareLabel, to: &[BareLabel]| -> f64 {
                let out = &sim.unitary * sim.basis.vector(from);
                to.iter().map(|&l| (sim.basis.vector(l).adjoint() * &out)[(0, 0)].norm_sqr()).sum()
            };
            Ok(LeakagePoint {
                t_p,
                v: cal.v,
                coupler_on_freq: cal.coupler_on_freq,
                coupler_inset: cal.coupler_inset,
                p_010: pop(BareLabel::new(1, 0, 0), &[BareLabel::new(0, 1, 0)]),
                p_110_011: pop(G101, &[BareLabel::new(1, 1, 0), BareLabel::new(0, 1, 1)]),
                p_partner: pop(G101, &[g.exchange_partner(sys)]),
            })
        })
        .collect()
}
