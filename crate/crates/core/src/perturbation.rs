//! Closed-form dispersive expressions for the exchange and ZZ couplings.
//!
//! These are rotating-wave results. They track the exact spectrum of the
//! `CouplingForm::Rwa` Hamiltonian; the counter-rotating terms kept by
//! default in [`crate::hilbert`] shift the couplings appreciably at the
//! large coupler detunings used here.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::optimize::all_roots;
use crate::params::{Element, SystemParams};

/// Detunings entering the closed forms (GHz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Detunings {
    pub delta_1: f64,
    pub delta_2: f64,
    pub delta_12: f64,
    /// Inverse-mean detuning, `2/delta = 1/delta_1 + 1/delta_2`.
    pub delta: f64,
}

fn nonzero(x: f64, what: &str) -> Result<f64> {
    if x == 0.0 || !x.is_finite() {
        Err(Error::DivergentDetuning { what: what.to_string() })
    } else {
        Ok(x)
    }
}

pub fn detunings(p: &SystemParams) -> Result<Detunings> {
    let delta_1 = nonzero(p.omega_q1 - p.omega_c, "delta_1")?;
    let delta_2 = nonzero(p.omega_q2 - p.omega_c, "delta_2")?;
    let inv = 0.5 * (1.0 / delta_1 + 1.0 / delta_2);
    let delta = nonzero(1.0 / nonzero(inv, "1/delta_1 + 1/delta_2")?, "delta")?;
    Ok(Detunings { delta_1, delta_2, delta_12: p.omega_q1 - p.omega_q2, delta })
}

fn warn_dispersive(p: &SystemParams, d: &Detunings) {
    let r = (p.g_1c / d.delta_1).abs().max((p.g_2c / d.delta_2).abs());
    if r > 0.3 {
        log::warn!("outside dispersive regime: |g/delta| = {r:.3}");
    }
}

/// Effective qubit-qubit exchange `J = g_12 + g_1c g_2c / delta` (GHz).
pub fn effective_j(p: &SystemParams) -> Result<f64> {
    let d = detunings(p)?;
    warn_dispersive(p, &d);
    Ok(p.g_12 + p.g_1c * p.g_2c / d.delta)
}

/// Coupler frequencies in `[lo, hi]` where [`effective_j`] changes sign.
pub fn effective_j_nulls(p: &SystemParams, lo: f64, hi: f64) -> Vec<f64> {
    let j = |w: f64| effective_j(&p.with_frequency(Element::Coupler, w)).unwrap_or(f64::NAN);
    let n = ((hi - lo) / 0.01).ceil().max(8.0) as usize + 1;
    all_roots(j, lo, hi, n, 1e-10)
}

/// Fourth-order ZZ decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZetaBreakdown {
    pub zeta_020: f64,
    pub zeta_200: f64,
    pub zeta_002: f64,
    pub zeta_1: f64,
    pub total: f64,
    pub j_020: f64,
    pub j_200: f64,
    pub j_002: f64,
    /// `sqrt(2) J` shortcut for `j_200` and `j_002`.
    pub j_sqrt2: f64,
    /// `2 sqrt(2) g_1c g_2c / delta` shortcut for `j_020`.
    pub j_020_short: f64,
    pub detunings: Detunings,
}

/// Fourth-order perturbative ZZ rate and its contributions (GHz).
pub fn zeta_perturbative(p: &SystemParams) -> Result<ZetaBreakdown> {
    let d = detunings(p)?;
    warn_dispersive(p, &d);
    if d.delta_12.abs() > p.eta_q1.abs().max(p.eta_q2.abs()) {
        log::warn!("qubits outside the straddling regime: |delta_12| = {:.3}", d.delta_12.abs());
    }
    let gg = p.g_1c * p.g_2c;
    let s2 = std::f64::consts::SQRT_2;
    let j_020 = s2 * gg * (1.0 / d.delta_1 + 1.0 / d.delta_2);
    let j_200 = s2 * (p.g_12 + gg / d.delta_1);
    let j_002 = s2 * (p.g_12 + gg / d.delta_2);
    let den_020 = nonzero(d.delta_1 + d.delta_2 - p.eta_c, "delta_1 + delta_2 - eta_c")?;
    let den_200 = nonzero(d.delta_12 - p.eta_q2, "delta_12 - eta_2")?;
    let den_002 = nonzero(d.delta_12 + p.eta_q1, "delta_12 + eta_1")?;
    let den_1 = nonzero(d.delta_1 * d.delta_2, "delta_1 delta_2")?;
    let zeta_020 = j_020 * j_020 / den_020;
    let zeta_200 = j_200 * j_200 / den_200;
    let zeta_002 = -j_002 * j_002 / den_002;
    let zeta_1 = 4.0 * p.g_12 * gg / den_1;
    let j = p.g_12 + gg / d.delta;
    Ok(ZetaBreakdown {
        zeta_020,
        zeta_200,
        zeta_002,
        zeta_1,
        total: zeta_020 + zeta_200 + zeta_002 + zeta_1,
        j_020,
        j_200,
        j_002,
        j_sqrt2: s2 * j,
        j_020_short: 2.0 * s2 * gg / d.delta,
        detunings: d,
    })
}

/// Two-state leakage overlap and the approximate CZ coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlapReport {
    pub theta: f64,
    pub overlap_1photon: f64,
    pub overlap_2photon: f64,
    /// `g_1c^2 / |delta|` (GHz).
    pub gtilde_approx: f64,
}

/// Mixing angle of |100> with |010> (and |101> with |011>) in the two-state model.
pub fn leakage_overlap_closed_form(p: &SystemParams) -> OverlapReport {
    let delta_1 = p.omega_q1 - p.omega_c;
    let theta = (2.0 * p.g_1c).atan2(delta_1.abs()).copysign(p.g_1c * delta_1.signum());
    let overlap = (theta.abs() / 2.0).sin().powi(2);
    let inv = 0.5 * (1.0 / (p.omega_q1 - p.omega_c) + 1.0 / (p.omega_q2 - p.omega_c));
    OverlapReport {
        theta,
        overlap_1photon: overlap,
        overlap_2photon: overlap,
        gtilde_approx: p.g_1c * p.g_1c * inv.abs(),
    }
}
