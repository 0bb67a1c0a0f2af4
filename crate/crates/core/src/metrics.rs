//! Phases, leakage and fidelities of simulated gates, plus the spectroscopic
//! style measurements (Ramsey ZZ angle, swap-rate scans).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{lindblad_final, DensityMatrix, NoiseModel, Propagator};
use crate::error::{Error, Result};
use crate::fit::fit_sinusoid;
use crate::hilbert::{anticrossing_gap, DressedBasis, Spectrum};
use crate::linalg::{uhlmann_fidelity, CMatrix, CVector, SplitMatrix};
use crate::optimize::nelder_mead;
use crate::params::{BareLabel, Element, SystemParams, COMPUTATIONAL, DIM};
use crate::pulse::{gate_schedule, GateProtocolParams, Schedule};

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Diagonal phases of a CPhase-like gate, referenced to |000>.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseSet {
    pub phi_000: f64,
    pub phi_001: f64,
    pub phi_100: f64,
    pub phi_101: f64,
    /// `phi_101 - phi_001 - phi_100 + phi_000`, wrapped.
    pub phi_2q: f64,
}

/// Reads the phases off a 4x4 gate in the order |000>, |001>, |100>, |101>.
pub fn extract_phases(u: &CMatrix) -> Result<PhaseSet> {
    if u.nrows() != 4 || u.ncols() != 4 {
        return Err(Error::invalid("u", "expected a 4x4 computational block"));
    }
    for i in 0..4 {
        let m = u[(i, i)].norm();
        if m <= 0.99 {
            return Err(Error::NotCPhaseLike { index: i, magnitude: m });
        }
    }
    let arg = |i: usize| u[(i, i)].arg();
    let reference = arg(0);
    let rel = |i: usize| wrap_phase(arg(i) - reference);
    let (p001, p100, p101) = (rel(1), rel(2), rel(3));
    Ok(PhaseSet { phi_000: 0.0, phi_001: p001, phi_100: p100, phi_101: p101, phi_2q: wrap_phase(p101 - p001 - p100) })
}

/// `<i~|U|j~>` over the four dressed computational states.
pub fn computational_block(u: &CMatrix, basis: &DressedBasis) -> CMatrix {
    let vs: Vec<CVector> = COMPUTATIONAL.iter().map(|&l| basis.vector(l)).collect();
    CMatrix::from_fn(4, 4, |i, j| (vs[i].adjoint() * u * &vs[j])[(0, 0)])
}

/// `diag(1, e^{i a}, e^{i b}, e^{i(a + b + phi)})`.
pub fn cphase_diagonal(alpha: f64, beta: f64, phi: f64) -> [Complex64; 4] {
    [0.0, alpha, beta, alpha + beta + phi].map(|x| Complex64::from_polar(1.0, x))
}

/// Amplitudes of the 16 preparations {0, 1, +, -} (x) {0, 1, +, -} on the
/// computational basis |q1 q2>. The first factor belongs to Q1.
pub fn preparation_amplitudes() -> Vec<[Complex64; 4]> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let single = [[1.0, 0.0], [0.0, 1.0], [s, s], [s, -s]];
    let mut out = Vec::with_capacity(16);
    for a in &single {
        for b in &single {
            out.push([a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]].map(|x| Complex64::new(x, 0.0)));
        }
    }
    out
}

fn embed(amps: &[Complex64; 4], basis: &DressedBasis) -> CVector {
    let mut v = CVector::zeros(DIM);
    for (a, &l) in amps.iter().zip(COMPUTATIONAL.iter()) {
        v += basis.vector(l) * *a;
    }
    v
}

/// The 16 preparations as dressed states.
pub fn preparation_states(basis: &DressedBasis) -> Vec<CVector> {
    preparation_amplitudes().iter().map(|a| embed(a, basis)).collect()
}

/// Average of the Uhlmann fidelities between paired states.
pub fn average_state_fidelity(noisy: &[DensityMatrix], ideal: &[DensityMatrix]) -> Result<f64> {
    if noisy.len() != ideal.len() || noisy.is_empty() {
        return Err(Error::invalid("states", "noisy and ideal lists must be non-empty and of equal length"));
    }
    let total: f64 = noisy.iter().zip(ideal).map(|(a, b)| uhlmann_fidelity(&a.0, &b.0)).sum();
    Ok(total / noisy.len() as f64)
}

/// Fidelity of final states against an ideal CPhase(`phi`), after choosing
/// the single-qubit Z phases that maximize it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompensatedFidelity {
    pub fidelity: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// `finals[k]` is the output for preparation `k`. Each is reduced to the
/// dressed computational block; the ideal outputs are pure.
pub fn compensated_fidelity(finals: &[CMatrix], basis: &DressedBasis, phi: f64, start: (f64, f64)) -> CompensatedFidelity {
    let vs: Vec<CVector> = COMPUTATIONAL.iter().map(|&l| basis.vector(l)).collect();
    let blocks: Vec<CMatrix> = finals.iter().map(|r| CMatrix::from_fn(4, 4, |i, j| (vs[i].adjoint() * r * &vs[j])[(0, 0)])).collect();
    let preps = preparation_amplitudes();
    let f = |x: &[f64]| -> f64 {
        let d = cphase_diagonal(x[0], x[1], phi);
        let mut total = 0.0;
        for (c, r) in preps.iter().zip(&blocks) {
            let psi = CVector::from_iterator(4, (0..4).map(|i| d[i] * c[i]));
            total += (psi.adjoint() * r * &psi)[(0, 0)].re;
        }
        total / preps.len() as f64
    };
    let s = nelder_mead(|x| -f(x), &[start.0, start.1], &[0.05, 0.05], 1e-15, 400);
    let s2 = nelder_mead(|x| -f(x), &s.x, &[0.002, 0.002], 1e-16, 200);
    let best = if s2.f <= s.f { s2 } else { s };
    CompensatedFidelity { fidelity: -best.f, alpha: wrap_phase(best.x[0]), beta: wrap_phase(best.x[1]) }
}

/// Noiseless propagation of a calibrated gate schedule.
#[derive(Debug, Clone)]
pub struct GateSimulation {
    pub schedule: Schedule,
    pub basis: DressedBasis,
    pub unitary: CMatrix,
}

impl GateSimulation {
    pub fn run(sys: &SystemParams, gp: &GateProtocolParams) -> Result<Self> {
        let schedule = gate_schedule(sys, gp)?;
        let unitary = Propagator::new(sys, &schedule).unitary().to_complex();
        Ok(GateSimulation { schedule, basis: DressedBasis::new(sys), unitary })
    }

    pub fn block(&self) -> CMatrix {
        computational_block(&self.unitary, &self.basis)
    }

    pub fn phases(&self) -> Result<PhaseSet> {
        extract_phases(&self.block())
    }

    /// Populations of every dressed label after starting in dressed `from`.
    pub fn populations(&self, from: BareLabel) -> Vec<(BareLabel, f64)> {
        let out = &self.unitary * self.basis.vector(from);
        BareLabel::all()
            .map(|l| (l, (self.basis.vector(l).adjoint() * &out)[(0, 0)].norm_sqr()))
            .collect()
    }

    /// Fidelity of the noiseless gate against CPhase(`phi`).
    pub fn fidelity(&self, phi: f64) -> Result<CompensatedFidelity> {
        let ph = self.phases()?;
        let finals: Vec<CMatrix> = preparation_states(&self.basis)
            .iter()
            .map(|psi| {
                let out = &self.unitary * psi;
                &out * out.adjoint()
            })
            .collect();
        Ok(compensated_fidelity(&finals, &self.basis, phi, (ph.phi_001, ph.phi_100)))
    }
}

/// Summary of a noiseless gate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateReport {
    pub phases: PhaseSet,
    /// Computational populations after starting in |101~>, order |000>, |001>, |100>, |101>.
    pub computational: [f64; 4],
    /// Every other dressed label's population after starting in |101~>.
    pub leakage: Vec<(BareLabel, f64)>,
    /// Average state fidelity against CPhase(phi_2q).
    pub fidelity: f64,
    pub duration: f64,
}

impl GateReport {
    pub fn total(&self) -> f64 {
        self.computational.iter().sum::<f64>() + self.leakage.iter().map(|x| x.1).sum::<f64>()
    }

    pub fn leakage_of(&self, label: BareLabel) -> f64 {
        self.leakage.iter().find(|x| x.0 == label).map_or(0.0, |x| x.1)
    }
}

pub fn gate_report(sys: &SystemParams, gp: &GateProtocolParams) -> Result<GateReport> {
    let sim = GateSimulation::run(sys, gp)?;
    let phases = sim.phases()?;
    let pops = sim.populations(BareLabel::new(1, 0, 1));
    let mut computational = [0.0; 4];
    let mut leakage = Vec::new();
    for (l, p) in pops {
        match COMPUTATIONAL.iter().position(|&c| c == l) {
            Some(i) => computational[i] = p,
            None => leakage.push((l, p)),
        }
    }
    let fidelity = sim.fidelity(phases.phi_2q)?.fidelity;
    Ok(GateReport { phases, computational, leakage, fidelity, duration: sim.schedule.duration() })
}

/// Error of a gate under decoherence, averaged over the 16 preparations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GateError {
    /// `1 - F` with the noise model applied.
    pub error: f64,
    /// `1 - F` of the same gate without noise.
    pub coherent_error: f64,
    /// `error - coherent_error`.
    pub decoherence_error: f64,
    /// Conditional phase of the noiseless gate; the ideal target.
    pub phi_2q: f64,
    pub duration: f64,
}

/// Runs the 16 preparations through the Lindblad dynamics and compares
/// them with CPhase(phi_2q) of the noiseless gate.
pub fn gate_error(sys: &SystemParams, gp: &GateProtocolParams, noise: &NoiseModel) -> Result<GateError> {
    noise.validate()?;
    let sim = GateSimulation::run(sys, gp)?;
    let ph = sim.phases()?;
    let coherent = sim.fidelity(ph.phi_2q)?;
    let rho0: Vec<SplitMatrix> = preparation_states(&sim.basis)
        .iter()
        .map(|psi| SplitMatrix::from_complex(&(psi * psi.adjoint())))
        .collect();
    let finals: Vec<CMatrix> = lindblad_final(sys, &sim.schedule, &rho0, noise)?.iter().map(|r| r.to_complex()).collect();
    let noisy = compensated_fidelity(&finals, &sim.basis, ph.phi_2q, (coherent.alpha, coherent.beta));
    Ok(GateError {
        error: 1.0 - noisy.fidelity,
        coherent_error: 1.0 - coherent.fidelity,
        decoherence_error: coherent.fidelity - noisy.fidelity,
        phi_2q: ph.phi_2q,
        duration: sim.schedule.duration(),
    })
}

/// Phase of the Q1 superposition after idling `t` ns with Q2 in |0> or |1>.
///
/// Q1 starts in (|0~> + |1~>)/sqrt2 with Q2 fixed; evolution is exact under
/// the static Hamiltonian.
pub fn ramsey_phase(sys: &SystemParams, t: f64, control_excited: bool) -> Result<f64> {
    sys.validate()?;
    let basis = DressedBasis::new(sys);
    let n2 = control_excited as u8;
    let lo = BareLabel::new(0, 0, n2);
    let hi = BareLabel::new(1, 0, n2);
    let psi0 = (basis.vector(lo) + basis.vector(hi)) * Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let psi = static_evolve(&basis.spectrum, &psi0, t);
    let a = (basis.vector(lo).adjoint() * &psi)[(0, 0)];
    let b = (basis.vector(hi).adjoint() * &psi)[(0, 0)];
    Ok((b * a.conj()).arg())
}

/// Conditional Ramsey angle `phase(Q2 = 0) - phase(Q2 = 1)` after `t` ns, wrapped.
///
/// Grows as `2 pi zeta t`.
pub fn ramsey_zz_angle(sys: &SystemParams, t: f64) -> Result<f64> {
    Ok(wrap_phase(ramsey_phase(sys, t, false)? - ramsey_phase(sys, t, true)?))
}

/// Unwrapped conditional angle at increasing times.
pub fn ramsey_zz_curve(sys: &SystemParams, times: &[f64]) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = Vec::with_capacity(times.len());
    for &t in times {
        let w = ramsey_zz_angle(sys, t)?;
        let v = match out.last() {
            Some(&prev) => prev + wrap_phase(w - prev),
            None => w,
        };
        out.push(v);
    }
    Ok(out)
}

fn static_evolve(spectrum: &Spectrum, psi: &CVector, t: f64) -> CVector {
    let coeffs = spectrum.vectors.adjoint() * psi;
    let phased = CVector::from_iterator(
        coeffs.len(),
        coeffs.iter().zip(&spectrum.energies).map(|(c, &e)| c * Complex64::from_polar(1.0, -2.0 * PI * e * t)),
    );
    &spectrum.vectors * phased
}

/// Which exchange a swap-rate scan drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwapVariant {
    /// |101> <-> doubly excited level of the other qubit.
    Cz,
    /// |100> <-> |001>.
    Iswap,
}

impl SwapVariant {
    /// Prepared state and its exchange partner when `tuned` is moved.
    pub fn states(self, tuned: Element) -> (BareLabel, BareLabel) {
        match (self, tuned) {
            (SwapVariant::Cz, Element::Q2) => (BareLabel::new(1, 0, 1), BareLabel::new(2, 0, 0)),
            (SwapVariant::Cz, _) => (BareLabel::new(1, 0, 1), BareLabel::new(0, 0, 2)),
            (SwapVariant::Iswap, _) => (BareLabel::new(1, 0, 0), BareLabel::new(0, 0, 1)),
        }
    }
}

/// Time window of the simulated oscillation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwapWindow {
    pub duration: f64,
    pub samples: usize,
}

impl Default for SwapWindow {
    fn default() -> Self {
        SwapWindow { duration: 200.0, samples: 2001 }
    }
}

/// One coupler frequency of a swap-rate scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwapPoint {
    pub omega_c: f64,
    /// Frequency of the tuned qubit at the anticrossing (GHz).
    pub resonance: f64,
    /// Half the fitted oscillation frequency (GHz).
    pub gtilde_fit: f64,
    /// Half the minimum spectral splitting (GHz).
    pub gtilde_gap: f64,
    pub contrast: f64,
}

/// Effective exchange rate at coupler frequency `omega_c` from a fitted
/// population oscillation.
///
/// The bare state is prepared with the tuned qubit already on the
/// anticrossing, and its population is recorded over the window.
pub fn swap_rate(sys: &SystemParams, omega_c: f64, variant: SwapVariant, tuned: Element, window: SwapWindow) -> Result<SwapPoint> {
    let (a, b) = variant.states(tuned);
    let p = sys.with_frequency(Element::Coupler, omega_c);
    let ac = anticrossing_gap(&p, a, b, tuned, None)?;
    let at = p.with_frequency(tuned, ac.resonance);
    let spectrum = Spectrum::of_params(&at);
    let mut psi0 = CVector::zeros(DIM);
    psi0[a.index()] = Complex64::new(1.0, 0.0);
    let n = window.samples.max(5);
    let ts: Vec<f64> = (0..n).map(|k| window.duration * k as f64 / (n - 1) as f64).collect();
    let pops: Vec<f64> = ts.iter().map(|&t| static_evolve(&spectrum, &psi0, t)[a.index()].norm_sqr()).collect();
    let f_max = 0.5 * (n - 1) as f64 / window.duration;
    let fit = fit_sinusoid(&ts, &pops, f_max.min(0.5), 0.1)?;
    Ok(SwapPoint { omega_c, resonance: ac.resonance, gtilde_fit: 0.5 * fit.frequency, gtilde_gap: ac.gtilde, contrast: fit.contrast })
}

/// [`swap_rate`] at each coupler frequency, in parallel.
pub fn swap_rate_scan(
    sys: &SystemParams,
    omega_c: &[f64],
    variant: SwapVariant,
    tuned: Element,
    window: SwapWindow,
) -> Vec<Result<SwapPoint>> {
    omega_c.par_iter().map(|&w| swap_rate(sys, w, variant, tuned, window)).collect()
}

/// Matrix of `|<l~|U|m~>|^2` over all dressed labels (rows: final, columns: initial).
pub fn transition_matrix(u: &CMatrix, basis: &DressedBasis) -> DMatrix<f64> {
    let d = basis.matrix();
    let m = d.adjoint() * u * d;
    m.map(|z| z.norm_sqr())
}
