//! Time-dependent Schrodinger and Lindblad propagation.
//!
//! Each step of length `h` uses the two-exponential commutator-free Magnus
//! scheme of order four. Hamiltonian values at the Gauss nodes come from
//! cubic interpolation of the sampled schedule. Both exponentials are real
//! symmetric, and the coupling operators conserve excitation parity, so each
//! one is formed exactly from two small eigen-decompositions. The unitary
//! part is therefore unitary to rounding. Dissipation enters through a
//! symmetric (Strang) splitting around each unitary step.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{lowering, HamiltonianTerms};
use crate::linalg::{expm_i_symmetric, CMatrix, CVector, SplitMatrix};
use crate::params::{BareLabel, Element, SystemParams, DIM};
use crate::pulse::Schedule;

use std::f64::consts::PI;

/// A normalized state vector on the three-qutrit space.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket(pub CVector);

impl Ket {
    pub fn basis(label: BareLabel) -> Self {
        let mut v = CVector::zeros(DIM);
        v[label.index()] = Complex64::new(1.0, 0.0);
        Ket(v)
    }

    pub fn new(v: CVector) -> Result<Self> {
        let k = Ket(v);
        k.check()?;
        Ok(k)
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn check(&self) -> Result<()> {
        let deviation = (self.norm() - 1.0).abs();
        if deviation > 1e-9 {
            return Err(Error::NotNormalized { deviation });
        }
        Ok(())
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix(&self.0 * self.0.adjoint())
    }

    /// `|<other|self>|^2`.
    pub fn fidelity(&self, other: &Ket) -> f64 {
        other.0.dotc(&self.0).norm_sqr()
    }
}

/// A density matrix on the three-qutrit space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(pub CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let d = DensityMatrix(m);
        d.check(1e-9)?;
        Ok(d)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }

    pub fn population(&self, i: usize) -> f64 {
        self.0[(i, i)].re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let (vals, _) = crate::linalg::hermitian_eigen(&self.hermitian_part());
        vals[0]
    }

    fn hermitian_part(&self) -> CMatrix {
        (&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0)
    }

    /// Checks Hermiticity and unit trace to `tol` and eigenvalues above `-tol`.
    pub fn check(&self, tol: f64) -> Result<()> {
        let herm = crate::linalg::hermiticity_error(&self.0);
        if herm > tol {
            return Err(Error::NotPhysical { reason: format!("not Hermitian ({herm:e})") });
        }
        let tr = self.0.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::NotPhysical { reason: format!("trace {tr}") });
        }
        let min = self.min_eigenvalue();
        if min < -tol {
            return Err(Error::NotPhysical { reason: format!("negative eigenvalue {min:e}") });
        }
        Ok(())
    }
}

/// Coherence times of one element (ns). `None` means infinite.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementNoise {
    #[serde(default)]
    pub t1: Option<f64>,
    /// Echo coherence time; pure dephasing follows from `1/T_phi = 1/T2E - 1/(2 T1)`.
    #[serde(default)]
    pub t2e: Option<f64>,
    /// Pure dephasing time given directly (takes precedence over `t2e`).
    #[serde(default)]
    pub tphi: Option<f64>,
}

impl ElementNoise {
    pub fn echo(t1: f64, t2e: f64) -> Self {
        ElementNoise { t1: Some(t1), t2e: Some(t2e), tphi: None }
    }

    /// Pure dephasing time (ns), `None` if infinite.
    pub fn tphi(&self) -> Result<Option<f64>> {
        for (name, t) in [("t1", self.t1), ("t2e", self.t2e), ("tphi", self.tphi)] {
            if let Some(t) = t {
                if !(t > 0.0) {
                    return Err(Error::invalid(name, format!("{t} must be positive")));
                }
            }
        }
        if let Some(tp) = self.tphi {
            return Ok(Some(tp));
        }
        let Some(t2) = self.t2e else { return Ok(None) };
        let inv_t1 = self.t1.map_or(0.0, |t| 1.0 / t);
        if let Some(t1) = self.t1 {
            if t2 > 2.0 * t1 {
                return Err(Error::invalid("t2e", format!("T2E = {t2} exceeds 2 T1 = {}", 2.0 * t1)));
            }
        }
        let rate = 1.0 / t2 - 0.5 * inv_t1;
        Ok(if rate > 0.0 { Some(1.0 / rate) } else { None })
    }

    /// `(1/T1, 2/T_phi)` in 1/ns.
    pub fn rates(&self) -> Result<(f64, f64)> {
        let g1 = self.t1.map_or(0.0, |t| 1.0 / t);
        let gphi = self.tphi()?.map_or(0.0, |t| 2.0 / t);
        Ok((g1, gphi))
    }
}

/// Per-element coherence times plus an on/off mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    #[serde(default)]
    pub q1: ElementNoise,
    #[serde(default)]
    pub coupler: ElementNoise,
    #[serde(default)]
    pub q2: ElementNoise,
    /// Enabled flags for q1, coupler, q2.
    #[serde(default = "all_enabled")]
    pub enabled: [bool; 3],
}

fn all_enabled() -> [bool; 3] {
    [true; 3]
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel {
            q1: ElementNoise::default(),
            coupler: ElementNoise::default(),
            q2: ElementNoise::default(),
            enabled: [false; 3],
        }
    }

    /// Coherence at the gate operating point; coupler at T1 = T_phi = 1 us.
    pub fn gate_point() -> Self {
        NoiseModel {
            q1: ElementNoise::echo(110_700.0, 48_500.0),
            coupler: ElementNoise { t1: Some(1000.0), t2e: None, tphi: Some(1000.0) },
            q2: ElementNoise::echo(111_300.0, 110_800.0),
            enabled: [true; 3],
        }
    }

    /// Coherence at the idle point.
    pub fn idle_point() -> Self {
        NoiseModel {
            q1: ElementNoise::echo(55_500.0, 100_900.0),
            q2: ElementNoise::echo(111_300.0, 110_800.0),
            ..Self::gate_point()
        }
    }

    pub fn element(&self, e: Element) -> &ElementNoise {
        match e {
            Element::Q1 => &self.q1,
            Element::Coupler => &self.coupler,
            Element::Q2 => &self.q2,
        }
    }

    /// Same times with only `elements` enabled.
    pub fn only(&self, elements: &[Element]) -> Self {
        let mut m = self.clone();
        m.enabled = Element::ALL.map(|e| elements.contains(&e));
        m
    }

    pub fn is_noiseless(&self) -> Result<bool> {
        Ok(self.rates()?.iter().all(|&(a, b)| a == 0.0 && b == 0.0))
    }

    pub fn validate(&self) -> Result<()> {
        self.rates().map(|_| ())
    }

    /// Enabled `(1/T1, 2/T_phi)` per element in slot order.
    pub fn rates(&self) -> Result<[(f64, f64); 3]> {
        let mut out = [(0.0, 0.0); 3];
        for e in Element::ALL {
            let r = self.element(e).rates()?;
            if self.enabled[e.slot()] {
                out[e.slot()] = r;
            }
        }
        Ok(out)
    }

    pub fn jump_operators(&self) -> Result<JumpOperatorSet> {
        let rates = self.rates()?;
        let mut ops = Vec::new();
        for e in Element::ALL {
            let (g1, gphi) = rates[e.slot()];
            if g1 > 0.0 {
                ops.push(JumpOperator { element: e, kind: JumpKind::Relaxation, rate: g1, operator: lowering(e) * g1.sqrt() });
            }
            if gphi > 0.0 {
                let n = DMatrix::from_diagonal(&DVector::from_row_slice(&crate::hilbert::number_diagonal(e)));
                ops.push(JumpOperator { element: e, kind: JumpKind::Dephasing, rate: gphi, operator: n * gphi.sqrt() });
            }
        }
        Ok(JumpOperatorSet { ops })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum JumpKind {
    Relaxation,
    Dephasing,
}

/// `sqrt(1/T1) b` or `sqrt(2/T_phi) b^dag b` for one element.
#[derive(Debug, Clone)]
pub struct JumpOperator {
    pub element: Element,
    pub kind: JumpKind,
    pub rate: f64,
    pub operator: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct JumpOperatorSet {
    pub ops: Vec<JumpOperator>,
}

impl JumpOperatorSet {
    /// Dense reference evaluation of the Lindblad dissipator.
    pub fn dissipator(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(rho.nrows(), rho.ncols());
        for op in &self.ops {
            let c = op.operator.map(|x| Complex64::new(x, 0.0));
            let cdc = c.adjoint() * &c;
            out += &c * rho * c.adjoint() - (&cdc * rho + rho * &cdc) * Complex64::new(0.5, 0.0);
        }
        out
    }
}

/// Structured dissipator for lowering and number jump operators.
#[derive(Debug, Clone)]
struct Dissipator {
    /// For each relaxing element: rate and, per basis index, the raised index and sqrt(n+1).
    relax: Vec<(f64, Vec<Option<(usize, f64)>>)>,
    /// Decay coefficient of each matrix element from the anticommutator and dephasing terms.
    decay: DMatrix<f64>,
    active: bool,
}

impl Dissipator {
    fn new(noise: &NoiseModel) -> Result<Self> {
        let rates = noise.rates()?;
        let mut relax = Vec::new();
        let mut decay = DMatrix::zeros(DIM, DIM);
        for e in Element::ALL {
            let (g1, gphi) = rates[e.slot()];
            let n: Vec<f64> = (0..DIM).map(|i| BareLabel::from_index(i).occupation(e) as f64).collect();
            for i in 0..DIM {
                for j in 0..DIM {
                    decay[(i, j)] += 0.5 * g1 * (n[i] + n[j]) + 0.5 * gphi * (n[i] - n[j]).powi(2);
                }
            }
            if g1 > 0.0 {
                let up = (0..DIM)
                    .map(|i| {
                        let l = BareLabel::from_index(i);
                        let k = l.occupation(e);
                        (k + 1 < crate::params::LEVELS as u8)
                            .then(|| (l.with_occupation(e, k + 1).index(), ((k + 1) as f64).sqrt()))
                    })
                    .collect();
                relax.push((g1, up));
            }
        }
        let active = !relax.is_empty() || decay.iter().any(|&x| x != 0.0);
        Ok(Dissipator { relax, decay, active })
    }

    /// `L(rho)`.
    fn apply(&self, rho: &SplitMatrix) -> SplitMatrix {
        let mut out = SplitMatrix {
            re: rho.re.component_mul(&self.decay) * -1.0,
            im: rho.im.component_mul(&self.decay) * -1.0,
        };
        for (g, up) in &self.relax {
            for j in 0..DIM {
                let Some((uj, fj)) = up[j] else { continue };
                for i in 0..DIM {
                    let Some((ui, fi)) = up[i] else { continue };
                    let w = g * fi * fj;
                    out.re[(i, j)] += w * rho.re[(ui, uj)];
                    out.im[(i, j)] += w * rho.im[(ui, uj)];
                }
            }
        }
        out
    }

    /// Second-order Taylor approximation of `exp(tau L)`; trace preserving.
    fn step(&self, rho: &mut SplitMatrix, tau: f64) {
        if !self.active {
            return;
        }
        let l1 = self.apply(rho);
        let l2 = self.apply(&l1);
        rho.re += &l1.re * tau + &l2.re * (0.5 * tau * tau);
        rho.im += &l1.im * tau + &l2.im * (0.5 * tau * tau);
    }
}

const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // sqrt(3)/6
const CF4_A1: f64 = 0.25 + GAUSS_OFFSET;
const CF4_A2: f64 = 0.25 - GAUSS_OFFSET;

type Point = ([f64; 3], [f64; 3]);

fn lerp_points(a: &Point, b: &Point, wa: f64, wb: f64) -> Point {
    let f = |x: &[f64; 3], y: &[f64; 3]| [0, 1, 2].map(|i| wa * x[i] + wb * y[i]);
    (f(&a.0, &b.0), f(&a.1, &b.1))
}

/// Frequencies and couplings at fractional sample position `x` (in units of dt).
///
/// Cubic Lagrange interpolation through four samples of the smooth piece
/// containing `x`; pieces shorter than four samples fall back to linear.
fn interpolate(s: &Schedule, x: f64) -> Point {
    let n = s.intervals();
    let k = (x.floor().max(0.0) as usize).min(n - 1);
    let piece = s.breaks.partition_point(|&b| b <= k);
    let lo = s.breaks.get(piece.wrapping_sub(1)).copied().unwrap_or(0);
    let hi = s.breaks.get(piece).copied().unwrap_or(n);
    if hi - lo < 3 {
        let f = x - k as f64;
        return lerp_points(&s.sample(k), &s.sample(k + 1), 1.0 - f, f);
    }
    let j0 = k.saturating_sub(1).max(lo).min(hi - 3);
    let u = x - j0 as f64;
    let w = [
        -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0,
        u * (u - 2.0) * (u - 3.0) / 2.0,
        -u * (u - 1.0) * (u - 3.0) / 2.0,
        u * (u - 1.0) * (u - 2.0) / 6.0,
    ];
    let mut om = [0.0; 3];
    let mut g = [0.0; 3];
    for (m, wm) in w.iter().enumerate() {
        let (a, b) = s.sample(j0 + m);
        for i in 0..3 {
            om[i] += wm * a[i];
            g[i] += wm * b[i];
        }
    }
    (om, g)
}

/// Builds step propagators for a schedule.
#[derive(Debug, Clone)]
pub struct Propagator<'a> {
    terms: HamiltonianTerms,
    schedule: &'a Schedule,
    substeps: usize,
    blocks: [Vec<usize>; 2],
}

impl<'a> Propagator<'a> {
    pub fn new(sys: &SystemParams, schedule: &'a Schedule) -> Self {
        let even: Vec<usize> = (0..DIM).filter(|&i| BareLabel::from_index(i).excitations() % 2 == 0).collect();
        let odd: Vec<usize> = (0..DIM).filter(|&i| BareLabel::from_index(i).excitations() % 2 == 1).collect();
        Propagator { terms: HamiltonianTerms::new(sys), schedule, substeps: 1, blocks: [even, odd] }
    }

    /// Split every sample interval into `m` integration steps.
    pub fn with_substeps(mut self, m: usize) -> Self {
        self.substeps = m.max(1);
        self
    }

    pub fn schedule(&self) -> &Schedule {
        self.schedule
    }

    pub fn step_count(&self) -> usize {
        self.schedule.intervals() * self.substeps
    }

    pub fn step_size(&self) -> f64 {
        self.schedule.dt / self.substeps as f64
    }

    /// `exp(-i pi h H(p))` assembled from the two parity blocks, block by block.
    fn half_exponential(&self, p: &Point, h: f64) -> [SplitMatrix; 2] {
        let hm = self.terms.matrix(p.0, p.1);
        self.blocks.clone().map(|idx| {
            let sub = hm.select_rows(&idx).select_columns(&idx);
            expm_i_symmetric(sub, PI * h)
        })
    }

    /// Propagator for integration step `step` (0-based).
    pub fn step_unitary(&self, step: usize) -> SplitMatrix {
        let m = self.substeps as f64;
        let h = self.step_size();
        let x0 = step as f64 / m;
        let p1 = interpolate(self.schedule, x0 + (0.5 - GAUSS_OFFSET) / m);
        let p2 = interpolate(self.schedule, x0 + (0.5 + GAUSS_OFFSET) / m);
        let early = lerp_points(&p1, &p2, 2.0 * CF4_A1, 2.0 * CF4_A2);
        let late = lerp_points(&p1, &p2, 2.0 * CF4_A2, 2.0 * CF4_A1);
        let e1 = self.half_exponential(&early, h);
        let e2 = self.half_exponential(&late, h);
        let mut u = SplitMatrix::zeros(DIM, DIM);
        for (b, idx) in self.blocks.iter().enumerate() {
            let ub = e2[b].mul(&e1[b]);
            for (a, &i) in idx.iter().enumerate() {
                for (c, &j) in idx.iter().enumerate() {
                    u.re[(i, j)] = ub.re[(a, c)];
                    u.im[(i, j)] = ub.im[(a, c)];
                }
            }
        }
        u
    }

    /// Calls `f(sample_index, U_step)` for every step; `sample_index` is
    /// `Some(k)` when the step ends exactly on sample `k`.
    pub fn for_each_step<F: FnMut(Option<usize>, &SplitMatrix)>(&self, mut f: F) {
        for step in 0..self.step_count() {
            let u = self.step_unitary(step);
            let end = (step + 1) % self.substeps == 0;
            f(end.then_some((step + 1) / self.substeps), &u);
        }
    }

    /// Full propagator over the schedule.
    pub fn unitary(&self) -> SplitMatrix {
        let mut acc = SplitMatrix::identity(DIM);
        self.for_each_step(|_, u| acc = u.mul(&acc));
        acc
    }

    /// Propagate the columns of `states` (27 x m) to the end of the schedule.
    pub fn evolve_columns(&self, states: &SplitMatrix) -> SplitMatrix {
        let mut s = states.clone();
        self.for_each_step(|_, u| s = u.mul(&s));
        s
    }
}

/// States at the requested times.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Ket>,
}

fn sample_indices(schedule: &Schedule, times: &[f64]) -> Result<Vec<usize>> {
    times
        .iter()
        .map(|&t| {
            let x = t / schedule.dt;
            let k = x.round();
            if t < -1e-12 || k as usize > schedule.intervals() || (x - k).abs() > 1e-6 {
                Err(Error::invalid("sample_times", format!("{t} ns is not a sample of the schedule")))
            } else {
                Ok(k as usize)
            }
        })
        .collect()
}

/// Schrodinger evolution of `psi0`, recorded at `sample_times` (must lie on the schedule grid).
pub fn propagate_unitary(sys: &SystemParams, schedule: &Schedule, psi0: &Ket, sample_times: &[f64]) -> Result<Trajectory> {
    psi0.check()?;
    let want = sample_indices(schedule, sample_times)?;
    let prop = Propagator::new(sys, schedule);
    let mut psi = crate::linalg::SplitVector::from_complex(&psi0.0);
    let mut states: Vec<Option<Ket>> = vec![None; want.len()];
    let record = |k: usize, psi: &crate::linalg::SplitVector, states: &mut Vec<Option<Ket>>| {
        for (slot, &w) in want.iter().enumerate() {
            if w == k {
                states[slot] = Some(Ket(psi.to_complex()));
            }
        }
    };
    record(0, &psi, &mut states);
    let mut worst = 0.0f64;
    prop.for_each_step(|k, u| {
        psi = u.mul_vec(&psi);
        if let Some(k) = k {
            let n = (psi.re.norm_squared() + psi.im.norm_squared()).sqrt();
            worst = worst.max((n - 1.0).abs());
            record(k, &psi, &mut states);
        }
    });
    if worst > 1e-8 {
        return Err(Error::NotNormalized { deviation: worst });
    }
    Ok(Trajectory { times: sample_times.to_vec(), states: states.into_iter().map(|s| s.unwrap()).collect() })
}

/// Final state of `psi0` with the step halved; errors if the result moves by more than `tol` in fidelity.
pub fn audit_step(sys: &SystemParams, schedule: &Schedule, psi0: &Ket, tol: f64) -> Result<f64> {
    let start = crate::linalg::SplitVector::from_complex(&psi0.0);
    let coarse = Propagator::new(sys, schedule);
    let fine = Propagator::new(sys, schedule).with_substeps(2);
    let run = |p: &Propagator| {
        let mut psi = start.clone();
        p.for_each_step(|_, u| psi = u.mul_vec(&psi));
        Ket(psi.to_complex())
    };
    let change = 1.0 - run(&coarse).fidelity(&run(&fine));
    if change > tol {
        return Err(Error::StepTooCoarse { change });
    }
    Ok(change)
}

/// Lindblad evolution of several initial states sharing one schedule.
///
/// Returns, for each initial state, the density matrices at `sample_times`.
pub fn lindblad_evolve_many(
    sys: &SystemParams,
    schedule: &Schedule,
    rho0: &[DensityMatrix],
    noise: &NoiseModel,
    sample_times: &[f64],
) -> Result<Vec<Vec<DensityMatrix>>> {
    for r in rho0 {
        r.check(1e-9)?;
    }
    let want = sample_indices(schedule, sample_times)?;
    let diss = Dissipator::new(noise)?;
    let prop = Propagator::new(sys, schedule);
    let h = prop.step_size();
    let mut rhos: Vec<SplitMatrix> = rho0.iter().map(|r| SplitMatrix::from_complex(&r.0)).collect();
    let mut out: Vec<Vec<Option<DensityMatrix>>> = vec![vec![None; want.len()]; rho0.len()];
    let record = |k: usize, rhos: &[SplitMatrix], out: &mut Vec<Vec<Option<DensityMatrix>>>| {
        for (slot, &w) in want.iter().enumerate() {
            if w == k {
                for (r, o) in rhos.iter().zip(out.iter_mut()) {
                    o[slot] = Some(DensityMatrix(r.to_complex()));
                }
            }
        }
    };
    record(0, &rhos, &mut out);
    prop.for_each_step(|k, u| {
        for r in rhos.iter_mut() {
            diss.step(r, 0.5 * h);
            *r = r.conjugate_by(u);
            diss.step(r, 0.5 * h);
        }
        if let Some(k) = k {
            record(k, &rhos, &mut out);
        }
    });
    let out: Vec<Vec<DensityMatrix>> = out.into_iter().map(|v| v.into_iter().map(|d| d.unwrap()).collect()).collect();
    for traj in &out {
        for d in traj {
            let min = d.min_eigenvalue();
            if min < -1e-6 {
                return Err(Error::NotPhysical { reason: format!("negative eigenvalue {min:e} during integration") });
            }
        }
    }
    Ok(out)
}

/// Lindblad evolution of a single initial state.
pub fn lindblad_evolve(
    sys: &SystemParams,
    schedule: &Schedule,
    rho0: &DensityMatrix,
    noise: &NoiseModel,
    sample_times: &[f64],
) -> Result<Vec<DensityMatrix>> {
    Ok(lindblad_evolve_many(sys, schedule, std::slice::from_ref(rho0), noise, sample_times)?.remove(0))
}

/// Final density matrices only, without eigenvalue checks; for hot loops.
pub fn lindblad_final(sys: &SystemParams, schedule: &Schedule, rho0: &[SplitMatrix], noise: &NoiseModel) -> Result<Vec<SplitMatrix>> {
    let diss = Dissipator::new(noise)?;
    let prop = Propagator::new(sys, schedule);
    let h = prop.step_size();
    let mut rhos = rho0.to_vec();
    prop.for_each_step(|_, u| {
        for r in rhos.iter_mut() {
            diss.step(r, 0.5 * h);
            *r = r.conjugate_by(u);
            diss.step(r, 0.5 * h);
        }
    });
    Ok(rhos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{hamiltonian_real, DressedBasis};
    use approx::assert_relative_eq;

    #[test]
    fn echo_formula() {
        let n = ElementNoise::echo(110_700.0, 48_500.0);
        let tphi = n.tphi().unwrap().unwrap();
        assert_relative_eq!(tphi, 1.0 / (1.0 / 48_500.0 - 1.0 / 221_400.0), max_relative = 1e-12);
        assert!(ElementNoise::echo(10.0, 25.0).tphi().is_err());
        assert_eq!(ElementNoise::echo(10.0, 20.0).tphi().unwrap(), None);
    }

    #[test]
    fn structured_dissipator_matches_dense() {
        let noise = NoiseModel::gate_point();
        let d = Dissipator::new(&noise).unwrap();
        let jumps = noise.jump_operators().unwrap();
        let mut s = 7u64;
        let rho = CMatrix::from_fn(DIM, DIM, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            Complex64::new((s >> 40) as f64 / 1e7, (s >> 20 & 0xfffff) as f64 / 1e6)
        });
        let dense = jumps.dissipator(&rho);
        let fast = d.apply(&SplitMatrix::from_complex(&rho)).to_complex();
        assert!((dense - fast).norm() < 1e-12 * rho.norm());
    }

    #[test]
    fn jump_operator_forms() {
        let set = NoiseModel::gate_point().jump_operators().unwrap();
        assert_eq!(set.ops.len(), 6);
        let relax = set.ops.iter().find(|o| o.element == Element::Q2 && o.kind == JumpKind::Relaxation).unwrap();
        let expect = lowering(Element::Q2) * (1.0 / 111_300.0f64).sqrt();
        assert!((&relax.operator - expect).norm() < 1e-15);
    }

    #[test]
    fn static_propagation_matches_exact_exponential() {
        let sys = SystemParams::device_2q();
        let s = Schedule::constant(&sys, 3.0, 0.05);
        let u = Propagator::new(&sys, &s).unitary().to_complex();
        let exact = expm_i_symmetric(hamiltonian_real(&sys), 2.0 * PI * 3.0).to_complex();
        assert!((&u - &exact).norm() < 1e-10, "{}", (&u - &exact).norm());
        let err = (u.adjoint() * &u - CMatrix::identity(DIM, DIM)).camax();
        assert!(err < 1e-12);
    }

    #[test]
    fn trajectory_starts_at_initial_state() {
        let sys = SystemParams::device_2q();
        let s = Schedule::constant(&sys, 1.0, 0.01);
        let psi = Ket::basis(BareLabel::new(1, 0, 1));
        let tr = propagate_unitary(&sys, &s, &psi, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(tr.states[0], psi);
        assert!((tr.states[2].norm() - 1.0).abs() < 1e-12);
        assert!(propagate_unitary(&sys, &s, &psi, &[0.503]).is_err());
    }

    #[test]
    fn fourth_order_convergence() {
        // Time-dependent coupler sweep: error falls ~16x per halving.
        let sys = SystemParams::device_2q();
        let mut s = Schedule::constant(&sys, 4.0, 0.08);
        for (k, w) in s.omega[1].iter_mut().enumerate() {
            *w = 8.0 + 1.5 * (k as f64 * 0.08 * 1.3).sin();
        }
        let psi = Ket(DressedBasis::new(&sys).vector(BareLabel::new(1, 0, 0)));
        let final_with = |m: usize| {
            let p = Propagator::new(&sys, &s).with_substeps(m);
            let c = SplitMatrix::from_complex(&CMatrix::from_column_slice(DIM, 1, psi.0.as_slice()));
            p.evolve_columns(&c).to_complex()
        };
        let reference = final_with(64);
        let e1 = (final_with(4) - &reference).norm();
        let e2 = (final_with(8) - &reference).norm();
        assert!(e1 / e2 > 12.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn relaxation_of_decoupled_level() {
        let sys = SystemParams { g_1c: 0.0, g_2c: 0.0, g_12: 0.0, ..SystemParams::device_2q() };
        let noise = NoiseModel { q1: ElementNoise { t1: Some(200.0), ..Default::default() }, ..NoiseModel::noiseless() }
            .only(&[Element::Q1]);
        let s = Schedule::constant(&sys, 300.0, 0.5);
        let rho0 = Ket::basis(BareLabel::new(1, 0, 0)).projector();
        let times = [0.0, 100.0, 200.0, 300.0];
        let out = lindblad_evolve(&sys, &s, &rho0, &noise, &times).unwrap();
        for (t, rho) in times.iter().zip(&out) {
            let n1 = rho.population(BareLabel::new(1, 0, 0).index());
            assert_relative_eq!(n1, (-t / 200.0).exp(), max_relative = 1e-4);
            assert!((rho.trace() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_lindblad_matches_unitary() {
        let sys = SystemParams::device_2q();
        let mut s = Schedule::constant(&sys, 2.0, 0.01);
        for (k, w) in s.omega[0].iter_mut().enumerate() {
            *w -= 0.2 * (k as f64 * 0.01 * PI / 2.0).sin();
        }
        let psi = Ket(DressedBasis::new(&sys).vector(BareLabel::new(1, 0, 1)));
        let u = propagate_unitary(&sys, &s, &psi, &[2.0]).unwrap();
        let rho = lindblad_evolve(&sys, &s, &psi.projector(), &NoiseModel::noiseless(), &[2.0]).unwrap();
        assert!((&rho[0].0 - u.states[0].projector().0).camax() < 1e-8);
    }

    #[test]
    fn noisy_evolution_stays_physical() {
        let sys = SystemParams::device_2q();
        let s = Schedule::constant(&sys, 50.0, 0.05);
        let psi = Ket(DressedBasis::new(&sys).vector(BareLabel::new(1, 0, 1)));
        let noise = NoiseModel { coupler: ElementNoise { t1: Some(30.0), tphi: Some(20.0), t2e: None }, ..NoiseModel::gate_point() };
        let out = lindblad_evolve(&sys, &s, &psi.projector(), &noise, &[25.0, 50.0]).unwrap();
        for rho in &out {
            assert!((rho.trace() - 1.0).abs() < 1e-7);
            assert!(crate::linalg::hermiticity_error(&rho.0) < 1e-9);
            assert!(rho.min_eigenvalue() > -1e-6);
        }
    }
}
