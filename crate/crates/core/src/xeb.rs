//! Simulated cross-entropy benchmarking.
//!
//! Circuits act on the nine dressed levels with the coupler in its ground
//! state, in a frame rotating with the uncoupled qubit transitions. Idle
//! periods and the CPhase gate enter as superoperators taken from the full
//! 27-level Lindblad dynamics; single-qubit gates are instantaneous unitaries.
//!
//! Random streams: every circuit draws from its own ChaCha8 generator seeded
//! with the master seed, on stream `(kind << 48) | (depth_index << 24) | circuit`
//! where `kind` is 0 for reference and 1 for interleaved sequences. Bootstrap
//! resampling uses stream `u64::MAX - kind`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{lindblad_final, NoiseModel, Propagator};
use crate::error::{Error, Result};
use crate::fit::{fit_exp_decay_with, fit_leakage, percentile_interval, DecayFit, LeakageFit};
use crate::hilbert::DressedBasis;
use crate::linalg::{CMatrix, SplitMatrix};
use crate::metrics::wrap_phase;
use crate::params::{BareLabel, Element, SystemParams, DIM};
use crate::pulse::{gate_schedule, GateProtocolParams, Schedule};

/// Dimension of the computational space.
pub const D: usize = 4;
const SUB: usize = 9;
/// Positions of |00>, |01>, |10>, |11> among the nine levels `3 n1 + n2`.
const COMP: [usize; 4] = [0, 1, 3, 4];

fn sub_label(k: usize) -> BareLabel {
    BareLabel::new((k / 3) as u8, 0, (k % 3) as u8)
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Linear map on 9x9 density matrices, acting on the column-major vectorization.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub matrix: CMatrix,
}

impl Channel {
    pub fn identity() -> Self {
        Channel { matrix: CMatrix::identity(SUB * SUB, SUB * SUB) }
    }

    /// `rho -> U rho U^dagger`.
    pub fn from_unitary(u: &CMatrix) -> Self {
        Channel { matrix: u.conjugate().kronecker(u) }
    }

    /// Depolarizes the computational block with survival `p`, leaving leaked
    /// populations alone and shrinking their coherences with the block.
    pub fn depolarizing(p: f64) -> Self {
        let mut m = CMatrix::zeros(SUB * SUB, SUB * SUB);
        for j in 0..SUB {
            for i in 0..SUB {
                let k = i + SUB * j;
                let (ci, cj) = (COMP.contains(&i), COMP.contains(&j));
                match (ci, cj) {
                    (true, true) => {
                        m[(k, k)] += c(p, 0.0);
                        if i == j {
                            for &x in &COMP {
                                m[(x + SUB * x, k)] += c((1.0 - p) / D as f64, 0.0);
                            }
                        }
                    }
                    (false, false) => m[(k, k)] = c(1.0, 0.0),
                    _ => m[(k, k)] = c(p, 0.0),
                }
            }
        }
        Channel { matrix: m }
    }

    /// `next` after `self`.
    pub fn then(&self, next: &Channel) -> Channel {
        Channel { matrix: &next.matrix * &self.matrix }
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let v = &self.matrix * CMatrix::from_column_slice(SUB * SUB, 1, rho.as_slice());
        CMatrix::from_column_slice(SUB, SUB, v.as_slice())
    }

    /// Lindblad dynamics of `schedule` restricted to the nine coupler-ground
    /// dressed levels and moved into the rotating frame.
    pub fn from_schedule(sys: &SystemParams, schedule: &Schedule, noise: &NoiseModel, frame: &Frame) -> Result<Self> {
        let b = frame.embedding();
        let inputs: Vec<SplitMatrix> = (0..SUB * SUB)
            .map(|k| SplitMatrix::from_complex(&(b.column(k % SUB) * b.column(k / SUB).adjoint())))
            .collect();
        let outs = inputs
            .par_chunks(SUB)
            .map(|chunk| lindblad_final(sys, schedule, chunk, noise))
            .collect::<Result<Vec<_>>>()?;
        let r = frame.rotation(schedule.duration());
        let mut m = CMatrix::zeros(SUB * SUB, SUB * SUB);
        for (k, out) in outs.iter().flatten().enumerate() {
            let rho = b.adjoint() * out.to_complex() * &b;
            for j in 0..SUB {
                for i in 0..SUB {
                    m[(i + SUB * j, k)] = rho[(i, j)] * r[i] * r[j].conj();
                }
            }
        }
        Ok(Channel { matrix: m })
    }
}

/// Dressed levels and rotating-frame energies of the nine coupler-ground states.
#[derive(Debug, Clone)]
pub struct Frame {
    pub basis: DressedBasis,
    /// `E(n1 0 0) + E(0 0 n2) - E(000)` per level (GHz).
    pub energies: [f64; SUB],
}

impl Frame {
    pub fn new(sys: &SystemParams) -> Self {
        let basis = DressedBasis::new(sys);
        let e0 = basis.energy(BareLabel::new(0, 0, 0));
        let energies = std::array::from_fn(|k| {
            let (n1, n2) = ((k / 3) as u8, (k % 3) as u8);
            basis.energy(BareLabel::new(n1, 0, 0)) + basis.energy(BareLabel::new(0, 0, n2)) - e0
        });
        Frame { basis, energies }
    }

    /// 27x9 matrix of dressed vectors.
    pub fn embedding(&self) -> CMatrix {
        let mut b = CMatrix::zeros(DIM, SUB);
        for k in 0..SUB {
            b.set_column(k, &self.basis.vector(sub_label(k)));
        }
        b
    }

    /// Diagonal of the lab-to-frame rotation after `t` ns.
    pub fn rotation(&self, t: f64) -> [Complex64; SUB] {
        self.energies.map(|e| Complex64::from_polar(1.0, 2.0 * PI * e * t))
    }
}

/// Phase `n1 a1 + n2 a2` removed from every level: a frame change on each qubit.
fn virtual_z(a1: f64, a2: f64) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_fn(SUB, |k, _| {
        Complex64::from_polar(1.0, -((k / 3) as f64 * a1 + (k % 3) as f64 * a2))
    }))
}

/// Interleaved gate as a channel, with its single-qubit phases removed.
#[derive(Debug, Clone)]
pub struct GateChannel {
    pub channel: Channel,
    /// Conditional phase of the noiseless gate in the frame.
    pub phi_2q: f64,
    pub duration: f64,
}

impl GateChannel {
    pub fn simulate(sys: &SystemParams, gp: &GateProtocolParams, noise: &NoiseModel, frame: &Frame) -> Result<Self> {
        let schedule = gate_schedule(sys, gp)?;
        let t = schedule.duration();
        let b = frame.embedding();
        let u = Propagator::new(sys, &schedule).unitary().to_complex();
        let r = frame.rotation(t);
        let u9 = CMatrix::from_fn(SUB, SUB, |i, j| r[i] * (b.column(i).adjoint() * &u * b.column(j))[(0, 0)]);
        let ph = |k: usize| u9[(COMP[k], COMP[k])].arg();
        let (a1, a2) = (ph(2) - ph(0), ph(1) - ph(0));
        let phi_2q = wrap_phase(ph(3) - ph(1) - ph(2) + ph(0));
        let z = Channel::from_unitary(&virtual_z(a1, a2));
        let channel = Channel::from_schedule(sys, &schedule, noise, frame)?.then(&z);
        Ok(GateChannel { channel, phi_2q, duration: t })
    }

    /// Noiseless CPhase(phi) acting on |11> only.
    pub fn ideal(phi: f64) -> Self {
        let mut u = CMatrix::identity(SUB, SUB);
        u[(4, 4)] = Complex64::from_polar(1.0, phi);
        GateChannel { channel: Channel::from_unitary(&u), phi_2q: phi, duration: 0.0 }
    }
}

/// Random single-qubit gate family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateSet {
    /// sqrt(X), sqrt(Y), sqrt(W), never repeating on the same qubit.
    #[default]
    Xyw,
    Haar,
}

/// What sits between the single-qubit layers of interleaved sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interleave {
    #[default]
    None,
    /// The simulated gate from the supplied protocol.
    Calibrated,
    IdealCz,
}

fn default_cycle() -> f64 {
    40.0
}
fn default_bootstrap() -> usize {
    100
}
fn default_idle_dt() -> f64 {
    0.1
}
fn default_offset() -> Option<f64> {
    Some(0.0)
}
fn default_idle_noise() -> NoiseModel {
    NoiseModel::idle_point().only(&[Element::Q1, Element::Q2])
}
fn default_gate_noise() -> NoiseModel {
    NoiseModel::gate_point()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XebConfig {
    /// Strictly increasing circuit depths.
    pub depths: Vec<usize>,
    pub circuits: usize,
    pub seed: u64,
    #[serde(default)]
    pub gate_set: GateSet,
    #[serde(default)]
    pub interleave: Interleave,
    /// Idle time accompanying each single-qubit layer (ns).
    #[serde(default = "default_cycle")]
    pub cycle_duration: f64,
    #[serde(default = "default_idle_noise")]
    pub idle_noise: NoiseModel,
    #[serde(default = "default_gate_noise")]
    pub gate_noise: NoiseModel,
    /// Extra depolarizing survival injected once per cycle.
    #[serde(default)]
    pub depolarizing: Option<f64>,
    /// Estimate probabilities from this many samples instead of exactly.
    #[serde(default)]
    pub shots: Option<u64>,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "default_idle_dt")]
    pub idle_dt: f64,
    /// Fixed asymptote `B` of the decay fits; `None` fits it freely.
    #[serde(default = "default_offset")]
    pub offset: Option<f64>,
}

impl XebConfig {
    /// Depths up to 100, 20 circuits each, measured device coherence, interleaving the calibrated gate.
    pub fn standard(seed: u64) -> Self {
        XebConfig {
            depths: vec![1, 3, 6, 10, 16, 25, 40, 60, 80, 100],
            circuits: 20,
            seed,
            gate_set: GateSet::Xyw,
            interleave: Interleave::Calibrated,
            cycle_duration: default_cycle(),
            idle_noise: default_idle_noise(),
            gate_noise: default_gate_noise(),
            depolarizing: None,
            shots: None,
            bootstrap: default_bootstrap(),
            idle_dt: default_idle_dt(),
            offset: default_offset(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depths.is_empty() || self.depths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("depths", "must be non-empty and strictly increasing"));
        }
        if self.circuits == 0 {
            return Err(Error::invalid("circuits", "need at least one circuit per depth"));
        }
        if !(self.cycle_duration >= 0.0) || !(self.idle_dt > 0.0) {
            return Err(Error::invalid("cycle_duration", "durations must be non-negative and idle_dt positive"));
        }
        if let Some(p) = self.depolarizing {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid("depolarizing", "survival must lie in [0, 1]"));
            }
        }
        if self.shots == Some(0) {
            return Err(Error::invalid("shots", "must be positive"));
        }
        self.idle_noise.validate()?;
        self.gate_noise.validate()
    }
}

/// A fitted value with its 68 % bootstrap interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Estimate {
    fn from_samples(value: f64, mut samples: Vec<f64>) -> Self {
        if samples.is_empty() {
            return Estimate { value, lo: value, hi: value };
        }
        let (lo, hi) = percentile_interval(&mut samples, 0.68);
        Estimate { value, lo: lo.min(value), hi: hi.max(value) }
    }
}

/// `A p^d + B` with intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XebFit {
    pub a: Estimate,
    pub p: Estimate,
    pub b: Estimate,
    pub rms: f64,
}

/// Statistics of one random circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CircuitSample {
    /// `D sum P P_ideal - sum P`: leaked population reads out uniformly at random.
    pub numerator: f64,
    /// `D sum P_ideal^2 - 1`.
    pub denominator: f64,
    pub purity: f64,
    pub leakage: f64,
}

/// Depth-resolved curves and fits of one sequence type.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XebCurve {
    pub depths: Vec<usize>,
    pub xeb: Vec<f64>,
    pub purity: Vec<f64>,
    pub leakage: Vec<f64>,
    pub samples: Vec<Vec<CircuitSample>>,
    pub fit: XebFit,
    pub purity_fit: DecayFit,
    pub leakage_fit: LeakageFit,
    /// `(1 - p)(1 - 1/D)`.
    pub cycle_error: f64,
    /// Same formula on the purity decay.
    pub purity_error: f64,
    pub leakage_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XebReport {
    pub reference: XebCurve,
    pub interleaved: Option<XebCurve>,
    /// Conditional phase used as the ideal interleaved gate.
    pub phi_2q: Option<f64>,
    pub gate_fidelity: Option<f64>,
    pub decoherence_error: Option<f64>,
}

/// `F = p + (1 - p)/D` with `p = p_int / p_ref`.
pub fn fidelity_from_p(p_ref: f64, p_int: f64, d: usize) -> f64 {
    let p = p_int / p_ref;
    p + (1.0 - p) / d as f64
}

/// `purity_int - leak_int - 1.5 purity_ref`; may be negative.
pub fn decoherence_error_estimate(purity_int: f64, leak_int: f64, purity_ref: f64) -> f64 {
    purity_int - leak_int - 1.5 * purity_ref
}

/// Per-cycle error of a decay parameter in dimension `d`.
pub fn cycle_error(p: f64, d: usize) -> f64 {
    (1.0 - p) * (1.0 - 1.0 / d as f64)
}

fn sqrt_pauli(theta: f64) -> [[Complex64; 2]; 2] {
    let (s, co) = (FRAC_1_SQRT_2, FRAC_1_SQRT_2);
    let (x, y) = (theta.cos(), theta.sin());
    // cos(pi/4) I - i sin(pi/4) (x X + y Y)
    [[c(co, 0.0), c(-s * y, -s * x)], [c(s * y, -s * x), c(co, 0.0)]]
}

fn haar<R: Rng>(rng: &mut R) -> [[Complex64; 2]; 2] {
    let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let [a, b, cc, d] = q.map(|x| x / n);
    [[c(a, b), c(cc, d)], [c(-cc, d), c(a, -b)]]
}

/// Single-qubit layer sampler with the no-repeat memory.
struct Layers {
    set: GateSet,
    last: [Option<usize>; 2],
}

impl Layers {
    fn next<R: Rng>(&mut self, rng: &mut R) -> [[[Complex64; 2]; 2]; 2] {
        std::array::from_fn(|q| match self.set {
            GateSet::Haar => haar(rng),
            GateSet::Xyw => {
                let k = match self.last[q] {
                    Some(prev) => (prev + 1 + rng.random_range(0..2)) % 3,
                    None => rng.random_range(0..3),
                };
                self.last[q] = Some(k);
                sqrt_pauli([0.0, 0.5 * PI, 0.25 * PI][k])
            }
        })
    }
}

fn embed(u: &[[Complex64; 2]; 2], levels: usize) -> CMatrix {
    let mut m = CMatrix::identity(levels, levels);
    for i in 0..2 {
        for j in 0..2 {
            m[(i, j)] = u[i][j];
        }
    }
    m
}

struct Circuits<'a> {
    config: &'a XebConfig,
    idle: Channel,
    gate: Option<(Channel, f64)>,
}

impl Circuits<'_> {
    fn run(&self, kind: u64, depth_index: usize, circuit: usize) -> CircuitSample {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream((kind << 48) | ((depth_index as u64) << 24) | circuit as u64);
        let depth = self.config.depths[depth_index];
        let mut layers = Layers { set: self.config.gate_set, last: [None; 2] };
        let mut rho = CMatrix::zeros(SUB, SUB);
        rho[(0, 0)] = c(1.0, 0.0);
        let mut psi = nalgebra::DVector::from_element(D, c(0.0, 0.0));
        psi[0] = c(1.0, 0.0);
        let cz = self.gate.as_ref().map(|(_, phi)| Complex64::from_polar(1.0, *phi));
        for _ in 0..depth {
            let [u1, u2] = layers.next(&mut rng);
            let u9 = embed(&u1, 3).kronecker(&embed(&u2, 3));
            rho = &u9 * rho * u9.adjoint();
            psi = embed(&u1, 2).kronecker(&embed(&u2, 2)) * psi;
            rho = self.idle.apply(&rho);
            if let Some((g, _)) = &self.gate {
                rho = g.apply(&rho);
                psi[3] *= cz.unwrap();
            }
        }
        let mut p: [f64; D] = std::array::from_fn(|x| rho[(COMP[x], COMP[x])].re.max(0.0));
        let ideal: [f64; D] = std::array::from_fn(|x| psi[x].norm_sqr());
        let rho_c = CMatrix::from_fn(D, D, |i, j| rho[(COMP[i], COMP[j])]);
        let tr = rho_c.trace().re;
        let tr2 = (&rho_c * &rho_c).trace().re;
        if let Some(shots) = self.config.shots {
            p = sample_counts(&mut rng, &p, shots);
        }
        let dot: f64 = p.iter().zip(&ideal).map(|(a, b)| a * b).sum();
        let sq: f64 = ideal.iter().map(|x| x * x).sum();
        CircuitSample {
            numerator: D as f64 * dot - p.iter().sum::<f64>(),
            denominator: D as f64 * sq - 1.0,
            purity: ((D as f64 * tr2 - 1.0) / (D as f64 - 1.0)).max(0.0).sqrt(),
            leakage: (1.0 - tr).max(0.0),
        }
    }
}

/// Empirical frequencies of the four outcomes; leaked population is a fifth outcome.
fn sample_counts<R: Rng>(rng: &mut R, p: &[f64; D], shots: u64) -> [f64; D] {
    let mut left = shots;
    let mut mass = 1.0;
    let mut out = [0.0; D];
    for (o, &pk) in out.iter_mut().zip(p) {
        if left == 0 || mass <= 0.0 {
            break;
        }
        let q = (pk / mass).clamp(0.0, 1.0);
        let k = Binomial::new(left, q).map(|b| b.sample(rng)).unwrap_or(0);
        *o = k as f64 / shots as f64;
        left -= k;
        mass -= pk;
    }
    out
}

/// Ratio of summed numerators and denominators per depth; `NaN` where the
/// ideal outputs are too flat to carry information.
fn xeb_means(samples: &[Vec<CircuitSample>]) -> Vec<f64> {
    samples
        .iter()
        .map(|v| {
            let den = v.iter().map(|s| s.denominator).sum::<f64>();
            if den < 1e-6 * v.len() as f64 {
                f64::NAN
            } else {
                v.iter().map(|s| s.numerator).sum::<f64>() / den
            }
        })
        .collect()
}

fn finite_points(d: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    d.iter().zip(y).filter(|(_, y)| y.is_finite()).map(|(&d, &y)| (d, y)).unzip()
}

fn mean_of(samples: &[Vec<CircuitSample>], f: impl Fn(&CircuitSample) -> f64) -> Vec<f64> {
    samples.iter().map(|v| v.iter().map(&f).sum::<f64>() / v.len() as f64).collect()
}

/// [`fit_exp_decay_with`], treating a curve pinned at one as `p = 1` and other
/// flat or collapsed curves as degenerate.
pub fn fit_decay_curve(d: &[f64], y: &[f64], offset: Option<f64>) -> Result<DecayFit> {
    let (d, y) = finite_points(d, y);
    let (d, y) = (d.as_slice(), y.as_slice());
    let (min, max) = y.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    if max - min < 1e-9 {
        if (max - 1.0).abs() < 1e-9 {
            let b = offset.unwrap_or(0.0);
            return Ok(DecayFit { a: 1.0 - b, p: 1.0, b, rms: 0.0 });
        }
        return Err(Error::FitDegenerate { reason: format!("flat curve at {max:.6}") });
    }
    let f = fit_exp_decay_with(d, y, offset)?;
    if f.p < 1e-6 {
        return Err(Error::FitDegenerate { reason: "decay indistinguishable from zero".into() });
    }
    Ok(f)
}

fn curve(config: &XebConfig, circuits: &Circuits, kind: u64) -> Result<XebCurve> {
    let tasks: Vec<(usize, usize)> =
        (0..config.depths.len()).flat_map(|i| (0..config.circuits).map(move |c| (i, c))).collect();
    let flat: Vec<CircuitSample> = tasks.par_iter().map(|&(i, c)| circuits.run(kind, i, c)).collect();
    let samples: Vec<Vec<CircuitSample>> = flat.chunks(config.circuits).map(|c| c.to_vec()).collect();
    let d: Vec<f64> = config.depths.iter().map(|&x| x as f64).collect();
    let xeb = xeb_means(&samples);
    let purity = mean_of(&samples, |s| s.purity);
    let leakage = mean_of(&samples, |s| s.leakage);
    let fit = fit_decay_curve(&d, &xeb, config.offset)?;
    let purity_fit = fit_decay_curve(&d, &purity, config.offset)?;
    let leakage_fit = if leakage.iter().all(|&l| l < 1e-15) {
        LeakageFit { per_cycle: 0.0, lambda: 1.0, rms: 0.0 }
    } else {
        fit_leakage(&d, &leakage)?
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(u64::MAX - kind);
    let mut boot: [Vec<f64>; 3] = Default::default();
    for _ in 0..config.bootstrap {
        let resampled: Vec<Vec<CircuitSample>> = samples
            .iter()
            .map(|v| (0..v.len()).map(|_| v[rng.random_range(0..v.len())]).collect())
            .collect();
        if let Ok(f) = fit_decay_curve(&d, &xeb_means(&resampled), config.offset) {
            boot[0].push(f.a);
            boot[1].push(f.p);
            boot[2].push(f.b);
        }
    }
    let [ba, bp, bb] = boot;
    let fit = XebFit {
        a: Estimate::from_samples(fit.a, ba),
        p: Estimate::from_samples(fit.p, bp),
        b: Estimate::from_samples(fit.b, bb),
        rms: fit.rms,
    };
    Ok(XebCurve {
        depths: config.depths.clone(),
        xeb,
        purity,
        leakage,
        samples,
        cycle_error: cycle_error(fit.p.value, D),
        purity_error: cycle_error(purity_fit.p, D),
        leakage_error: leakage_fit.per_cycle,
        fit,
        purity_fit,
        leakage_fit,
    })
}

/// Runs reference sequences and, if configured, interleaved ones.
///
/// `gate` supplies the calibrated protocol for [`Interleave::Calibrated`].
pub fn run_xeb(sys: &SystemParams, config: &XebConfig, gate: Option<&GateProtocolParams>) -> Result<XebReport> {
    config.validate()?;
    let frame = Frame::new(sys);
    let mut idle = Channel::from_schedule(sys, &Schedule::constant(sys, config.cycle_duration, config.idle_dt), &config.idle_noise, &frame)?;
    if let Some(p) = config.depolarizing {
        idle = idle.then(&Channel::depolarizing(p));
    }
    let reference = curve(config, &Circuits { config, idle: idle.clone(), gate: None }, 0)?;
    let gate = match config.interleave {
        Interleave::None => None,
        Interleave::IdealCz => Some(GateChannel::ideal(PI)),
        Interleave::Calibrated => {
            let gp = gate.ok_or_else(|| Error::invalid("interleave", "a calibrated gate protocol is required"))?;
            Some(GateChannel::simulate(sys, gp, &config.gate_noise, &frame)?)
        }
    };
    let Some(g) = gate else {
        return Ok(XebReport { reference, interleaved: None, phi_2q: None, gate_fidelity: None, decoherence_error: None });
    };
    let interleaved = curve(config, &Circuits { config, idle, gate: Some((g.channel, g.phi_2q)) }, 1)?;
    let gate_fidelity = fidelity_from_p(reference.fit.p.value, interleaved.fit.p.value, D);
    let decoherence_error =
        decoherence_error_estimate(interleaved.purity_error, interleaved.leakage_error, reference.purity_error);
    Ok(XebReport {
        reference,
        interleaved: Some(interleaved),
        phi_2q: Some(g.phi_2q),
        gate_fidelity: Some(gate_fidelity),
        decoherence_error: Some(decoherence_error),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn small(seed: u64) -> XebConfig {
        XebConfig {
            depths: vec![1, 2, 4, 8, 16, 32],
            circuits: 6,
            interleave: Interleave::None,
            idle_noise: NoiseModel::noiseless(),
            gate_noise: NoiseModel::noiseless(),
            bootstrap: 20,
            ..XebConfig::standard(seed)
        }
    }

    #[test]
    fn eq3_arithmetic() {
        assert_eq!(fidelity_from_p(0.97, 0.97, 4), 1.0);
        assert_relative_eq!(fidelity_from_p(1.0, 0.99, 4), 0.9925, epsilon = 1e-15);
    }

    #[test]
    fn eq4_arithmetic() {
        assert_relative_eq!(decoherence_error_estimate(0.0073, 0.0026, 0.0029), 0.00035, epsilon = 1e-12);
        assert_eq!(decoherence_error_estimate(0.004, 0.004, 0.0), 0.0);
    }

    #[test]
    fn gates_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for set in [GateSet::Xyw, GateSet::Haar] {
            let mut l = Layers { set, last: [None; 2] };
            for _ in 0..20 {
                for u in l.next(&mut rng) {
                    let m = embed(&u, 2);
                    assert!((&m * m.adjoint() - CMatrix::identity(2, 2)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn xyw_never_repeats() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut l = Layers { set: GateSet::Xyw, last: [None; 2] };
        let mut prev = None;
        for _ in 0..200 {
            l.next(&mut rng);
            assert_ne!(Some(l.last[0]), prev);
            prev = Some(l.last[0]);
        }
    }

    #[test]
    fn depolarizing_is_trace_preserving() {
        let ch = Channel::depolarizing(0.9);
        let mut rho = CMatrix::zeros(SUB, SUB);
        rho[(0, 0)] = c(0.5, 0.0);
        rho[(4, 4)] = c(0.3, 0.0);
        rho[(8, 8)] = c(0.2, 0.0);
        rho[(0, 4)] = c(0.1, 0.1);
        rho[(4, 0)] = c(0.1, -0.1);
        let out = ch.apply(&rho);
        assert_relative_eq!(out.trace().re, 1.0, epsilon = 1e-14);
        assert_relative_eq!(out[(8, 8)].re, 0.2, epsilon = 1e-14);
        assert_relative_eq!(out[(0, 4)].re, 0.09, epsilon = 1e-14);
    }

    fn at_null() -> SystemParams {
        let p = SystemParams::device_2q();
        p.with_frequency(Element::Coupler, crate::hilbert::find_zz_null(&p, 10.0, 12.0).unwrap().omega_c)
    }

    #[test]
    fn noiseless_reference_is_flat() {
        let sys = at_null();
        let r = run_xeb(&sys, &small(4), None).unwrap();
        assert_eq!(r.reference.fit.p.value, 1.0);
        assert!(r.reference.leakage.iter().all(|&l| l < 1e-8));
        assert!(r.reference.xeb.iter().filter(|x| x.is_finite()).all(|&x| (x - 1.0).abs() < 1e-6), "{:?}", r.reference.xeb);
    }

    #[test]
    fn injected_depolarization_is_recovered() {
        let sys = SystemParams::device_2q();
        let cfg = XebConfig { depolarizing: Some(0.99), cycle_duration: 0.0, ..small(5) };
        let r = run_xeb(&sys, &cfg, None).unwrap();
        assert!((r.reference.fit.p.value - 0.99).abs() < 1e-6, "{:?}", r.reference.fit);
        assert!((r.reference.purity_fit.p - 0.99).abs() < 1e-6);
    }

    #[test]
    fn ideal_cz_interleave_costs_nothing() {
        let sys = SystemParams::device_2q();
        let cfg = XebConfig { depolarizing: Some(0.98), cycle_duration: 0.0, interleave: Interleave::IdealCz, ..small(6) };
        let r = run_xeb(&sys, &cfg, None).unwrap();
        let f = r.gate_fidelity.unwrap();
        assert!((f - 1.0).abs() < 1e-6, "{f}");
    }

    #[test]
    fn calibrated_interleave_needs_a_gate() {
        let cfg = XebConfig { interleave: Interleave::Calibrated, ..small(1) };
        assert!(matches!(run_xeb(&SystemParams::device_2q(), &cfg, None), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn seeded_runs_repeat() {
        let sys = SystemParams::device_2q();
        let cfg = XebConfig { depolarizing: Some(0.97), cycle_duration: 0.0, gate_set: GateSet::Haar, ..small(11) };
        let a = run_xeb(&sys, &cfg, None).unwrap();
        let b = run_xeb(&sys, &cfg, None).unwrap();
        assert_eq!(a.reference.samples, b.reference.samples);
        let c = run_xeb(&sys, &XebConfig { seed: 12, ..cfg }, None).unwrap();
        assert_ne!(a.reference.samples, c.reference.samples);
    }

    #[test]
    fn flat_curve_away_from_one_is_degenerate() {
        let d = [1.0, 2.0, 3.0];
        assert!(matches!(fit_decay_curve(&d, &[0.5; 3], None), Err(Error::FitDegenerate { .. })));
        assert_eq!(fit_decay_curve(&d, &[1.0; 3], Some(0.0)).unwrap().p, 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn shot_frequencies_are_normalized(a in 0.0f64..0.5, b in 0.0f64..0.3, seed in any::<u64>()) {
            let p = [a, b, 0.1, (0.9 - a - b).max(0.0)];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = sample_counts(&mut rng, &p, 1000);
            let total: f64 = f.iter().sum();
            prop_assert!(total <= 1.0 + 1e-12);
            prop_assert!(f.iter().all(|&x| x >= 0.0));
        }
    }
}
