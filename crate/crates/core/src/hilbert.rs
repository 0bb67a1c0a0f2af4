//! Static Hamiltonian, dressed states and spectral quantities.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, hermiticity_error, inv_sqrt_hermitian, CMatrix, CVector};
use crate::optimize::{all_roots, grid_then_golden};
use crate::params::{BareLabel, CouplingForm, Element, SystemParams, DIM, PAIRS};

/// Default overlap needed to call an eigenvector by a bare label.
pub const LABEL_THRESHOLD: f64 = 0.5;

/// A square operator on the three-qutrit space.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub matrix: CMatrix,
    pub hermitian: bool,
}

impl OperatorMatrix {
    pub fn new(matrix: CMatrix) -> Self {
        let hermitian = hermiticity_error(&matrix) <= 1e-12 * matrix.norm().max(1.0);
        OperatorMatrix { matrix, hermitian }
    }

    pub fn from_real(m: &DMatrix<f64>) -> Self {
        Self::new(m.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Lowering operator of one element on the full space.
pub fn lowering(e: Element) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(DIM, DIM);
    for l in BareLabel::all() {
        let n = l.occupation(e);
        if n > 0 {
            let lower = l.with_occupation(e, n - 1);
            m[(lower.index(), l.index())] = (n as f64).sqrt();
        }
    }
    m
}

/// Occupation of element `e` in every basis state.
pub fn number_diagonal(e: Element) -> [f64; DIM] {
    let mut d = [0.0; DIM];
    for l in BareLabel::all() {
        d[l.index()] = l.occupation(e) as f64;
    }
    d
}

/// Coupling operator between two elements (unit strength).
pub fn coupling_operator(a: Element, b: Element, form: CouplingForm) -> DMatrix<f64> {
    let la = lowering(a);
    let lb = lowering(b);
    match form {
        CouplingForm::Full => {
            let xa = &la - la.transpose();
            let xb = &lb - lb.transpose();
            -(xa * xb)
        }
        CouplingForm::Rwa => la.transpose() * &lb + la * lb.transpose(),
    }
}

/// Precomputed pieces of the Hamiltonian; linear in frequencies and couplings.
#[derive(Debug, Clone)]
pub struct HamiltonianTerms {
    numbers: [[f64; DIM]; 3],
    anharmonic: [f64; DIM],
    coupling_ops: [DMatrix<f64>; 3],
}

impl HamiltonianTerms {
    pub fn new(params: &SystemParams) -> Self {
        let numbers = Element::ALL.map(number_diagonal);
        let mut anharmonic = [0.0; DIM];
        for e in Element::ALL {
            let eta = params.anharmonicity(e);
            for (i, a) in anharmonic.iter_mut().enumerate() {
                let n = numbers[e.slot()][i];
                *a += 0.5 * eta * n * (n - 1.0);
            }
        }
        let coupling_ops = PAIRS.map(|(a, b)| coupling_operator(a, b, params.coupling_form));
        HamiltonianTerms { numbers, anharmonic, coupling_ops }
    }

    /// Real symmetric Hamiltonian (GHz) for given frequencies `[q1, c, q2]`
    /// and couplings `[g_1c, g_2c, g_12]`.
    pub fn matrix(&self, freqs: [f64; 3], couplings: [f64; 3]) -> DMatrix<f64> {
        let mut h = &self.coupling_ops[0] * couplings[0];
        h += &self.coupling_ops[1] * couplings[1];
        h += &self.coupling_ops[2] * couplings[2];
        for i in 0..DIM {
            let mut d = self.anharmonic[i];
            for k in 0..3 {
                d += freqs[k] * self.numbers[k][i];
            }
            h[(i, i)] += d;
        }
        h
    }
}

/// Real Hamiltonian matrix of the static device.
pub fn hamiltonian_real(params: &SystemParams) -> DMatrix<f64> {
    HamiltonianTerms::new(params).matrix(params.frequencies(), params.couplings())
}

/// Builds the 27x27 device Hamiltonian in GHz.
pub fn build_hamiltonian(params: &SystemParams) -> Result<OperatorMatrix> {
    params.validate()?;
    let h = OperatorMatrix::from_real(&hamiltonian_real(params));
    if !h.hermitian {
        return Err(Error::NonHermitian { deviation: hermiticity_error(&h.matrix) });
    }
    Ok(h)
}

/// Eigenvalues (ascending) and eigenvectors of a Hamiltonian.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub energies: Vec<f64>,
    pub vectors: CMatrix,
}

impl Spectrum {
    pub fn of(h: &OperatorMatrix) -> Result<Self> {
        let dev = hermiticity_error(&h.matrix);
        if dev > 1e-12 * h.matrix.norm().max(1.0) {
            return Err(Error::NonHermitian { deviation: dev });
        }
        let (vals, vecs) = hermitian_eigen(&h.matrix);
        Ok(Spectrum { energies: vals.as_slice().to_vec(), vectors: vecs })
    }

    pub fn of_params(params: &SystemParams) -> Self {
        let (vals, vecs) = crate::linalg::symmetric_eigen(hamiltonian_real(params));
        Spectrum { energies: vals.as_slice().to_vec(), vectors: vecs.map(|x| Complex64::new(x, 0.0)) }
    }

    /// `|<bare|v_k>|^2`.
    pub fn overlap(&self, label: BareLabel, k: usize) -> f64 {
        self.vectors[(label.index(), k)].norm_sqr()
    }

    /// Eigenvector whose overlap with `label` is largest; ties go to the lower energy.
    pub fn best_match(&self, label: BareLabel) -> (usize, f64) {
        let mut best = (0, -1.0);
        for k in 0..self.energies.len() {
            let o = self.overlap(label, k);
            if o > best.1 + 1e-12 {
                best = (k, o);
            }
        }
        best
    }

    /// Indices of the two eigenvectors with the largest weight in span{a, b}.
    pub fn pair_in_span(&self, a: BareLabel, b: BareLabel) -> (usize, usize) {
        let mut w: Vec<(usize, f64)> =
            (0..self.energies.len()).map(|k| (k, self.overlap(a, k) + self.overlap(b, k))).collect();
        w.sort_by(|x, y| y.1.total_cmp(&x.1));
        let (i, j) = (w[0].0, w[1].0);
        if self.energies[i] <= self.energies[j] {
            (i, j)
        } else {
            (j, i)
        }
    }

    /// Eigenvector `k` with its phase fixed so that `<bare|v_k>` is real positive.
    pub fn vector_phased(&self, k: usize, reference: BareLabel) -> CVector {
        let v = self.vectors.column(k).into_owned();
        let r = v[reference.index()];
        if r.norm() > 0.0 {
            v * (r.conj() / r.norm())
        } else {
            v
        }
    }
}

/// One bare label matched to an eigenvector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Assignment {
    pub label: BareLabel,
    pub eigen_index: usize,
    pub energy: f64,
    pub overlap: f64,
}

/// Eigen-decomposition with a subset of eigenvectors named by bare labels.
#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub spectrum: Spectrum,
    pub assignments: Vec<Assignment>,
}

impl EigenSolution {
    pub fn get(&self, label: BareLabel) -> Option<&Assignment> {
        self.assignments.iter().find(|a| a.label == label)
    }

    pub fn energy(&self, label: BareLabel) -> Option<f64> {
        self.get(label).map(|a| a.energy)
    }

    /// Dressed vector for `label`, phase-fixed against its bare component.
    pub fn vector(&self, label: BareLabel) -> Option<CVector> {
        self.get(label).map(|a| self.spectrum.vector_phased(a.eigen_index, label))
    }
}

/// Diagonalizes `h` and names the eigenvectors for `labels`.
///
/// Fails with [`Error::AmbiguousLabel`] when a label's best overlap is below
/// `threshold` or when two labels claim the same eigenvector.
pub fn diagonalize_and_label(h: &OperatorMatrix, labels: &[BareLabel], threshold: f64) -> Result<EigenSolution> {
    let spectrum = Spectrum::of(h)?;
    label_spectrum(spectrum, labels, threshold)
}

pub fn label_spectrum(spectrum: Spectrum, labels: &[BareLabel], threshold: f64) -> Result<EigenSolution> {
    let mut assignments: Vec<Assignment> = Vec::with_capacity(labels.len());
    for &label in labels {
        let (k, o) = spectrum.best_match(label);
        if o < threshold {
            return Err(Error::AmbiguousLabel { label, overlap: o });
        }
        if let Some(prev) = assignments.iter().find(|a| a.eigen_index == k) {
            let loser = if prev.overlap < o { prev.label } else { label };
            return Err(Error::AmbiguousLabel { label: loser, overlap: o.min(prev.overlap) });
        }
        assignments.push(Assignment { label, eigen_index: k, energy: spectrum.energies[k], overlap: o });
    }
    Ok(EigenSolution { spectrum, assignments })
}

/// A complete bare-label to eigenvector matching (greedy by overlap).
///
/// Never fails; `min_overlap` reports how clean the matching is.
#[derive(Debug, Clone)]
pub struct DressedBasis {
    pub spectrum: Spectrum,
    /// `eigen_of[label.index()]` is the eigenvector index for that label.
    pub eigen_of: Vec<usize>,
    pub min_overlap: f64,
}

impl DressedBasis {
    pub fn new(params: &SystemParams) -> Self {
        Self::from_spectrum(Spectrum::of_params(params))
    }

    pub fn from_spectrum(spectrum: Spectrum) -> Self {
        let n = spectrum.energies.len();
        let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
        for l in 0..n {
            for k in 0..n {
                pairs.push((spectrum.vectors[(l, k)].norm_sqr(), l, k));
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut eigen_of = vec![usize::MAX; n];
        let mut taken = vec![false; n];
        let mut min_overlap = 1.0f64;
        for (o, l, k) in pairs {
            if eigen_of[l] == usize::MAX && !taken[k] {
                eigen_of[l] = k;
                taken[k] = true;
                min_overlap = min_overlap.min(o);
            }
        }
        DressedBasis { spectrum, eigen_of, min_overlap }
    }

    pub fn energy(&self, label: BareLabel) -> f64 {
        self.spectrum.energies[self.eigen_of[label.index()]]
    }

    pub fn vector(&self, label: BareLabel) -> CVector {
        self.spectrum.vector_phased(self.eigen_of[label.index()], label)
    }

    pub fn overlap(&self, label: BareLabel) -> f64 {
        self.spectrum.overlap(label, self.eigen_of[label.index()])
    }

    /// Matrix whose column `label.index()` is the dressed vector of `label`.
    pub fn matrix(&self) -> CMatrix {
        let n = self.eigen_of.len();
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m.set_column(i, &self.vector(BareLabel::from_index(i)));
        }
        m
    }
}

/// Signed effective coupling between bare states `a` and `b`.
///
/// The two eigenvectors with the largest weight in span{a, b} are projected
/// onto that span, symmetrically orthonormalized, and the off-diagonal element
/// of the resulting 2x2 effective Hamiltonian is returned (GHz).
pub fn effective_coupling(spectrum: &Spectrum, a: BareLabel, b: BareLabel) -> f64 {
    let (i, j) = spectrum.pair_in_span(a, b);
    let cmat = CMatrix::from_fn(2, 2, |r, col| {
        let label = if r == 0 { a } else { b };
        let k = if col == 0 { i } else { j };
        spectrum.vectors[(label.index(), k)]
    });
    let gram = cmat.adjoint() * &cmat;
    let orth = &cmat * inv_sqrt_hermitian(&gram);
    let e = CMatrix::from_diagonal(&CVector::from_vec(vec![
        Complex64::new(spectrum.energies[i], 0.0),
        Complex64::new(spectrum.energies[j], 0.0),
    ]));
    let heff = &orth * e * orth.adjoint();
    heff[(0, 1)].re
}

const G000: BareLabel = BareLabel::new(0, 0, 0);
const G100: BareLabel = BareLabel::new(1, 0, 0);
const G001: BareLabel = BareLabel::new(0, 0, 1);
const G101: BareLabel = BareLabel::new(1, 0, 1);

/// Static ZZ rate `E101 - E100 - E001 + E000` (GHz).
///
/// When |100> and |001> are too strongly hybridized to be labelled
/// individually, the sum of the two energies in their joint span is used.
pub fn zz_exact(params: &SystemParams) -> Result<f64> {
    params.validate()?;
    zz_from_spectrum(Spectrum::of_params(params))
}

pub fn zz_from_spectrum(spectrum: Spectrum) -> Result<f64> {
    let sol = label_spectrum(spectrum, &[G000, G101], LABEL_THRESHOLD)?;
    let e000 = sol.energy(G000).unwrap();
    let e101 = sol.energy(G101).unwrap();
    let spectrum = &sol.spectrum;
    let singles = match label_spectrum(spectrum.clone(), &[G100, G001], LABEL_THRESHOLD) {
        Ok(s) => s.energy(G100).unwrap() + s.energy(G001).unwrap(),
        Err(_) => {
            let (i, j) = spectrum.pair_in_span(G100, G001);
            let w = |k| spectrum.overlap(G100, k) + spectrum.overlap(G001, k);
            if w(i) < LABEL_THRESHOLD || w(j) < LABEL_THRESHOLD {
                return Err(Error::AmbiguousLabel { label: G100, overlap: w(i).min(w(j)) });
            }
            spectrum.energies[i] + spectrum.energies[j]
        }
    };
    Ok(e101 - singles + e000)
}

/// Signed effective |100> <-> |001> exchange coupling (GHz).
pub fn xy_coupling(params: &SystemParams) -> f64 {
    effective_coupling(&Spectrum::of_params(params), G100, G001)
}

/// Result of an anticrossing search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Anticrossing {
    /// Half the minimum splitting (GHz).
    pub gtilde: f64,
    /// Value of the tuned frequency at the minimum (GHz).
    pub resonance: f64,
}

/// Half of the energy splitting between the two states in span{a, b}.
pub fn pair_splitting(params: &SystemParams, a: BareLabel, b: BareLabel) -> f64 {
    let s = Spectrum::of_params(params);
    let (i, j) = s.pair_in_span(a, b);
    0.5 * (s.energies[j] - s.energies[i]).abs()
}

/// Bare-energy crossing point of `a` and `b` as a function of `tuning`.
pub fn bare_resonance(params: &SystemParams, a: BareLabel, b: BareLabel, tuning: Element) -> Option<f64> {
    let bare = |l: BareLabel, w: f64| -> f64 {
        let p = params.with_frequency(tuning, w);
        Element::ALL
            .iter()
            .map(|&e| {
                let n = l.occupation(e) as f64;
                p.frequency(e) * n + 0.5 * p.anharmonicity(e) * n * (n - 1.0)
            })
            .sum()
    };
    let slope = a.occupation(tuning) as f64 - b.occupation(tuning) as f64;
    if slope == 0.0 {
        return None;
    }
    let offset = bare(a, 0.0) - bare(b, 0.0);
    Some(-offset / slope)
}

/// Minimum half-splitting between `a` and `b` while sweeping the frequency of
/// `tuning`. Without an explicit bracket the search spans +-0.3 GHz around the
/// bare crossing.
pub fn anticrossing_gap(
    params: &SystemParams,
    a: BareLabel,
    b: BareLabel,
    tuning: Element,
    bracket: Option<(f64, f64)>,
) -> Result<Anticrossing> {
    params.validate()?;
    let (lo, hi) = match bracket {
        Some(br) => br,
        None => {
            let x0 = bare_resonance(params, a, b, tuning).ok_or(Error::NoResonance { a, b, lo: f64::NAN, hi: f64::NAN })?;
            (x0 - 0.3, x0 + 0.3)
        }
    };
    if !(lo < hi) || lo <= 0.0 {
        return Err(Error::NoResonance { a, b, lo, hi });
    }
    let split = |w: f64| pair_splitting(&params.with_frequency(tuning, w), a, b);
    let (x, g, at_edge) = grid_then_golden(split, lo, hi, 61, 1e-9);
    if at_edge {
        return Err(Error::NoResonance { a, b, lo, hi });
    }
    Ok(Anticrossing { gtilde: g, resonance: x })
}

/// A zero of the static ZZ rate as a function of coupler frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZzNull {
    pub omega_c: f64,
    pub zeta: f64,
    pub xy_coupling: f64,
}

/// Coupler frequency in `[lo, hi]` where the static ZZ vanishes.
///
/// All roots are located; the one with the weakest residual exchange coupling
/// is returned.
pub fn find_zz_null(params: &SystemParams, lo: f64, hi: f64) -> Result<ZzNull> {
    params.validate()?;
    let zz = |w: f64| zz_exact(&params.with_frequency(Element::Coupler, w)).unwrap_or(f64::NAN);
    let n = ((hi - lo) / 0.02).ceil().max(8.0) as usize + 1;
    let roots = all_roots(zz, lo, hi, n, 1e-9);
    if roots.is_empty() {
        let (_, residual, _) = grid_then_golden(|w| zz(w).abs(), lo, hi, n, 1e-6);
        return Err(Error::NoNullInRange { lo, hi, residual });
    }
    let best = roots
        .iter()
        .map(|&w| {
            let p = params.with_frequency(Element::Coupler, w);
            ZzNull { omega_c: w, zeta: zz_exact(&p).unwrap_or(f64::NAN), xy_coupling: xy_coupling(&p) }
        })
        .min_by(|a, b| a.xy_coupling.abs().total_cmp(&b.xy_coupling.abs()))
        .unwrap();
    Ok(best)
}

/// Coupler frequency in `[lo, hi]` where the effective |100>-|001> coupling vanishes.
pub fn find_xy_null(params: &SystemParams, lo: f64, hi: f64) -> Result<f64> {
    params.validate()?;
    let j = |w: f64| xy_coupling(&params.with_frequency(Element::Coupler, w));
    let n = ((hi - lo) / 0.02).ceil().max(8.0) as usize + 1;
    let roots = all_roots(j, lo, hi, n, 1e-9);
    roots.first().copied().ok_or_else(|| {
        let (_, residual, _) = grid_then_golden(|w| j(w).abs(), lo, hi, n, 1e-6);
        Error::NoNullInRange { lo, hi, residual }
    })
}
