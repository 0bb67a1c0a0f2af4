//! Dense linear-algebra helpers.
//!
//! Propagation works with complex matrices stored as separate real and
//! imaginary parts so that every product runs through the real GEMM kernel.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Complex matrix split into real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitMatrix {
    pub re: DMatrix<f64>,
    pub im: DMatrix<f64>,
}

impl SplitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SplitMatrix { re: DMatrix::zeros(rows, cols), im: DMatrix::zeros(rows, cols) }
    }

    pub fn identity(n: usize) -> Self {
        SplitMatrix { re: DMatrix::identity(n, n), im: DMatrix::zeros(n, n) }
    }

    pub fn from_complex(m: &CMatrix) -> Self {
        SplitMatrix { re: m.map(|z| z.re), im: m.map(|z| z.im) }
    }

    pub fn to_complex(&self) -> CMatrix {
        self.re.zip_map(&self.im, Complex64::new)
    }

    pub fn nrows(&self) -> usize {
        self.re.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.re.ncols()
    }

    /// `self * rhs` with three real products.
    pub fn mul(&self, rhs: &SplitMatrix) -> SplitMatrix {
        let t1 = &self.re * &rhs.re;
        let t2 = &self.im * &rhs.im;
        let t3 = (&self.re + &self.im) * (&rhs.re + &rhs.im);
        let re = &t1 - &t2;
        let im = t3 - t1 - t2;
        SplitMatrix { re, im }
    }

    /// `self * rhs^dagger`.
    pub fn mul_adjoint(&self, rhs: &SplitMatrix) -> SplitMatrix {
        // (a + ib)(c - id)^T = a c^T + b d^T + i (b c^T - a d^T)
        let ct = rhs.re.transpose();
        let dt = rhs.im.transpose();
        let t1 = &self.re * &ct;
        let t2 = &self.im * &dt;
        let t3 = (&self.re + &self.im) * (&ct - &dt);
        let re = &t1 + &t2;
        let im = t3 - t1 + t2;
        SplitMatrix { re, im }
    }

    /// `u * self * u^dagger`.
    pub fn conjugate_by(&self, u: &SplitMatrix) -> SplitMatrix {
        u.mul(self).mul_adjoint(u)
    }

    pub fn trace(&self) -> Complex64 {
        Complex64::new(self.re.trace(), self.im.trace())
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.re[(i, j)], self.im[(i, j)])
    }

    pub fn adjoint(&self) -> SplitMatrix {
        SplitMatrix { re: self.re.transpose(), im: -self.im.transpose() }
    }

    pub fn mul_vec(&self, v: &SplitVector) -> SplitVector {
        SplitVector {
            re: &self.re * &v.re - &self.im * &v.im,
            im: &self.re * &v.im + &self.im * &v.re,
        }
    }
}

/// Complex vector split into real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitVector {
    pub re: DVector<f64>,
    pub im: DVector<f64>,
}

impl SplitVector {
    pub fn from_complex(v: &CVector) -> Self {
        SplitVector { re: v.map(|z| z.re), im: v.map(|z| z.im) }
    }

    pub fn to_complex(&self) -> CVector {
        self.re.zip_map(&self.im, Complex64::new)
    }
}

/// `exp(-i theta h)` for real symmetric `h`.
pub fn expm_i_symmetric(h: DMatrix<f64>, theta: f64) -> SplitMatrix {
    let eig = SymmetricEigen::new(h);
    let v = &eig.eigenvectors;
    let mut vc = v.clone();
    let mut vs = v.clone();
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let (s, c) = (theta * lam).sin_cos();
        vc.column_mut(k).scale_mut(c);
        vs.column_mut(k).scale_mut(-s);
    }
    let vt = v.transpose();
    SplitMatrix { re: vc * &vt, im: vs * vt }
}

/// Largest entry of `|m - m^dagger|`.
pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (DVector<f64>, CMatrix) {
    let is_real = m.iter().all(|z| z.im == 0.0);
    let (vals, vecs) = if is_real {
        let e = SymmetricEigen::new(m.map(|z| z.re));
        (e.eigenvalues, e.eigenvectors.map(|x| Complex64::new(x, 0.0)))
    } else {
        let e = SymmetricEigen::new(m.clone());
        (e.eigenvalues, e.eigenvectors)
    };
    sort_eigen(vals, vecs)
}

/// Real symmetric eigen-decomposition, eigenvalues ascending.
pub fn symmetric_eigen(m: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let e = SymmetricEigen::new(m);
    sort_eigen(e.eigenvalues, e.eigenvectors)
}

fn sort_eigen<T: nalgebra::Scalar + Copy>(
    vals: DVector<f64>,
    vecs: DMatrix<T>,
) -> (DVector<f64>, DMatrix<T>) {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let sorted_vals = DVector::from_iterator(vals.len(), order.iter().map(|&k| vals[k]));
    let sorted_vecs = DMatrix::from_fn(vecs.nrows(), vecs.ncols(), |i, j| vecs[(i, order[j])]);
    (sorted_vals, sorted_vecs)
}

/// Principal square root of a positive semidefinite Hermitian matrix.
/// Small negative eigenvalues from rounding are clipped to zero.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let mut scaled = vecs.clone();
    for (k, &lam) in vals.iter().enumerate() {
        scaled.column_mut(k).scale_mut(lam.max(0.0).sqrt());
    }
    &scaled * vecs.adjoint()
}

/// Uhlmann fidelity `(tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
pub fn uhlmann_fidelity(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    if let Some(psi) = pure_state_vector(rho) {
        return expectation(sigma, &psi);
    }
    if let Some(psi) = pure_state_vector(sigma) {
        return expectation(rho, &psi);
    }
    let s = psd_sqrt(rho);
    let inner = &s * sigma * &s;
    let (vals, _) = hermitian_eigen(&inner);
    let tr: f64 = vals.iter().map(|&l| l.max(0.0).sqrt()).sum();
    tr * tr
}

/// `<psi| m |psi>` (real part).
pub fn expectation(m: &CMatrix, psi: &CVector) -> f64 {
    (psi.adjoint() * m * psi)[(0, 0)].re
}

/// If `rho` is a pure state to within 1e-12 in purity, return its vector.
fn pure_state_vector(rho: &CMatrix) -> Option<CVector> {
    let tr = rho.trace().re;
    let purity = (rho * rho).trace().re;
    if (purity - tr * tr).abs() > 1e-12 || (tr - 1.0).abs() > 1e-9 {
        return None;
    }
    let (vals, vecs) = hermitian_eigen(rho);
    let n = vals.len();
    Some(vecs.column(n - 1).into_owned() * Complex64::new(vals[n - 1].max(0.0).sqrt(), 0.0))
}

/// Inverse square root of a small Hermitian positive-definite matrix.
pub fn inv_sqrt_hermitian(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let mut scaled = vecs.clone();
    for (k, &lam) in vals.iter().enumerate() {
        scaled.column_mut(k).scale_mut(1.0 / lam.sqrt());
    }
    &scaled * vecs.adjoint()
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn random_complex(n: usize, seed: u64) -> CMatrix {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        CMatrix::from_fn(n, n, |_, _| Complex64::new(next(), next()))
    }

    #[test]
    fn split_products_match_complex() {
        let a = random_complex(7, 1);
        let b = random_complex(7, 2);
        let sa = SplitMatrix::from_complex(&a);
        let sb = SplitMatrix::from_complex(&b);
        let ab = sa.mul(&sb).to_complex();
        assert!((ab - &a * &b).norm() < 1e-12);
        let abd = sa.mul_adjoint(&sb).to_complex();
        assert!((abd - &a * b.adjoint()).norm() < 1e-12);
    }

    #[test]
    fn exponential_is_unitary_and_correct() {
        let h = DMatrix::from_fn(5, 5, |i, j| ((i + j) as f64).cos() + if i == j { i as f64 } else { 0.0 });
        let h = (&h + h.transpose()) * 0.5;
        let u = expm_i_symmetric(h.clone(), 0.7);
        let uc = u.to_complex();
        let err = (&uc * uc.adjoint() - CMatrix::identity(5, 5)).norm();
        assert!(err < 1e-13);
        // Compare with a high-order Taylor series.
        let a = h.map(|x| Complex64::new(0.0, -0.7 * x));
        let mut term = CMatrix::identity(5, 5);
        let mut sum = term.clone();
        for k in 1..60 {
            term = &term * &a / Complex64::new(k as f64, 0.0);
            sum += &term;
        }
        assert!((sum - uc).norm() < 1e-11);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let a = random_complex(6, 3);
        let m = &a * a.adjoint();
        let s = psd_sqrt(&m);
        assert!((&s * &s - &m).norm() < 1e-11);
        assert!(hermiticity_error(&s) < 1e-12);
    }

    #[test]
    fn fidelity_pure_and_mixed() {
        let a = random_complex(4, 4);
        let rho = &a * a.adjoint();
        let rho = &rho / rho.trace();
        assert_relative_eq!(uhlmann_fidelity(&rho, &rho), 1.0, epsilon = 1e-9);
        let mix = CMatrix::identity(4, 4) / Complex64::new(4.0, 0.0);
        let mut pure = CMatrix::zeros(4, 4);
        pure[(2, 2)] = Complex64::new(1.0, 0.0);
        assert_relative_eq!(uhlmann_fidelity(&pure, &mix), 0.25, epsilon = 1e-12);
        assert_relative_eq!(uhlmann_fidelity(&mix, &pure), 0.25, epsilon = 1e-12);
        // Commuting mixed states: (sum sqrt(p q))^2.
        let r = CMatrix::from_diagonal(&CVector::from_vec(vec![c(0.5, 0.0), c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0)]));
        let s = CMatrix::from_diagonal(&CVector::from_vec(vec![c(0.2, 0.0), c(0.3, 0.0), c(0.5, 0.0), c(0.0, 0.0)]));
        let expect = ((0.1f64).sqrt() + (0.15f64).sqrt()).powi(2);
        assert_relative_eq!(uhlmann_fidelity(&r, &s), expect, epsilon = 1e-10);
    }

    #[test]
    fn eigen_sorted() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![c(3.0, 0.0), c(-1.0, 0.0), c(2.0, 0.0)]));
        let (v, _) = hermitian_eigen(&m);
        assert_eq!(v.as_slice(), &[-1.0, 2.0, 3.0]);
    }
}
