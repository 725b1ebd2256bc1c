//! Small dense complex linear-algebra helpers shared by every module.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Columns of `vectors` are the matching eigenvectors.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(m: &CMatrix) -> Self {
        let sym = hermitian_part(m);
        let eig = SymmetricEigen::new(sym);
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Self { values, vectors }
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Rebuilds `U diag(values) U^H` with caller-supplied eigenvalues.
    pub fn compose(&self, values: &[f64]) -> CMatrix {
        let n = self.vectors.nrows();
        let mut out = CMatrix::zeros(n, n);
        for (i, &lam) in values.iter().enumerate() {
            if lam == 0.0 {
                continue;
            }
            let u = self.vectors.column(i);
            out.ger(C64::new(lam, 0.0), &u, &u.conjugate(), ONE);
        }
        hermitian_part(&out)
    }
}

/// `(M + M^H) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Largest entrywise deviation from Hermitian symmetry.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for r in 0..m.nrows() {
        for c in r..m.ncols() {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

pub fn check_hermitian(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let defect = hermitian_defect(m);
    if defect > 1e-9 * m.norm().max(1.0) {
        return Err(Error::NotHermitian(defect));
    }
    Ok(())
}

/// Checks Hermitian symmetry and returns the eigendecomposition, failing if
/// the smallest eigenvalue is below `-1e-9 * max(1, lambda_max)`.
pub fn check_psd(m: &CMatrix) -> Result<HermitianEigen> {
    check_hermitian(m)?;
    let eig = HermitianEigen::new(m);
    if eig.min() < -1e-9 * eig.max().abs().max(1.0) {
        return Err(Error::NotPsd(eig.min()));
    }
    Ok(eig)
}

/// `x x^H`.
pub fn outer(x: &CVector) -> CMatrix {
    x * x.adjoint()
}

/// Cholesky factor of a Hermitian positive-definite matrix.
pub fn cholesky(m: &CMatrix) -> Result<Cholesky<C64, Dyn>> {
    Cholesky::new(m.clone()).ok_or(Error::Factorization("cholesky of non-positive-definite matrix"))
}

/// Natural-log determinant of a Hermitian positive-definite matrix,
/// accumulated from the Cholesky diagonal.
pub fn ln_det(m: &CMatrix) -> Result<f64> {
    let chol = cholesky(m)?;
    Ok(ln_det_from(&chol))
}

/// `ln|I + S|` for Hermitian `S` as `sum log1p(lambda)`; keeps full
/// relative accuracy when `S` is small.
pub fn ln_det_identity_plus(s: &CMatrix) -> Result<f64> {
    let eig = HermitianEigen::new(s);
    if !(eig.min() > -1.0) {
        return Err(Error::Factorization("I + S is not positive definite"));
    }
    Ok(eig.values.iter().map(|l| l.ln_1p()).sum())
}

pub fn ln_det_from(chol: &Cholesky<C64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    (0..l.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum()
}

/// Real part of `tr(A^H B)`, the Frobenius inner product on Hermitian matrices.
pub fn frobenius_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Real part of `a^H b`.
pub fn real_inner(a: &CVector, b: &CVector) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Circularly-symmetric complex Gaussian sample with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_cvector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    CVector::from_fn(n, |_, _| complex_normal(rng))
}

pub fn random_cmatrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

/// Stacks a complex vector as `[re_0, im_0, re_1, im_1, ...]`.
pub fn stack_vector(x: &CVector) -> DVector<f64> {
    DVector::from_iterator(2 * x.len(), x.iter().flat_map(|z| [z.re, z.im]))
}

pub fn unstack_vector(v: &DVector<f64>) -> CVector {
    CVector::from_fn(v.len() / 2, |i, _| C64::new(v[2 * i], v[2 * i + 1]))
}

/// Stacks every entry of a square complex matrix (column-major) as real pairs.
pub fn stack_matrix(m: &CMatrix) -> DVector<f64> {
    DVector::from_iterator(2 * m.len(), m.iter().flat_map(|z| [z.re, z.im]))
}

pub fn unstack_matrix(v: &DVector<f64>, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |r, c| {
        let i = c * n + r;
        C64::new(v[2 * i], v[2 * i + 1])
    })
}
