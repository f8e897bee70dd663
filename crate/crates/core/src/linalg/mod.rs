//! Dense complex linear algebra used by every other module.
//!
//! Storage and arithmetic come from `nalgebra`; the decompositions with a
//! convention that matters downstream (QR sign, unitary completion, SVD and
//! eigenvector phases, the rank-one secular solver) are implemented here so
//! their output is fully determined by the input.

mod decomp;
mod partition;
mod secular;

use std::ops::Range;

use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub use decomp::{
    hermitian_eigen, hermitian_eigen_tol, hermitian_sqrt_inv, hermitian_sqrt_inv_tol, qr_decompose,
    qr_decompose_tol, schur_complement, svd, unitary_completion, Svd,
};
pub use partition::BlockPartition;
pub use secular::{recover_k_magnitudes, recover_k_magnitudes_tol, rank_one_update_eigs, SecularConfig};

/// Dense complex matrix. Every matrix symbol of the model lives in one of
/// these; the role is carried by the surrounding type.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Default relative tolerance for structural checks.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Eigenvalues (descending) with the matching unitary eigenvector matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPair {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl SpectralPair {
    /// Rebuilds `U diag(lambda) U^H`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(lam);
        }
        &scaled * u.adjoint()
    }
}

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Real-valued matrix lifted into the complex field (row-major input).
pub fn from_real_rows(rows: usize, cols: usize, data: &[f64]) -> ComplexMatrix {
    assert_eq!(data.len(), rows * cols);
    DMatrix::from_fn(rows, cols, |i, j| c64(data[i * cols + j], 0.0))
}

pub fn identity(n: usize) -> ComplexMatrix {
    DMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> ComplexMatrix {
    DMatrix::zeros(rows, cols)
}

pub fn diag_real(values: &[f64]) -> ComplexMatrix {
    let n = values.len();
    DMatrix::from_fn(n, n, |i, j| if i == j { c64(values[i], 0.0) } else { c64(0.0, 0.0) })
}

pub fn frobenius(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `||a - b||_F / max(||a||_F, ||b||_F)`, zero when both vanish.
pub fn rel_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let scale = frobenius(a).max(frobenius(b));
    let diff = frobenius(&(a - b));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn ensure_finite(m: &ComplexMatrix, what: &'static str) -> Result<()> {
    if is_finite(m) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// `||S - S^H||_F <= tol * ||S||_F`.
pub fn is_hermitian(m: &ComplexMatrix, tol: f64) -> bool {
    m.is_square() && frobenius(&(m - m.adjoint())) <= tol * frobenius(m).max(f64::MIN_POSITIVE)
}

/// `(S + S^H) / 2`.
pub fn hermitize(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Owned copy of a sub-block; empty ranges give empty matrices.
pub fn block(m: &ComplexMatrix, rows: Range<usize>, cols: Range<usize>) -> ComplexMatrix {
    m.view((rows.start, cols.start), (rows.len(), cols.len())).into_owned()
}

pub fn set_block(target: &mut ComplexMatrix, row: usize, col: usize, value: &ComplexMatrix) {
    target.view_mut((row, col), value.shape()).copy_from(value);
}

/// Stacks `top` over `bottom`.
pub fn vstack(top: &ComplexMatrix, bottom: &ComplexMatrix) -> ComplexMatrix {
    assert_eq!(top.ncols(), bottom.ncols());
    let mut out = zeros(top.nrows() + bottom.nrows(), top.ncols());
    set_block(&mut out, 0, 0, top);
    set_block(&mut out, top.nrows(), 0, bottom);
    out
}

/// Places `a` and `b` on the diagonal of a zero matrix.
pub fn block_diag(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let mut out = zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    set_block(&mut out, 0, 0, a);
    set_block(&mut out, a.nrows(), a.ncols(), b);
    out
}

pub fn trace_re(m: &ComplexMatrix) -> f64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)].re).sum()
}

fn cholesky(s: &ComplexMatrix, what: &str) -> Result<Cholesky<Complex64, nalgebra::Dyn>> {
    if !s.is_square() {
        return Err(Error::DimensionMismatch(format!("{what} is {}x{}", s.nrows(), s.ncols())));
    }
    let chol = Cholesky::new(hermitize(s)).ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))?;
    // The complex square root never fails, so a negative pivot shows up as an
    // imaginary diagonal entry rather than as an error.
    let l = chol.l_dirty();
    if (0..l.nrows()).any(|i| !(l[(i, i)].re > 0.0) || l[(i, i)].im.abs() > 1e-12 * l[(i, i)].re) {
        return Err(Error::NotPositiveDefinite(what.to_string()));
    }
    Ok(chol)
}

/// `S^{-1} B` for Hermitian positive definite `S`.
pub fn hpd_solve(s: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if s.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "solve {}x{} against {} rows",
            s.nrows(),
            s.ncols(),
            b.nrows()
        )));
    }
    if s.nrows() == 0 {
        return Ok(b.clone());
    }
    Ok(cholesky(s, "system matrix")?.solve(b))
}

/// `B^H S^{-1} B`, returned exactly Hermitian.
pub fn quadratic_form(b: &ComplexMatrix, s: &ComplexMatrix) -> Result<ComplexMatrix> {
    let solved = hpd_solve(s, b)?;
    Ok(hermitize(&(b.adjoint() * solved)))
}

pub fn hpd_inverse(s: &ComplexMatrix) -> Result<ComplexMatrix> {
    if s.nrows() == 0 {
        return Ok(s.clone());
    }
    Ok(hermitize(&cholesky(s, "matrix")?.inverse()))
}

/// Determinant through LU (the empty matrix has determinant one).
pub fn determinant(m: &ComplexMatrix) -> Complex64 {
    if m.nrows() == 0 {
        c64(1.0, 0.0)
    } else {
        m.clone().determinant()
    }
}

/// General inverse through LU.
pub fn inverse(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::IllConditioned("singular matrix".into()))
}

/// Number of singular values above `tol * ||m||_F`.
pub fn numerical_rank(m: &ComplexMatrix, tol: f64) -> usize {
    let scale = frobenius(m);
    if scale == 0.0 {
        return 0;
    }
    svd(m).sigma.iter().filter(|&&s| s > tol * scale).count()
}

/// Largest eigenvalue of a Hermitian matrix (`0` for empty input).
pub fn max_eigenvalue(m: &ComplexMatrix) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    Ok(hermitian_eigen(m)?.eigenvalues[0])
}
