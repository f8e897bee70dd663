use num_complex::Complex64;

use super::{c64, frobenius, hermitize, identity, is_hermitian, zeros, ComplexMatrix, SpectralPair, DEFAULT_TOL};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;
/// Entries of a unit vector below this magnitude count as zero when fixing phases.
const PHASE_ZERO: f64 = 1e-10;

/// Householder reflector `H = I - beta v v^H` with `H x = alpha e_1`.
struct Reflector {
    v: Vec<Complex64>,
    beta: f64,
    alpha: Complex64,
}

impl Reflector {
    fn new(x: &[Complex64]) -> Self {
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let tail = x[1..].iter().map(|z| z.norm_sqr()).sum::<f64>();
        if norm == 0.0 || tail == 0.0 {
            return Self { v: vec![c64(0.0, 0.0); x.len()], beta: 0.0, alpha: x[0] };
        }
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { c64(1.0, 0.0) };
        let alpha = -phase * norm;
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vnorm2 = v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        Self { v, beta: 2.0 / vnorm2, alpha }
    }

    /// Applies `H` to rows `offset..` of every column of `m` from column `col0` on.
    fn apply_left(&self, m: &mut ComplexMatrix, offset: usize, col0: usize) {
        if self.beta == 0.0 {
            return;
        }
        for j in col0..m.ncols() {
            let mut dot = c64(0.0, 0.0);
            for (i, vi) in self.v.iter().enumerate() {
                dot += vi.conj() * m[(offset + i, j)];
            }
            let coef = dot * self.beta;
            for (i, vi) in self.v.iter().enumerate() {
                m[(offset + i, j)] -= vi * coef;
            }
        }
    }
}

/// Householder triangularisation of the columns of `a` (copied).
fn householder(a: &ComplexMatrix) -> (Vec<Reflector>, ComplexMatrix) {
    let (rows, cols) = a.shape();
    let mut r = a.clone();
    let mut reflectors = Vec::with_capacity(cols.min(rows));
    for k in 0..cols.min(rows) {
        let x: Vec<Complex64> = (k..rows).map(|i| r[(i, k)]).collect();
        let h = Reflector::new(&x);
        h.apply_left(&mut r, k, k);
        if h.beta != 0.0 {
            r[(k, k)] = h.alpha;
            for i in k + 1..rows {
                r[(i, k)] = c64(0.0, 0.0);
            }
        }
        reflectors.push(h);
    }
    (reflectors, r)
}

/// Product `H_1 ... H_p` applied to the first `cols` columns of the identity.
fn accumulate(reflectors: &[Reflector], rows: usize, cols: usize) -> ComplexMatrix {
    let mut q = zeros(rows, cols);
    for i in 0..cols.min(rows) {
        q[(i, i)] = c64(1.0, 0.0);
    }
    for (k, h) in reflectors.iter().enumerate().rev() {
        h.apply_left(&mut q, k, 0);
    }
    q
}

/// Thin QR with `R` upper triangular and a strictly positive real diagonal.
pub fn qr_decompose(a: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    qr_decompose_tol(a, DEFAULT_TOL)
}

pub fn qr_decompose_tol(a: &ComplexMatrix, tol: f64) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let (rows, cols) = a.shape();
    let threshold = tol * frobenius(a);
    if cols > rows {
        return Err(Error::RankDeficient { pivot: 0.0, threshold });
    }
    let (reflectors, full_r) = householder(a);
    let mut q = accumulate(&reflectors, rows, cols);
    let mut r = zeros(cols, cols);
    for i in 0..cols {
        for j in i..cols {
            r[(i, j)] = full_r[(i, j)];
        }
    }
    let min_pivot = (0..cols).map(|k| r[(k, k)].norm()).fold(f64::INFINITY, f64::min);
    if cols > 0 && (min_pivot <= threshold || min_pivot == 0.0) {
        return Err(Error::RankDeficient { pivot: min_pivot, threshold });
    }
    for k in 0..cols {
        let d = r[(k, k)] / r[(k, k)].norm();
        for i in 0..rows {
            q[(i, k)] *= d;
        }
        for j in k..cols {
            r[(k, j)] *= d.conj();
        }
        r[(k, k)] = c64(r[(k, k)].re, 0.0);
    }
    Ok((q, r))
}

/// Extends an `n x j` isometry to an `n x n` unitary whose first `j` columns
/// are exactly `q`. The extra columns come from the Householder chain that
/// triangularises `q`, so the result depends only on `q`.
pub fn unitary_completion(q: &ComplexMatrix, n: usize) -> Result<ComplexMatrix> {
    let (rows, j) = q.shape();
    if rows != n || j > n {
        return Err(Error::DimensionMismatch(format!("cannot complete a {rows}x{j} matrix to {n}x{n}")));
    }
    let deviation = frobenius(&(q.adjoint() * q - identity(j)));
    if deviation > DEFAULT_TOL * (j.max(1) as f64) {
        return Err(Error::NotIsometry { deviation });
    }
    let (reflectors, _) = householder(q);
    let mut u = accumulate(&reflectors, n, n);
    u.view_mut((0, 0), (n, j)).copy_from(q);
    Ok(u)
}

/// Full singular value decomposition `C = U diag(sigma) V^H`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `rows x rows` unitary.
    pub u: ComplexMatrix,
    /// `min(rows, cols)` singular values, descending.
    pub sigma: Vec<f64>,
    /// `cols x cols` unitary.
    pub v: ComplexMatrix,
}

impl Svd {
    /// Rectangular `rows x cols` matrix of singular values.
    pub fn sigma_matrix(&self) -> ComplexMatrix {
        let mut s = zeros(self.u.nrows(), self.v.nrows());
        for (i, &x) in self.sigma.iter().enumerate() {
            s[(i, i)] = c64(x, 0.0);
        }
        s
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        &self.u * self.sigma_matrix() * self.v.adjoint()
    }
}

/// Jacobi rotation that diagonalises the Hermitian 2x2 `[[app, apq], [conj(apq), aqq]]`.
/// Returns `(c, s, e)` for `V = [[c, s], [-s conj(e), c conj(e)]]`.
fn jacobi_rotation(app: f64, aqq: f64, apq: Complex64) -> (f64, f64, Complex64) {
    let mag = apq.norm();
    let e = apq / mag;
    let zeta = (aqq - app) / (2.0 * mag);
    let t = if zeta >= 0.0 {
        1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
    } else {
        -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    (c, c * t, e)
}

fn rotate_columns(m: &mut ComplexMatrix, p: usize, q: usize, c: f64, s: f64, e: Complex64) {
    let ec = e.conj();
    for i in 0..m.nrows() {
        let xp = m[(i, p)];
        let xq = m[(i, q)];
        m[(i, p)] = xp * c - xq * ec * s;
        m[(i, q)] = xp * s + xq * ec * c;
    }
}

/// Hestenes one-sided Jacobi on a tall matrix: returns `(A V, V)` with
/// mutually orthogonal columns in `A V`.
fn one_sided_jacobi(a: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let (rows, cols) = a.shape();
    let mut w = a.clone();
    let mut v = identity(cols);
    let eps = f64::EPSILON * (rows.max(1) as f64);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = c64(0.0, 0.0);
                for i in 0..rows {
                    alpha += w[(i, p)].norm_sqr();
                    beta += w[(i, q)].norm_sqr();
                    gamma += w[(i, p)].conj() * w[(i, q)];
                }
                if alpha == 0.0 || beta == 0.0 || gamma.norm() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let (c, s, e) = jacobi_rotation(alpha, beta, gamma);
                rotate_columns(&mut w, p, q, c, s, e);
                rotate_columns(&mut v, p, q, c, s, e);
            }
        }
        if !rotated {
            break;
        }
    }
    (w, v)
}

/// Phase that makes the first non-negligible entry of `col` real positive.
fn leading_phase(m: &ComplexMatrix, col: usize) -> Complex64 {
    let scale = (0..m.nrows()).map(|i| m[(i, col)].norm()).fold(0.0, f64::max);
    for i in 0..m.nrows() {
        let z = m[(i, col)];
        if z.norm() > PHASE_ZERO * scale {
            return z / z.norm();
        }
    }
    c64(1.0, 0.0)
}

fn svd_tall(a: &ComplexMatrix) -> Svd {
    let (rows, cols) = a.shape();
    let (w, v) = one_sided_jacobi(a);
    let norms: Vec<f64> = (0..cols).map(|j| w.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let rank = sigma.iter().filter(|&&s| s > 0.0).count();
    let mut u_thin = zeros(rows, rank);
    let mut v_sorted = zeros(cols, cols);
    for (dst, &src) in order.iter().enumerate() {
        v_sorted.set_column(dst, &v.column(src));
        if dst < rank {
            let col = w.column(src) / c64(norms[src], 0.0);
            u_thin.set_column(dst, &col);
        }
    }
    // Jacobi leaves columns orthogonal to working precision; re-complete from
    // the thin factor so that U is exactly square.
    let u = unitary_completion(&u_thin, rows).unwrap_or_else(|_| {
        let (q, _) = householder(&u_thin);
        let mut full = accumulate(&q, rows, rows);
        full.view_mut((0, 0), (rows, rank)).copy_from(&u_thin);
        full
    });
    Svd { u, sigma, v: v_sorted }
}

/// SVD by one-sided Jacobi. Singular vectors are phase-normalised so that
/// the first non-negligible entry of each left vector is real positive.
pub fn svd(c: &ComplexMatrix) -> Svd {
    let (rows, cols) = c.shape();
    let mut out = if rows >= cols {
        svd_tall(c)
    } else {
        let t = svd_tall(&c.adjoint());
        Svd { u: t.v, sigma: t.sigma, v: t.u }
    };
    let k = rows.min(cols);
    for j in 0..rows {
        let ph = leading_phase(&out.u, j).conj();
        for i in 0..rows {
            out.u[(i, j)] *= ph;
        }
        if j < k {
            for i in 0..cols {
                out.v[(i, j)] *= ph;
            }
        }
    }
    for j in k..cols {
        let ph = leading_phase(&out.v, j).conj();
        for i in 0..cols {
            out.v[(i, j)] *= ph;
        }
    }
    out
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi.
pub fn hermitian_eigen(s: &ComplexMatrix) -> Result<SpectralPair> {
    hermitian_eigen_tol(s, DEFAULT_TOL)
}

pub fn hermitian_eigen_tol(s: &ComplexMatrix, tol: f64) -> Result<SpectralPair> {
    if !s.is_square() {
        return Err(Error::DimensionMismatch(format!("eigen of {}x{}", s.nrows(), s.ncols())));
    }
    if !is_hermitian(s, tol) {
        return Err(Error::NotPositiveDefinite("input is not Hermitian".into()));
    }
    let n = s.nrows();
    let mut a = hermitize(s);
    let mut w = identity(n);
    let norm = frobenius(&a);
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * norm || norm == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.norm() == 0.0 {
                    continue;
                }
                let (c, sn, e) = jacobi_rotation(a[(p, p)].re, a[(q, q)].re, apq);
                rotate_columns(&mut a, p, q, c, sn, e);
                for j in 0..n {
                    let xp = a[(p, j)];
                    let xq = a[(q, j)];
                    a[(p, j)] = xp * c - xq * e * sn;
                    a[(q, j)] = xp * sn + xq * e * c;
                }
                a[(p, q)] = c64(0.0, 0.0);
                a[(q, p)] = c64(0.0, 0.0);
                a[(p, p)] = c64(a[(p, p)].re, 0.0);
                a[(q, q)] = c64(a[(q, q)].re, 0.0);
                rotate_columns(&mut w, p, q, c, sn, e);
            }
        }
    }
    let values: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| values[y].total_cmp(&values[x]));
    let mut vectors = zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let ph = leading_phase(&w, src).conj();
        for i in 0..n {
            vectors[(i, dst)] = w[(i, src)] * ph;
        }
    }
    Ok(SpectralPair { eigenvalues: order.iter().map(|&i| values[i]).collect(), eigenvectors: vectors })
}

/// Hermitian principal square root and its inverse.
pub fn hermitian_sqrt_inv(s: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    hermitian_sqrt_inv_tol(s, DEFAULT_TOL)
}

/// As [`hermitian_sqrt_inv`]; `tol` bounds both the Hermitian defect and the
/// smallest admissible eigenvalue relative to the largest.
pub fn hermitian_sqrt_inv_tol(s: &ComplexMatrix, tol: f64) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let n = s.nrows();
    if n == 0 {
        return Ok((zeros(0, 0), zeros(0, 0)));
    }
    let eig = hermitian_eigen_tol(s, tol)?;
    let max = eig.eigenvalues[0];
    let min = eig.eigenvalues[n - 1];
    if !(min > tol * max) || max <= 0.0 {
        return Err(Error::NotPositiveDefinite(format!("eigenvalue range [{min:.3e}, {max:.3e}]")));
    }
    let u = &eig.eigenvectors;
    let mut root = u.clone();
    let mut inv_root = u.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        root.column_mut(j).scale_mut(lam.sqrt());
        inv_root.column_mut(j).scale_mut(1.0 / lam.sqrt());
    }
    Ok((hermitize(&(root * u.adjoint())), hermitize(&(inv_root * u.adjoint()))))
}

/// Schur complement of the trailing block of `s2` after the first `split`
/// rows/columns: returns `(S22 - S23 S33^{-1} S32, S23 S33^{-1})`.
pub fn schur_complement(s2: &ComplexMatrix, split: usize) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let n = s2.nrows();
    if !s2.is_square() || split > n {
        return Err(Error::DimensionMismatch(format!("split {split} of a {}x{} matrix", n, s2.ncols())));
    }
    let s22 = super::block(s2, 0..split, 0..split);
    let s23 = super::block(s2, 0..split, split..n);
    let s33 = super::block(s2, split..n, split..n);
    let coupling = if n == split {
        zeros(split, 0)
    } else {
        // S23 S33^{-1} = (S33^{-1} S32)^H
        super::hpd_solve(&s33, &s23.adjoint())
            .map_err(|_| Error::NotPositiveDefinite("trailing block S33".into()))?
            .adjoint()
    };
    let complement = hermitize(&(&s22 - &coupling * s23.adjoint()));
    if split > 0 && nalgebra::Cholesky::new(complement.clone()).is_none() {
        return Err(Error::NotPositiveDefinite("Schur complement".into()));
    }
    Ok((complement, coupling))
}
