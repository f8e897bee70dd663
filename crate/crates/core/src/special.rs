//! Closed forms of the MIS for the classical sub-models, and the eigenvalue
//! statistics that appear when the group is enlarged by right unitary
//! multiplication.
//!
//! Every function states its partition explicitly and rejects any other with
//! [`Error::UnsupportedBranch`].

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::invariance::SufficientStatistic;
use crate::linalg::{
    self, block, hermitian_eigen, hermitian_sqrt_inv, hpd_solve, quadratic_form, rank_one_update_eigs,
    BlockPartition, ComplexMatrix,
};
use crate::mis::{compute_mis, MisValue};

/// Eigenvalues below this fraction of the trace are reported as zero.
pub const ZERO_EIG_TOL: f64 = 1e-10;
/// A matrix counts as rank one when its second eigenvalue is at most this
/// fraction of the trace.
pub const RANK_ONE_TOL: f64 = 1e-8;

fn require(cond: bool, case: &str, p: &BlockPartition) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::UnsupportedBranch(format!("{case} does not apply to partition {p}")))
    }
}

fn scalar(m: &ComplexMatrix) -> f64 {
    m[(0, 0)].re
}

/// Point-like target, no interference: `t = 0`, `r = 1`, `M = 1`, `J < N`.
///
/// `t_a = |z_2 - s_23 S_33^{-1} z_3|^2 / (s_22 - s_23 S_33^{-1} s_32)`,
/// `t_b = z_3^H S_33^{-1} z_3`.
pub fn mis_pointlike(s: &SufficientStatistic) -> Result<(f64, f64)> {
    let p = s.partition;
    require(p.t() == 0 && p.r() == 1 && p.m() == 1 && !p.is_full(), "point-like detection", &p)?;
    let z2 = s.z(p.rows2())[(0, 0)];
    let z3 = s.z(p.rows3());
    let s22 = s.s_c[(p.t(), p.t())].re;
    let s23 = s.s(p.rows2(), p.rows3());
    let s33 = s.s(p.rows3(), p.rows3());
    let w = hpd_solve(&s33, &s23.adjoint())?;
    let num = z2 - (w.adjoint() * &z3)[(0, 0)];
    let den = s22 - (&s23 * &w)[(0, 0)].re;
    if !(den > 0.0) {
        return Err(Error::NotPositiveDefinite("conditional scatter is not positive".into()));
    }
    Ok((num.norm_sqr() / den, scalar(&quadratic_form(&z3, &s33)?)))
}

/// Vector subspace detection: `t = 0`, `M = 1`, `J = r < N`.
pub fn mis_vector_subspace(s: &SufficientStatistic) -> Result<(f64, f64)> {
    let p = s.partition;
    require(p.t() == 0 && p.m() == 1 && !p.is_full(), "vector subspace detection", &p)?;
    lower_pair_scalar(s)
}

/// Vector subspace detection with interference: `M = 1`, `t >= 1`, `J < N`.
/// The interference rows of `z_c` and `S_c` are discarded.
pub fn mis_subspace_interference(s: &SufficientStatistic) -> Result<(f64, f64)> {
    let p = s.partition;
    require(p.m() == 1 && p.t() >= 1 && !p.is_full(), "subspace detection with interference", &p)?;
    lower_pair_scalar(s)
}

fn lower_pair_scalar(s: &SufficientStatistic) -> Result<(f64, f64)> {
    let (t_a, t_b) = lower_pair(s)?;
    Ok((scalar(&t_a), scalar(&t_b)))
}

/// `(Z_{2.3}^H S_{2.3}^{-1} Z_{2.3}, Z_3^H S_33^{-1} Z_3)` from the lower rows only.
fn lower_pair(s: &SufficientStatistic) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let p = s.partition;
    let z2 = s.z(p.rows2());
    let z3 = s.z(p.rows3());
    let s22 = s.s(p.rows2(), p.rows2());
    let s23 = s.s(p.rows2(), p.rows3());
    let s33 = s.s(p.rows3(), p.rows3());
    let w = hpd_solve(&s33, &s23.adjoint())?;
    let z_23 = &z2 - w.adjoint() * &z3;
    let s_23 = linalg::hermitize(&(&s22 - &s23 * &w));
    Ok((quadratic_form(&z_23, &s_23)?, quadratic_form(&z3, &s33)?))
}

/// Multidimensional signals: `t = 0`, `J = r = N`; `T = Z_2^H S_22^{-1} Z_2`.
pub fn mis_multidim(s: &SufficientStatistic) -> Result<MisValue> {
    let p = s.partition;
    require(p.t() == 0 && p.is_full(), "multidimensional signals", &p)?;
    let t = quadratic_form(&s.z(p.rows2()), &s.s(p.rows2(), p.rows2()))?;
    Ok(MisValue::Single { t })
}

/// Descending eigenvalues of a Hermitian matrix, the top `count` kept and
/// values below [`ZERO_EIG_TOL`] times the trace set to zero.
fn top_eigs(m: &ComplexMatrix, count: usize) -> Result<Vec<f64>> {
    if m.nrows() == 0 {
        return Ok(vec![0.0; count]);
    }
    let eig = hermitian_eigen(m)?.eigenvalues;
    let floor = ZERO_EIG_TOL * linalg::trace_re(m).abs();
    Ok(eig.into_iter().take(count).map(|x| if x.abs() <= floor { 0.0 } else { x }).collect())
}

/// Eigenvalues of `T = Z_m^H Z_m` and `T_c = Z_m Z_m^H` with
/// `Z_m = S_22^{-1/2} Z_2`, both truncated to `min(M, N)` entries.
pub fn eig_link_multidim(s: &SufficientStatistic) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = s.partition;
    require(p.t() == 0 && p.is_full(), "multidimensional signals", &p)?;
    let (_, inv_half) = hermitian_sqrt_inv(&s.s(p.rows2(), p.rows2()))?;
    let z_m = inv_half * s.z(p.rows2());
    let count = p.m().min(p.n());
    let t = linalg::hermitize(&(z_m.adjoint() * &z_m));
    let t_c = linalg::hermitize(&(&z_m * z_m.adjoint()));
    Ok((top_eigs(&t, count)?, top_eigs(&t_c, count)?))
}

/// Range-spread target: `t = 0`, `r = 1`, `J = 1 < N`, any `M`.
///
/// `T_a = z_{2.3}^H z_{2.3} / s_{2.3}` is rank one; `T_b = Z_3^H S_33^{-1} Z_3`.
pub fn mis_range_spread(s: &SufficientStatistic) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let p = s.partition;
    require(p.t() == 0 && p.r() == 1 && !p.is_full(), "range-spread detection", &p)?;
    let z2 = s.z(p.rows2());
    let z3 = s.z(p.rows3());
    let s23 = s.s(p.rows2(), p.rows3());
    let s33 = s.s(p.rows3(), p.rows3());
    let w = hpd_solve(&s33, &s23.adjoint())?;
    let z_23 = &z2 - w.adjoint() * &z3;
    let s_23 = s.s_c[(0, 0)].re - (&s23 * &w)[(0, 0)].re;
    if !(s_23 > 0.0) {
        return Err(Error::NotPositiveDefinite("conditional scatter is not positive".into()));
    }
    let t_a = linalg::hermitize(&(z_23.adjoint() * &z_23)).unscale(s_23);
    Ok((t_a, quadratic_form(&z3, &s33)?))
}

/// Generating vector `a` of a rank-one Hermitian `T_a = a a^H`.
pub fn rank_one_factor(t_a: &ComplexMatrix) -> Result<Vec<Complex64>> {
    let m = t_a.nrows();
    let eig = hermitian_eigen(t_a)?;
    let trace = linalg::trace_re(t_a).abs();
    let second = eig.eigenvalues.get(1).copied().unwrap_or(0.0);
    if trace > 0.0 && second.abs() > RANK_ONE_TOL * trace {
        return Err(Error::NotRankOne { ratio: second / trace });
    }
    let lead = eig.eigenvalues.first().copied().unwrap_or(0.0).max(0.0).sqrt();
    Ok((0..m).map(|i| eig.eigenvectors[(i, 0)] * lead).collect())
}

/// `(eig(T_b), eig(T_a + T_b))`, both descending, for rank-one `T_a`.
pub fn composite_eig_statistic(t_a: &ComplexMatrix, t_b: &ComplexMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    if t_a.shape() != t_b.shape() || !t_a.is_square() {
        return Err(Error::DimensionMismatch(format!("T_a is {:?}, T_b is {:?}", t_a.shape(), t_b.shape())));
    }
    rank_one_factor(t_a)?;
    let eig_b = hermitian_eigen(t_b)?.eigenvalues;
    let eig_sum = hermitian_eigen(&linalg::hermitize(&(t_a + t_b)))?.eigenvalues;
    Ok((eig_b, eig_sum))
}

/// `eig(T_a + T_b)` through the secular equation in the eigenbasis of `T_b`,
/// with `k = U_b^H a`. Returns the spectrum and `k`.
pub fn composite_eig_secular(t_a: &ComplexMatrix, t_b: &ComplexMatrix) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let a = rank_one_factor(t_a)?;
    let eig_b = hermitian_eigen(t_b)?;
    let av = ComplexMatrix::from_column_slice(a.len(), 1, &a);
    let k_mat = eig_b.eigenvectors.adjoint() * av;
    let k: Vec<Complex64> = k_mat.iter().copied().collect();
    Ok((rank_one_update_eigs(&eig_b.eigenvalues, &k)?, k))
}

/// Standard GMANOVA: `t = 0`, `J = r < N`.
pub fn mis_gmanova(s: &SufficientStatistic) -> Result<MisValue> {
    let p = s.partition;
    require(p.t() == 0 && !p.is_full(), "GMANOVA", &p)?;
    let (t_a, t_b) = lower_pair(s)?;
    Ok(MisValue::Pair { t_a, t_b })
}

/// Point-like SINR `|b|^2 / r_{2.3}` for a canonical covariance `R`.
pub fn pointlike_sinr(b: Complex64, r: &ComplexMatrix, partition: &BlockPartition) -> Result<f64> {
    let p = partition;
    require(p.r() == 1 && p.m() == 1, "point-like SINR", p)?;
    let r2 = block(r, p.rows23(), p.rows23());
    let r_23 = if p.is_full() { r2 } else { linalg::schur_complement(&r2, 1)?.0 };
    Ok(b.norm_sqr() / r_23[(0, 0)].re)
}

/// Range-spread SINR `||b||^2 a^H R^{-1} a`, with `a = e_1` in canonical
/// coordinates (`t = 0`, `r = 1`).
pub fn range_spread_sinr(b: &ComplexMatrix, r: &ComplexMatrix, partition: &BlockPartition) -> Result<f64> {
    let p = partition;
    require(p.t() == 0 && p.r() == 1, "range-spread SINR", p)?;
    let inv = linalg::hpd_inverse(r)?;
    Ok(linalg::frobenius(b).powi(2) * inv[(0, 0)].re)
}

/// The general MIS on the same statistic, for cross-checks.
pub fn general(s: &SufficientStatistic) -> Result<MisValue> {
    compute_mis(s)
}
