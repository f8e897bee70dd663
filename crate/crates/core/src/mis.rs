//! Maximal invariant statistic, induced parameter invariant, whitening and
//! the stochastic representation of the MIS distribution.

use rand::Rng;

use crate::error::{Error, Result};
use crate::invariance::{GroupElement, SufficientStatistic};
use crate::linalg::{
    self, block, frobenius, hermitian_sqrt_inv, quadratic_form, schur_complement, set_block, BlockPartition,
    ComplexMatrix,
};
use crate::model::Dataset;
use crate::rng::{complex_normal_matrix, seeded};

/// The MIS: a pair `(T_a, T_b)` when `J < N`, a single `T` when `J = N`.
#[derive(Debug, Clone, PartialEq)]
pub enum MisValue {
    Pair { t_a: ComplexMatrix, t_b: ComplexMatrix },
    Single { t: ComplexMatrix },
}

impl MisValue {
    /// `T_a`, or `T` in the single-matrix branch.
    pub fn t_a(&self) -> &ComplexMatrix {
        match self {
            MisValue::Pair { t_a, .. } => t_a,
            MisValue::Single { t } => t,
        }
    }

    pub fn t_b(&self) -> Option<&ComplexMatrix> {
        match self {
            MisValue::Pair { t_b, .. } => Some(t_b),
            MisValue::Single { .. } => None,
        }
    }

    /// Relative Frobenius distance between the two values, with the pair
    /// treated as one block-diagonal matrix. Different kinds compare as `inf`.
    pub fn relative_deviation(&self, other: &MisValue) -> f64 {
        let parts = |v: &MisValue| -> Vec<ComplexMatrix> {
            match v {
                MisValue::Pair { t_a, t_b } => vec![t_a.clone(), t_b.clone()],
                MisValue::Single { t } => vec![t.clone()],
            }
        };
        let (a, b) = (parts(self), parts(other));
        if a.len() != b.len() || a.iter().zip(&b).any(|(x, y)| x.shape() != y.shape()) {
            return f64::INFINITY;
        }
        let sq = |v: &[ComplexMatrix]| v.iter().map(|m| frobenius(m).powi(2)).sum::<f64>();
        let diff: f64 = a.iter().zip(&b).map(|(x, y)| frobenius(&(x - y)).powi(2)).sum();
        let scale = sq(&a).max(sq(&b));
        if scale == 0.0 {
            diff.sqrt()
        } else {
            (diff / scale).sqrt()
        }
    }
}

/// `T_p = B^H R_{2.3}^{-1} B`.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedInvariant {
    pub t_p: ComplexMatrix,
}

/// One draw of the one-to-one MIS transform `(T_1a, T_1b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MisSample {
    pub t_1a: ComplexMatrix,
    pub t_1b: ComplexMatrix,
}

/// A representation draw with its Wishart ingredients.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationDraw {
    pub sample: MisSample,
    /// `S_33`, distributed `CW_{N-J}(K-M, I)`.
    pub s33: ComplexMatrix,
    /// `S_{2.3}`, distributed `CW_r(K-M-(N-J), I)`.
    pub s23: ComplexMatrix,
}

/// Splits `Z` into `Z_c` (first `M` columns) and `S_c = Z_perp Z_perp^H`.
pub fn sufficient_statistic(d: &Dataset) -> Result<SufficientStatistic> {
    let p = d.partition;
    if p.km() < p.n() {
        return Err(Error::InsufficientSecondaryData(format!("K-M = {} < N = {}", p.km(), p.n())));
    }
    let z_c = block(&d.z, 0..p.n(), 0..p.m());
    let z_perp = block(&d.z, 0..p.n(), p.m()..p.k());
    let s_c = linalg::hermitize(&(&z_perp * z_perp.adjoint()));
    SufficientStatistic::new(z_c, s_c, p)
}

/// `Z_{2.3} = Z_2 - S_23 S_33^{-1} Z_3` and `S_{2.3}`.
fn conditioned_block(s: &SufficientStatistic) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let p = s.partition;
    let s2 = s.s(p.rows23(), p.rows23());
    let (s_23, coupling) = schur_complement(&s2, p.r())?;
    let z_23 = s.z(p.rows2()) - coupling * s.z(p.rows3());
    Ok((z_23, s_23))
}

pub fn compute_mis(s: &SufficientStatistic) -> Result<MisValue> {
    let p = s.partition;
    if p.is_full() {
        let t = quadratic_form(&s.z(p.rows2()), &s.s(p.rows2(), p.rows2()))?;
        return Ok(MisValue::Single { t });
    }
    let (z_23, s_23) = conditioned_block(s)?;
    let t_a = quadratic_form(&z_23, &s_23)?;
    let t_b = quadratic_form(&s.z(p.rows3()), &s.s(p.rows3(), p.rows3()))?;
    Ok(MisValue::Pair { t_a, t_b })
}

/// Induced invariant `B^H R_{2.3}^{-1} B` for canonical covariance `R`
/// (`N x N`) and signal coordinates `B` (`r x M`).
pub fn induced_invariant(b: &ComplexMatrix, r: &ComplexMatrix, partition: &BlockPartition) -> Result<InducedInvariant> {
    let p = partition;
    if b.shape() != (p.r(), p.m()) || r.shape() != (p.n(), p.n()) {
        return Err(Error::DimensionMismatch(format!(
            "B is {:?} and R is {:?} for partition {p}",
            b.shape(),
            r.shape()
        )));
    }
    let r2 = block(r, p.rows23(), p.rows23());
    let (r_23, _) = if p.is_full() {
        (r2.clone(), linalg::zeros(p.r(), 0))
    } else {
        schur_complement(&r2, p.r())?
    };
    Ok(InducedInvariant { t_p: quadratic_form(b, &r_23)? })
}

/// Whitening element built from the true canonical covariance `R`.
///
/// `G_22 = R_{2.3}^{-1/2}`, `G_23 = -R_{2.3}^{-1/2} R_23 R_33^{-1}`,
/// `G_33 = R_33^{-1/2}`, identity on the first `t` rows and `F = 0`.
pub fn whitening_transform(r: &ComplexMatrix, partition: &BlockPartition) -> Result<GroupElement> {
    let p = *partition;
    if r.shape() != (p.n(), p.n()) {
        return Err(Error::DimensionMismatch(format!("R is {:?} for partition {p}", r.shape())));
    }
    let r2 = block(r, p.rows23(), p.rows23());
    let mut g = linalg::identity(p.n());
    if p.is_full() {
        let (_, inv_half) = hermitian_sqrt_inv(&r2)?;
        set_block(&mut g, p.t(), p.t(), &inv_half);
    } else {
        let (r_23, coupling) = schur_complement(&r2, p.r())?;
        let (_, a) = hermitian_sqrt_inv(&r_23)?;
        let (_, b) = hermitian_sqrt_inv(&block(&r2, p.r()..p.r() + p.nj(), p.r()..p.r() + p.nj()))?;
        set_block(&mut g, p.t(), p.t(), &a);
        set_block(&mut g, p.t(), p.j(), &(-(&a * coupling)));
        set_block(&mut g, p.j(), p.j(), &b);
    }
    GroupElement::new(g, linalg::zeros(p.n(), p.m()), p)
}

/// `W = G G^H` with `G` a `dim x dof` matrix of iid `CN(0, 1)` entries.
pub fn sample_complex_wishart_with<R: Rng + ?Sized>(dim: usize, dof: usize, rng: &mut R) -> Result<ComplexMatrix> {
    if dof < dim {
        return Err(Error::InsufficientSecondaryData(format!("{dof} degrees of freedom for dimension {dim}")));
    }
    let g = complex_normal_matrix(dim, dof, rng);
    Ok(linalg::hermitize(&(&g * g.adjoint())))
}

pub fn sample_complex_wishart(dim: usize, dof: usize, seed: u64) -> Result<ComplexMatrix> {
    sample_complex_wishart_with(dim, dof, &mut seeded(seed))
}

/// `(I + T_b)^{-1/2}`, the Hermitian principal root.
///
/// Given `Z_3` and `S_33`, the columns of the whitened `Z_{2.3}` have
/// cross-covariance `(I + T_b)^T (x) I_r`; right-multiplying by this factor
/// makes them iid.
pub fn whitening_factor(t_b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let m = t_b.nrows();
    Ok(hermitian_sqrt_inv(&(linalg::identity(m) + t_b))?.1)
}

/// One-to-one map of the MIS onto `(T_1a, T_1b) = (K^H T_a K, T_b)` with
/// `K = (I + T_b)^{-1/2}`.
pub fn to_representation(mis: &MisValue) -> Result<MisSample> {
    match mis {
        MisValue::Pair { t_a, t_b } => {
            let k = whitening_factor(t_b)?;
            Ok(MisSample {
                t_1a: linalg::hermitize(&(k.adjoint() * t_a * &k)),
                t_1b: t_b.clone(),
            })
        }
        MisValue::Single { .. } => Err(Error::UnsupportedBranch("J = N has no ancillary part".into())),
    }
}

/// Draws `(T_1a, T_1b)` from the stochastic representation.
///
/// `b_whitened` is `R_{2.3}^{-1/2} B`; `None` (or zero) gives the `H0` law.
pub fn sample_mis_detailed<R: Rng + ?Sized>(
    partition: &BlockPartition,
    b_whitened: Option<&ComplexMatrix>,
    rng: &mut R,
) -> Result<RepresentationDraw> {
    let p = partition;
    if p.is_full() {
        return Err(Error::UnsupportedBranch("the representation sampler needs J < N".into()));
    }
    if let Some(b) = b_whitened {
        if b.shape() != (p.r(), p.m()) {
            return Err(Error::DimensionMismatch(format!("whitened B is {:?}, expected {}x{}", b.shape(), p.r(), p.m())));
        }
    }
    let s33 = sample_complex_wishart_with(p.nj(), p.km(), rng)?;
    let z3 = complex_normal_matrix(p.nj(), p.m(), rng);
    let t_1b = quadratic_form(&z3, &s33)?;
    let k = whitening_factor(&t_1b)?;
    let s23 = sample_complex_wishart_with(p.r(), p.km() - p.nj(), rng)?;
    let mut x = complex_normal_matrix(p.r(), p.m(), rng);
    if let Some(b) = b_whitened {
        x += b * &k;
    }
    let t_1a = quadratic_form(&x, &s23)?;
    Ok(RepresentationDraw { sample: MisSample { t_1a, t_1b }, s33, s23 })
}

pub fn sample_mis_with<R: Rng + ?Sized>(
    partition: &BlockPartition,
    b_whitened: Option<&ComplexMatrix>,
    rng: &mut R,
) -> Result<MisSample> {
    Ok(sample_mis_detailed(partition, b_whitened, rng)?.sample)
}

pub fn sample_mis(partition: &BlockPartition, b_whitened: Option<&ComplexMatrix>, seed: u64) -> Result<MisSample> {
    sample_mis_with(partition, b_whitened, &mut seeded(seed))
}

/// `R_{2.3}^{-1/2} B`, the signal seen by the representation sampler.
pub fn whiten_signal(b: &ComplexMatrix, r: &ComplexMatrix, partition: &BlockPartition) -> Result<ComplexMatrix> {
    let p = partition;
    let r2 = block(r, p.rows23(), p.rows23());
    let r_23 = if p.is_full() { r2 } else { schur_complement(&r2, p.r())?.0 };
    Ok(hermitian_sqrt_inv(&r_23)?.1 * b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariance::{apply_action, random_group_element};
    use crate::linalg::{c64, hpd_inverse, identity, rel_diff, trace_re, zeros};
    use crate::rng::seeded;
    use nalgebra::DMatrix;

    fn part(n: usize, k: usize, m: usize, t: usize, r: usize) -> BlockPartition {
        BlockPartition::from_dims(n, k, m, t, r).unwrap()
    }

    fn random_stat(p: BlockPartition, seed: u64) -> SufficientStatistic {
        let z = complex_normal_matrix(p.n(), p.k(), &mut seeded(seed));
        sufficient_statistic(&Dataset::new(z, p, None).unwrap()).unwrap()
    }

    fn random_pd(n: usize, seed: u64) -> ComplexMatrix {
        let a = complex_normal_matrix(n, n, &mut seeded(seed));
        linalg::hermitize(&(&a * a.adjoint() + identity(n)))
    }

    #[test]
    fn sufficient_statistic_of_stacked_identities() {
        let p = part(2, 4, 2, 0, 1);
        let mut z = zeros(2, 4);
        set_block(&mut z, 0, 0, &identity(2));
        set_block(&mut z, 0, 2, &identity(2));
        let s = sufficient_statistic(&Dataset::new(z, p, None).unwrap()).unwrap();
        assert_eq!(s.z_c, identity(2));
        assert_eq!(s.s_c, identity(2));
    }

    #[test]
    fn zero_data_is_rejected_downstream() {
        let p = part(4, 10, 1, 1, 1);
        let s = sufficient_statistic(&Dataset::new(zeros(4, 10), p, None).unwrap()).unwrap();
        assert_eq!(frobenius(&s.s_c), 0.0);
        assert!(matches!(compute_mis(&s), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn scatter_matches_projector_form() {
        // With C = [I_M 0] in canonical coordinates the orthogonal projector
        // onto the secondary columns is V_2 V_2^H = diag(0_M, I_{K-M}).
        let p = part(5, 13, 2, 1, 2);
        let z = complex_normal_matrix(5, 13, &mut seeded(2));
        let s = sufficient_statistic(&Dataset::new(z.clone(), p, None).unwrap()).unwrap();
        let v2 = block(&identity(13), 0..13, 2..13);
        let proj = &v2 * v2.adjoint();
        assert!(rel_diff(&s.s_c, &(&z * proj * z.adjoint())) < 1e-11);
    }

    #[test]
    fn decoupled_blocks() {
        let p = part(4, 10, 2, 1, 2);
        let mut rng = seeded(3);
        let mut z_c = complex_normal_matrix(4, 2, &mut rng);
        for j in 0..2 {
            z_c[(3, j)] = c64(0.0, 0.0);
        }
        let s = SufficientStatistic::new(z_c.clone(), identity(4), p).unwrap();
        match compute_mis(&s).unwrap() {
            MisValue::Pair { t_a, t_b } => {
                let z2 = block(&z_c, 1..3, 0..2);
                assert!(rel_diff(&t_a, &(z2.adjoint() * z2)) < 1e-14);
                assert_eq!(frobenius(&t_b), 0.0);
            }
            other => panic!("{other:?}"),
        }
        let zero = SufficientStatistic::new(zeros(4, 2), identity(4), p).unwrap();
        let mis = compute_mis(&zero).unwrap();
        assert_eq!(frobenius(mis.t_a()), 0.0);
        assert_eq!(frobenius(mis.t_b().unwrap()), 0.0);
    }

    /// Block-inverse route: `S_{2.3}^{-1}` is the (2,2) block of the inverse
    /// of the lower scatter, and `Z_{2.3}` follows from its (2,3) block.
    fn mis_via_block_inverse(s: &SufficientStatistic) -> (ComplexMatrix, ComplexMatrix) {
        let p = s.partition;
        let s2 = s.s(p.rows23(), p.rows23());
        let inv = hpd_inverse(&s2).unwrap();
        let (r, nj) = (p.r(), p.nj());
        let p22 = block(&inv, 0..r, 0..r);
        let p23 = block(&inv, 0..r, r..r + nj);
        // P22^{-1} P23 = -S23 S33^{-1}
        let z23 = s.z(p.rows2()) + linalg::inverse(&p22).unwrap() * p23 * s.z(p.rows3());
        let t_a = z23.adjoint() * &p22 * &z23;
        let s33 = s.s(p.rows3(), p.rows3());
        let t_b = s.z(p.rows3()).adjoint() * linalg::inverse(&s33).unwrap() * s.z(p.rows3());
        let det_ok = (linalg::determinant(&s2)
            - linalg::determinant(&s33) * linalg::determinant(&linalg::inverse(&p22).unwrap()))
        .norm()
            <= 1e-9 * linalg::determinant(&s2).norm();
        assert!(det_ok);
        (t_a, t_b)
    }

    #[test]
    fn mis_matches_block_inverse_route() {
        let p = part(5, 12, 2, 1, 2);
        for seed in 0..20 {
            let s = random_stat(p, seed);
            let (t_a, t_b) = mis_via_block_inverse(&s);
            let mis = compute_mis(&s).unwrap();
            assert!(rel_diff(mis.t_a(), &t_a) < 1e-10);
            assert!(rel_diff(mis.t_b().unwrap(), &t_b) < 1e-10);
        }
    }

    #[test]
    fn full_branch_is_single() {
        let p = part(3, 8, 2, 1, 2);
        let s = random_stat(p, 4);
        let mis = compute_mis(&s).unwrap();
        assert!(mis.t_b().is_none());
        let z2 = s.z(p.rows2());
        let want = z2.adjoint() * linalg::inverse(&s.s(p.rows2(), p.rows2())).unwrap() * z2;
        assert!(rel_diff(mis.t_a(), &want) < 1e-10);
    }

    #[test]
    fn mis_is_invariant_under_random_elements() {
        for p in [part(6, 16, 2, 1, 2), part(3, 12, 3, 1, 2), part(7, 28, 3, 0, 3)] {
            let s = random_stat(p, 8);
            let before = compute_mis(&s).unwrap();
            for seed in 0..10 {
                let g = random_group_element(p, seed);
                let after = compute_mis(&apply_action(&g, &s).unwrap()).unwrap();
                assert!(before.relative_deviation(&after) < 1e-8);
            }
        }
    }

    #[test]
    fn induced_invariant_cases() {
        let p = part(4, 10, 1, 0, 1);
        assert_eq!(frobenius(&induced_invariant(&zeros(1, 1), &identity(4), &p).unwrap().t_p), 0.0);
        let b = DMatrix::from_element(1, 1, c64(0.6, -0.8) * 3.0);
        let t_p = induced_invariant(&b, &identity(4), &p).unwrap().t_p;
        assert!((t_p[(0, 0)].re - 9.0).abs() < 1e-12);

        let p = part(6, 16, 3, 1, 2);
        let b = complex_normal_matrix(2, 3, &mut seeded(5));
        let t_p = induced_invariant(&b, &random_pd(6, 6), &p).unwrap().t_p;
        assert_eq!(linalg::numerical_rank(&t_p, 1e-8), 2);
    }

    #[test]
    fn whitening_examples() {
        let p = part(5, 12, 2, 1, 2);
        assert_eq!(whitening_transform(&identity(5), &p).unwrap(), GroupElement::identity(p));
        let r = block_diag_pd(5, 1, 2);
        let g = whitening_transform(&r, &p).unwrap();
        assert!(frobenius(&g.g_block(2, 3)) < 1e-15);

        let r = random_pd(5, 3);
        let g = whitening_transform(&r, &p).unwrap();
        let g3 = block(g.g(), p.rows23(), p.rows23());
        let r2 = block(&r, p.rows23(), p.rows23());
        assert!(rel_diff(&(&g3 * r2 * g3.adjoint()), &identity(4)) < 1e-10);
    }

    fn block_diag_pd(n: usize, t: usize, r: usize) -> ComplexMatrix {
        let upper = random_pd(t + r, 77);
        let lower = random_pd(n - t - r, 78);
        linalg::block_diag(&upper, &lower)
    }

    #[test]
    fn wishart_moments_and_determinism() {
        assert_eq!(sample_complex_wishart(3, 5, 1).unwrap(), sample_complex_wishart(3, 5, 1).unwrap());
        assert!(matches!(sample_complex_wishart(3, 2, 1), Err(Error::InsufficientSecondaryData(_))));
        let mut rng = seeded(12);
        let trials = 10_000;
        let mut scalar = 0.0;
        let mut mean = zeros(3, 3);
        for _ in 0..trials {
            scalar += sample_complex_wishart_with(1, 1, &mut rng).unwrap()[(0, 0)].re;
            mean += sample_complex_wishart_with(3, 6, &mut rng).unwrap();
        }
        assert!((scalar / trials as f64 - 1.0).abs() < 0.05);
        let mean = mean.unscale(trials as f64);
        assert!(rel_diff(&mean, &identity(3).scale(6.0)) < 0.05);
    }

    #[test]
    fn sampler_contract() {
        let full = part(3, 8, 1, 1, 2);
        assert!(matches!(sample_mis(&full, None, 1), Err(Error::UnsupportedBranch(_))));
        let p = part(4, 12, 2, 1, 1);
        let a = sample_mis(&p, None, 3).unwrap();
        assert_eq!(a, sample_mis(&p, None, 3).unwrap());
        let zero = zeros(1, 2);
        assert_eq!(a, sample_mis(&p, Some(&zero), 3).unwrap());
        assert!(linalg::is_hermitian(&a.t_1a, 1e-10) && linalg::is_hermitian(&a.t_1b, 1e-10));
        assert!(trace_re(&a.t_1a) >= 0.0);
    }

    #[test]
    fn representation_map_inverts_the_conditioning() {
        // Conditionally on (Z_3, S_33), the vectorised whitened Z_{2.3} has
        // covariance (I + T_b)^T (x) I; after the factor it is white.
        let mut rng = seeded(31);
        let z3 = complex_normal_matrix(3, 2, &mut rng);
        let s33 = sample_complex_wishart_with(3, 11, &mut rng).unwrap();
        let t_b = quadratic_form(&z3, &s33).unwrap();
        let k = whitening_factor(&t_b).unwrap();
        let coupling = hpd_inverse(&s33).unwrap() * &z3;
        let trials = 20_000;
        let mut cov = zeros(2, 2);
        for _ in 0..trials {
            // Given the secondary rows of block 3, S_23 S_33^{-1} Z_3 = w^H S_33^{-1} Z_3
            // with w ~ CN(0, S_33).
            let z2 = complex_normal_matrix(1, 2, &mut rng);
            let w = s33_factor(&s33) * complex_normal_matrix(3, 1, &mut rng);
            let x = (z2 - w.adjoint() * &coupling) * &k;
            cov += x.adjoint() * x;
        }
        let cov = cov.unscale(trials as f64);
        assert!(rel_diff(&cov, &identity(2)) < 0.03, "{cov}");
    }

    fn s33_factor(s33: &ComplexMatrix) -> ComplexMatrix {
        hermitian_sqrt_inv(s33).unwrap().0
    }
}
