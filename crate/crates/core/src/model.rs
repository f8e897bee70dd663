//! The raw double-subspace detection problem, its canonical form and
//! seeded data synthesis.
//!
//! Raw data follow `X = A_t B_t C + A_r B_r C + N0` with the columns of `N0`
//! iid `CN(0, R_star)`. The signal term is absent under `H0`. Rotating by
//! `U_alpha` on the left and `V_gamma` on the right yields `Z`, whose mean
//! lives in the first `J = t + r` rows and first `M` columns only.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    self, block, frobenius, hermitian_eigen, hermitian_sqrt_inv, qr_decompose, svd, unitary_completion,
    BlockPartition, ComplexMatrix,
};
use crate::rng::{complex_normal_matrix, seeded};

/// Relative smallest-singular-value threshold for the known subspaces.
pub const SUBSPACE_RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    H0,
    H1,
}

/// Dimensions and known subspaces of the detection problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    partition: BlockPartition,
    a_t: ComplexMatrix,
    a_r: ComplexMatrix,
    c: ComplexMatrix,
}

fn check_full_column_rank(a: &ComplexMatrix) -> Result<()> {
    if a.ncols() == 0 {
        return Ok(());
    }
    let sigma = svd(a).sigma;
    let top = sigma[0];
    let bottom = sigma.get(a.ncols() - 1).copied().unwrap_or(0.0);
    if top == 0.0 || bottom <= SUBSPACE_RANK_TOL * top {
        return Err(Error::RankDeficient { pivot: bottom, threshold: SUBSPACE_RANK_TOL * top });
    }
    Ok(())
}

impl ProblemSpec {
    /// `a_t` is `N x t` (possibly `t = 0`), `a_r` is `N x r`, `c` is `M x K`.
    pub fn new(a_t: ComplexMatrix, a_r: ComplexMatrix, c: ComplexMatrix) -> Result<Self> {
        let n = a_r.nrows();
        if a_t.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "interference subspace has {} rows, signal subspace {n}",
                a_t.nrows()
            )));
        }
        for (m, what) in [(&a_t, "interference subspace"), (&a_r, "signal subspace"), (&c, "right subspace")] {
            linalg::ensure_finite(m, what)?;
        }
        let partition = BlockPartition::from_dims(n, c.ncols(), c.nrows(), a_t.ncols(), a_r.ncols())?;
        let mut a = DMatrix::zeros(n, partition.j());
        linalg::set_block(&mut a, 0, 0, &a_t);
        linalg::set_block(&mut a, 0, partition.t(), &a_r);
        check_full_column_rank(&a)?;
        check_full_column_rank(&c.adjoint())?;
        Ok(Self { partition, a_t, a_r, c })
    }

    /// Spec already in canonical coordinates: `A = [E_t E_r]`, `C = [I_M 0]`.
    pub fn canonical(n: usize, k: usize, m: usize, t: usize, r: usize) -> Result<Self> {
        let p = BlockPartition::from_dims(n, k, m, t, r)?;
        let eye_n = linalg::identity(n);
        let a_t = block(&eye_n, 0..n, p.rows1());
        let a_r = block(&eye_n, 0..n, p.rows2());
        let c = block(&linalg::identity(k), 0..m, 0..k);
        Self::new(a_t, a_r, c)
    }

    /// Spec with iid `CN(0, 1)` subspace matrices.
    pub fn random(n: usize, k: usize, m: usize, t: usize, r: usize, seed: u64) -> Result<Self> {
        BlockPartition::from_dims(n, k, m, t, r)?;
        let mut rng = seeded(seed);
        let a_t = complex_normal_matrix(n, t, &mut rng);
        let a_r = complex_normal_matrix(n, r, &mut rng);
        let c = complex_normal_matrix(m, k, &mut rng);
        Self::new(a_t, a_r, c)
    }

    pub fn partition(&self) -> BlockPartition {
        self.partition
    }
    pub fn a_t(&self) -> &ComplexMatrix {
        &self.a_t
    }
    pub fn a_r(&self) -> &ComplexMatrix {
        &self.a_r
    }
    pub fn c(&self) -> &ComplexMatrix {
        &self.c
    }
    pub fn n(&self) -> usize {
        self.partition.n()
    }
    pub fn k(&self) -> usize {
        self.partition.k()
    }
    pub fn m(&self) -> usize {
        self.partition.m()
    }
}

/// Disturbance covariance and subspace coordinates of the raw model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueParams {
    pub r_star: ComplexMatrix,
    pub b_t: ComplexMatrix,
    pub b_r: ComplexMatrix,
}

impl TrueParams {
    /// Returns the label these parameters are consistent with.
    pub fn hypothesis(&self) -> Hypothesis {
        if frobenius(&self.b_r) > 0.0 {
            Hypothesis::H1
        } else {
            Hypothesis::H0
        }
    }

    /// Same nuisance parameters with signal coordinates `b_r`.
    pub fn with_signal(&self, b_r: ComplexMatrix) -> Self {
        Self { b_r, ..self.clone() }
    }

    pub fn validate(&self, partition: &BlockPartition) -> Result<()> {
        let (n, t, r, m) = (partition.n(), partition.t(), partition.r(), partition.m());
        if self.r_star.shape() != (n, n) || self.b_t.shape() != (t, m) || self.b_r.shape() != (r, m) {
            return Err(Error::DimensionMismatch(format!(
                "parameters R* {:?}, B_t {:?}, B_r {:?} do not fit partition {partition}",
                self.r_star.shape(),
                self.b_t.shape(),
                self.b_r.shape()
            )));
        }
        linalg::ensure_finite(&self.r_star, "disturbance covariance")?;
        linalg::ensure_finite(&self.b_t, "interference coordinates")?;
        linalg::ensure_finite(&self.b_r, "signal coordinates")?;
        if !linalg::is_hermitian(&self.r_star, linalg::DEFAULT_TOL) {
            return Err(Error::NotPositiveDefinite("disturbance covariance is not Hermitian".into()));
        }
        let eig = hermitian_eigen(&self.r_star)?;
        if eig.eigenvalues.last().copied().unwrap_or(1.0) <= 0.0 {
            return Err(Error::NotPositiveDefinite("disturbance covariance".into()));
        }
        Ok(())
    }
}

/// Rotation factors of the reduction to canonical form.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalModel {
    pub u_alpha: ComplexMatrix,
    pub v_gamma: ComplexMatrix,
    pub m_gamma: ComplexMatrix,
    pub r_alpha_t: ComplexMatrix,
    pub r_alpha_x: ComplexMatrix,
    pub r_alpha_r: ComplexMatrix,
    pub partition: BlockPartition,
}

/// Parameters expressed in canonical coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalParams {
    /// Rotated covariance `U_alpha^H R_star U_alpha`.
    pub r: ComplexMatrix,
    /// Mean of the first `t` rows of `Z_c`.
    pub b_t1: ComplexMatrix,
    /// Signal coordinates `R_alpha_r B_r M_gamma`.
    pub b: ComplexMatrix,
}

impl CanonicalModel {
    pub fn canonical_params(&self, params: &TrueParams) -> Result<CanonicalParams> {
        params.validate(&self.partition)?;
        let r = linalg::hermitize(&(self.u_alpha.adjoint() * &params.r_star * &self.u_alpha));
        let b_t1 = (&self.r_alpha_t * &params.b_t + &self.r_alpha_x * &params.b_r) * &self.m_gamma;
        let b = &self.r_alpha_r * &params.b_r * &self.m_gamma;
        Ok(CanonicalParams { r, b_t1, b })
    }

    /// Maps canonical signal coordinates `B` back to raw `B_r`.
    pub fn raw_signal(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        Ok(linalg::inverse(&self.r_alpha_r)? * b * linalg::inverse(&self.m_gamma)?)
    }
}

/// Canonical-form data matrix `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub z: ComplexMatrix,
    pub partition: BlockPartition,
    pub label: Option<Hypothesis>,
}

impl Dataset {
    pub fn new(z: ComplexMatrix, partition: BlockPartition, label: Option<Hypothesis>) -> Result<Self> {
        if z.shape() != (partition.n(), partition.k()) {
            return Err(Error::DimensionMismatch(format!(
                "data is {}x{}, partition {partition} needs {}x{}",
                z.nrows(),
                z.ncols(),
                partition.n(),
                partition.k()
            )));
        }
        linalg::ensure_finite(&z, "data matrix")?;
        Ok(Self { z, partition, label })
    }
}

pub fn canonicalize(spec: &ProblemSpec) -> Result<CanonicalModel> {
    let p = spec.partition;
    let (n, t, j, m) = (p.n(), p.t(), p.j(), p.m());
    let mut a = DMatrix::zeros(n, j);
    linalg::set_block(&mut a, 0, 0, &spec.a_t);
    linalg::set_block(&mut a, 0, t, &spec.a_r);
    let (q, r_alpha) = qr_decompose(&a)?;
    let u_alpha = unitary_completion(&q, n)?;
    let dec = svd(&spec.c);
    let lambda = linalg::diag_real(&dec.sigma[..m]);
    let m_gamma = &dec.u * lambda;
    Ok(CanonicalModel {
        u_alpha,
        v_gamma: dec.v,
        m_gamma,
        r_alpha_t: block(&r_alpha, 0..t, 0..t),
        r_alpha_x: block(&r_alpha, 0..t, t..j),
        r_alpha_r: block(&r_alpha, t..j, t..j),
        partition: p,
    })
}

/// Raw data `X` under `hypothesis`, drawn from `rng`.
pub fn sample_raw_with<R: Rng + ?Sized>(
    spec: &ProblemSpec,
    params: &TrueParams,
    hypothesis: Hypothesis,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    params.validate(&spec.partition)?;
    let actual = params.hypothesis();
    if actual != hypothesis {
        return Err(Error::LabelMismatch(format!(
            "parameters describe {actual:?} but {hypothesis:?} was requested"
        )));
    }
    let (root, _) = hermitian_sqrt_inv(&params.r_star)?;
    let noise = root * complex_normal_matrix(spec.n(), spec.k(), rng);
    let mean = (&spec.a_t * &params.b_t + &spec.a_r * &params.b_r) * &spec.c;
    Ok(mean + noise)
}

/// Raw data `X` under `hypothesis`; deterministic in `seed`.
pub fn sample_raw(spec: &ProblemSpec, params: &TrueParams, hypothesis: Hypothesis, seed: u64) -> Result<ComplexMatrix> {
    sample_raw_with(spec, params, hypothesis, &mut seeded(seed))
}

/// `Z = U_alpha^H X V_gamma`.
pub fn to_canonical(x: &ComplexMatrix, cm: &CanonicalModel) -> Result<Dataset> {
    let p = cm.partition;
    if x.shape() != (p.n(), p.k()) {
        return Err(Error::DimensionMismatch(format!(
            "data is {}x{}, model expects {}x{}",
            x.nrows(),
            x.ncols(),
            p.n(),
            p.k()
        )));
    }
    Dataset::new(cm.u_alpha.adjoint() * x * &cm.v_gamma, p, None)
}

/// Nuisance parameters for CFAR sweeps: `R_star = scale (W W^H / N + I)`,
/// Gaussian `B_t`, zero `B_r`.
pub fn random_nuisance_with<R: Rng + ?Sized>(partition: &BlockPartition, scale: f64, rng: &mut R) -> Result<TrueParams> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::DimensionMismatch(format!("covariance scale must be positive, got {scale}")));
    }
    let n = partition.n();
    let w = complex_normal_matrix(n, n, rng);
    let r_star = linalg::hermitize(&((&w * w.adjoint()).unscale(n as f64) + linalg::identity(n))).scale(scale);
    let b_t = complex_normal_matrix(partition.t(), partition.m(), rng);
    let b_r = linalg::zeros(partition.r(), partition.m());
    Ok(TrueParams { r_star, b_t, b_r })
}

pub fn random_nuisance(partition: &BlockPartition, scale: f64, seed: u64) -> Result<TrueParams> {
    random_nuisance_with(partition, scale, &mut seeded(seed))
}
