//! The block-triangular transformation group acting on the sufficient
//! statistic, and the constructive side of maximality: given two statistics
//! with the same MIS, build a group element carrying one onto the other.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    self, block, frobenius, hermitian_sqrt_inv, hpd_inverse, set_block, svd, BlockPartition, ComplexMatrix,
};
use crate::mis::compute_mis;
use crate::rng::{complex_normal_matrix, seeded};

/// Relative MIS agreement required before reconstruction is attempted.
pub const EQUIVALENCE_TOL: f64 = 1e-8;

/// Diagonal blocks whose smallest singular value falls below this fraction of
/// the largest are treated as singular.
const BLOCK_COND_TOL: f64 = 1e-12;

/// Block row ranges `(t, r, N - J)` of a length-`N` index set.
fn segments(p: &BlockPartition) -> [std::ops::Range<usize>; 3] {
    [p.rows1(), p.rows2(), p.rows3()]
}

/// Element `(G, F)` of the group.
///
/// `G` is block upper triangular over the `(t, r, N - J)` row split with
/// invertible diagonal blocks; only the first `t` rows of `F` may be nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    g: ComplexMatrix,
    f: ComplexMatrix,
    partition: BlockPartition,
}

impl GroupElement {
    /// Validates structure: exact zeros below the block diagonal and in rows
    /// `t..N` of `F`, invertible diagonal blocks.
    pub fn new(g: ComplexMatrix, f: ComplexMatrix, partition: BlockPartition) -> Result<Self> {
        let n = partition.n();
        if g.shape() != (n, n) || f.shape() != (n, partition.m()) {
            return Err(Error::DimensionMismatch(format!(
                "G is {:?} and F is {:?}, partition {partition} needs ({n}, {n}) and ({n}, {})",
                g.shape(),
                f.shape(),
                partition.m()
            )));
        }
        linalg::ensure_finite(&g, "group matrix G")?;
        linalg::ensure_finite(&f, "group shift F")?;
        let residual = structural_residual(&g, &f, &partition);
        if residual > 0.0 {
            return Err(Error::NotInGroup(format!("structural zero blocks hold entries up to {residual:.3e}")));
        }
        for seg in segments(&partition) {
            check_invertible(&block(&g, seg.clone(), seg))?;
        }
        Ok(Self { g, f, partition })
    }

    /// Like [`GroupElement::new`] but first clears structural entries up to
    /// `tol` times the norm of `G`; larger violations are still rejected.
    pub fn new_projected(mut g: ComplexMatrix, mut f: ComplexMatrix, partition: BlockPartition, tol: f64) -> Result<Self> {
        if g.shape() == (partition.n(), partition.n()) && f.nrows() == partition.n() {
            let limit = tol * frobenius(&g).max(f64::MIN_POSITIVE);
            let residual = structural_residual(&g, &f, &partition);
            if residual <= limit {
                clear_structural(&mut g, &mut f, &partition);
            }
        }
        Self::new(g, f, partition)
    }

    pub fn identity(partition: BlockPartition) -> Self {
        Self {
            g: linalg::identity(partition.n()),
            f: linalg::zeros(partition.n(), partition.m()),
            partition,
        }
    }

    pub fn g(&self) -> &ComplexMatrix {
        &self.g
    }
    pub fn f(&self) -> &ComplexMatrix {
        &self.f
    }
    pub fn partition(&self) -> BlockPartition {
        self.partition
    }

    /// Block `(i, j)` of `G` with `i, j` in `1..=3`.
    pub fn g_block(&self, i: usize, j: usize) -> ComplexMatrix {
        let seg = segments(&self.partition);
        block(&self.g, seg[i - 1].clone(), seg[j - 1].clone())
    }

    /// The `t x M` nonzero part of `F`.
    pub fn f1(&self) -> ComplexMatrix {
        block(&self.f, self.partition.rows1(), 0..self.partition.m())
    }

    /// Largest magnitude found in a structural zero position.
    pub fn structural_residual(&self) -> f64 {
        structural_residual(&self.g, &self.f, &self.partition)
    }
}

fn structural_residual(g: &ComplexMatrix, f: &ComplexMatrix, p: &BlockPartition) -> f64 {
    let seg = segments(p);
    let mut worst: f64 = 0.0;
    for (bi, rows) in seg.iter().enumerate() {
        for cols in seg.iter().take(bi) {
            for i in rows.clone() {
                for j in cols.clone() {
                    worst = worst.max(g[(i, j)].norm());
                }
            }
        }
    }
    for i in p.t()..f.nrows() {
        for j in 0..f.ncols() {
            worst = worst.max(f[(i, j)].norm());
        }
    }
    worst
}

fn clear_structural(g: &mut ComplexMatrix, f: &mut ComplexMatrix, p: &BlockPartition) {
    let seg = segments(p);
    for (bi, rows) in seg.iter().enumerate() {
        for cols in seg.iter().take(bi) {
            for i in rows.clone() {
                for j in cols.clone() {
                    g[(i, j)] = Default::default();
                }
            }
        }
    }
    for i in p.t()..f.nrows() {
        for j in 0..f.ncols() {
            f[(i, j)] = Default::default();
        }
    }
}

fn check_invertible(d: &ComplexMatrix) -> Result<()> {
    if d.nrows() == 0 {
        return Ok(());
    }
    let sigma = svd(d).sigma;
    let (top, bottom) = (sigma[0], sigma[sigma.len() - 1]);
    if !(bottom > BLOCK_COND_TOL * top) {
        return Err(Error::IllConditioned(format!(
            "diagonal block has singular values in [{bottom:.3e}, {top:.3e}]"
        )));
    }
    Ok(())
}

fn check_same(a: &BlockPartition, b: &BlockPartition) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!("partitions {a} and {b} differ")));
    }
    Ok(())
}

/// Sufficient statistic `(Z_c, S_c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStatistic {
    pub z_c: ComplexMatrix,
    pub s_c: ComplexMatrix,
    pub partition: BlockPartition,
}

impl SufficientStatistic {
    /// Checks shapes, finiteness and that `S_c` is Hermitian; the scatter is
    /// returned exactly Hermitian.
    pub fn new(z_c: ComplexMatrix, s_c: ComplexMatrix, partition: BlockPartition) -> Result<Self> {
        let n = partition.n();
        if z_c.shape() != (n, partition.m()) || s_c.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "Z_c is {:?} and S_c is {:?} for partition {partition}",
                z_c.shape(),
                s_c.shape()
            )));
        }
        linalg::ensure_finite(&z_c, "primary statistic")?;
        linalg::ensure_finite(&s_c, "scatter matrix")?;
        if frobenius(&s_c) > 0.0 && !linalg::is_hermitian(&s_c, linalg::DEFAULT_TOL) {
            return Err(Error::NotPositiveDefinite("scatter matrix is not Hermitian".into()));
        }
        Ok(Self { z_c, s_c: linalg::hermitize(&s_c), partition })
    }

    /// Rows `rows` of `Z_c`.
    pub fn z(&self, rows: std::ops::Range<usize>) -> ComplexMatrix {
        block(&self.z_c, rows, 0..self.partition.m())
    }

    /// Block `S[rows, cols]` of the scatter.
    pub fn s(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> ComplexMatrix {
        block(&self.s_c, rows, cols)
    }
}

/// `b . a`: apply `a` first, then `b`.
pub fn compose(a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
    check_same(&a.partition, &b.partition)?;
    Ok(GroupElement {
        g: &b.g * &a.g,
        f: &b.g * &a.f + &b.f,
        partition: a.partition,
    })
}

pub fn identity(partition: BlockPartition) -> GroupElement {
    GroupElement::identity(partition)
}

/// `(G^{-1}, -G^{-1} F)`, with `G^{-1}` formed block by block so the
/// structural zeros stay exact.
pub fn inverse(g: &GroupElement) -> Result<GroupElement> {
    let p = g.partition;
    let seg = segments(&p);
    let n = p.n();
    let mut h = linalg::zeros(n, n);
    let inv_diag: Vec<ComplexMatrix> = (0..3)
        .map(|i| {
            let d = block(&g.g, seg[i].clone(), seg[i].clone());
            check_invertible(&d)?;
            linalg::inverse(&d)
        })
        .collect::<Result<_>>()?;
    // Back substitution over block columns: H_ij = -G_ii^{-1} sum_{i<k<=j} G_ik H_kj.
    for j in 0..3 {
        set_block(&mut h, seg[j].start, seg[j].start, &inv_diag[j]);
        for i in (0..j).rev() {
            let mut acc = linalg::zeros(seg[i].len(), seg[j].len());
            for k in i + 1..=j {
                acc += block(&g.g, seg[i].clone(), seg[k].clone()) * block(&h, seg[k].clone(), seg[j].clone());
            }
            set_block(&mut h, seg[i].start, seg[j].start, &(-(&inv_diag[i] * acc)));
        }
    }
    let f = -(&h * &g.f);
    let mut out = GroupElement { g: h, f, partition: p };
    clear_structural(&mut out.g, &mut out.f, &p);
    Ok(out)
}

/// `(G Z_c + F, G S_c G^H)`.
pub fn apply_action(g: &GroupElement, s: &SufficientStatistic) -> Result<SufficientStatistic> {
    check_same(&g.partition, &s.partition)?;
    Ok(SufficientStatistic {
        z_c: &g.g * &s.z_c + &g.f,
        s_c: linalg::hermitize(&(&g.g * &s.s_c * g.g.adjoint())),
        partition: s.partition,
    })
}

/// Diagonal block `CN / sqrt(dim) + 2 I`, redrawn until its smallest singular
/// value is at least `0.5`.
fn conditioned_block<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    loop {
        let d = complex_normal_matrix(dim, dim, rng).unscale((dim.max(1) as f64).sqrt())
            + linalg::identity(dim).scale(2.0);
        if dim == 0 || *svd(&d).sigma.last().unwrap() >= 0.5 {
            return d;
        }
    }
}

pub fn random_group_element_with<R: Rng + ?Sized>(partition: BlockPartition, rng: &mut R) -> GroupElement {
    let seg = segments(&partition);
    let n = partition.n();
    let mut g = linalg::zeros(n, n);
    for (i, rows) in seg.iter().enumerate() {
        set_block(&mut g, rows.start, rows.start, &conditioned_block(rows.len(), rng));
        for cols in seg.iter().skip(i + 1) {
            set_block(&mut g, rows.start, cols.start, &complex_normal_matrix(rows.len(), cols.len(), rng));
        }
    }
    let mut f = linalg::zeros(n, partition.m());
    set_block(&mut f, 0, 0, &complex_normal_matrix(partition.t(), partition.m(), rng));
    GroupElement { g, f, partition }
}

pub fn random_group_element(partition: BlockPartition, seed: u64) -> GroupElement {
    random_group_element_with(partition, &mut seeded(seed))
}

/// Unitary `U` with `a U = b`, given `a a^H = b b^H`.
///
/// Left singular vectors of `a` and `b` agree up to per-column phasors `d_i`
/// on the support; `U = V_a conj(D) V_b^H` then carries `a` onto `b`.
fn align(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let p = a.ncols();
    let sa = svd(a);
    let sb = svd(b);
    let top = sa.sigma.first().copied().unwrap_or(0.0).max(sb.sigma.first().copied().unwrap_or(0.0));
    let mut phase = vec![num_complex::Complex64::new(1.0, 0.0); p];
    for i in 0..sa.sigma.len().min(p) {
        if sa.sigma[i] <= 1e-10 * top {
            continue;
        }
        let overlap = (sb.u.column(i).adjoint() * sa.u.column(i))[(0, 0)];
        if (overlap.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::IllConditioned(format!(
                "singular direction {i} is not uniquely defined (overlap {:.3e})",
                overlap.norm()
            )));
        }
        phase[i] = overlap / overlap.norm();
    }
    let mut u = sa.v.clone();
    for (j, d) in phase.iter().enumerate() {
        let c = d.conj();
        for i in 0..p {
            u[(i, j)] *= c;
        }
    }
    let u = u * sb.v.adjoint();
    let residual = frobenius(&(a * &u - b));
    if residual > 1e-6 * frobenius(b).max(frobenius(a)).max(f64::MIN_POSITIVE) {
        return Err(Error::IllConditioned(format!("alignment residual {residual:.3e}")));
    }
    Ok(u)
}

/// Whitening factors of the lower `(N - t)` block of a scatter.
struct LowerFactor {
    /// `L^H = [[S_{2.3}^{1/2}, S_23 S_33^{-1/2}], [0, S_33^{1/2}]]`
    l_adj: ComplexMatrix,
    /// `(L^H)^{-1}`
    l_adj_inv: ComplexMatrix,
}

fn lower_factor(s: &SufficientStatistic) -> Result<LowerFactor> {
    let p = s.partition;
    let (r, nj) = (p.r(), p.nj());
    let s2 = s.s(p.rows23(), p.rows23());
    let (s_23, coupling) = if nj == 0 {
        (s2.clone(), linalg::zeros(r, 0))
    } else {
        linalg::schur_complement(&s2, r)?
    };
    let s33 = block(&s2, r..r + nj, r..r + nj);
    let (a_half, a_half_inv) = hermitian_sqrt_inv(&s_23)?;
    let (b_half, b_half_inv) = if nj == 0 {
        (linalg::zeros(0, 0), linalg::zeros(0, 0))
    } else {
        hermitian_sqrt_inv(&s33)?
    };
    let mut l_adj = linalg::zeros(r + nj, r + nj);
    set_block(&mut l_adj, 0, 0, &a_half);
    set_block(&mut l_adj, 0, r, &(&coupling * &b_half));
    set_block(&mut l_adj, r, r, &b_half);
    let mut l_adj_inv = linalg::zeros(r + nj, r + nj);
    set_block(&mut l_adj_inv, 0, 0, &a_half_inv);
    set_block(&mut l_adj_inv, 0, r, &(-(&a_half_inv * &coupling)));
    set_block(&mut l_adj_inv, r, r, &b_half_inv);
    Ok(LowerFactor { l_adj, l_adj_inv })
}

/// Group element `g` with `apply_action(g, source) = target`.
///
/// Fails with [`Error::NotEquivalent`] when the two MIS values differ by more
/// than [`EQUIVALENCE_TOL`] (relative).
pub fn reconstruct_transformation(target: &SufficientStatistic, source: &SufficientStatistic) -> Result<GroupElement> {
    check_same(&target.partition, &source.partition)?;
    let p = target.partition;
    let deviation = compute_mis(target)?.relative_deviation(&compute_mis(source)?);
    if deviation > EQUIVALENCE_TOL {
        return Err(Error::NotEquivalent { deviation });
    }
    let (t, r, nj, n) = (p.t(), p.r(), p.nj(), p.n());

    // Lower block: whiten both sides, align the whitened data, un-whiten.
    let lf = lower_factor(target)?;
    let lf_bar = lower_factor(source)?;
    let y = &lf.l_adj_inv * target.z(p.rows23());
    let y_bar = &lf_bar.l_adj_inv * source.z(p.rows23());
    let mut u1 = linalg::zeros(r + nj, r + nj);
    for rows in [0..r, r..r + nj] {
        if rows.is_empty() {
            continue;
        }
        // Row form: y = U^H y_bar, i.e. y_bar^H U = y^H.
        let u = align(&block(&y_bar, rows.clone(), 0..p.m()).adjoint(), &block(&y, rows.clone(), 0..p.m()).adjoint())?;
        set_block(&mut u1, rows.start, rows.start, &u.adjoint());
    }
    let mut g3 = &lf.l_adj * u1 * &lf_bar.l_adj_inv;
    let mut g = linalg::zeros(n, n);
    // Exact zero below the (2, 2) block.
    for i in r..r + nj {
        for j in 0..r {
            g3[(i, j)] = Default::default();
        }
    }
    set_block(&mut g, t, t, &g3);

    let mut f = linalg::zeros(n, p.m());
    if t > 0 {
        let rows_l = p.rows23();
        let s1 = target.s(p.rows1(), p.rows1());
        let s3 = target.s(p.rows1(), rows_l.clone());
        let s2 = target.s(rows_l.clone(), rows_l.clone());
        let s1_bar = source.s(p.rows1(), p.rows1());
        let s3_bar = source.s(p.rows1(), rows_l.clone());
        let s2_bar = source.s(rows_l.clone(), rows_l.clone());
        let s2_inv = hpd_inverse(&s2)?;
        let s2_bar_inv = hpd_inverse(&s2_bar)?;
        let schur = linalg::hermitize(&(&s1 - &s3 * &s2_inv * s3.adjoint()));
        let schur_bar = linalg::hermitize(&(&s1_bar - &s3_bar * &s2_bar_inv * s3_bar.adjoint()));
        let (root, _) = hermitian_sqrt_inv(&schur)?;
        let (_, root_bar_inv) = hermitian_sqrt_inv(&schur_bar)?;
        let g1 = root * root_bar_inv;
        let g3_inv_adj = linalg::inverse(&g3)?.adjoint();
        let g2 = (&s3 * g3_inv_adj - &g1 * &s3_bar) * s2_bar_inv;
        let f1 = target.z(p.rows1()) - &g1 * source.z(p.rows1()) - &g2 * source.z(rows_l);
        set_block(&mut g, 0, 0, &g1);
        set_block(&mut g, 0, t, &g2);
        set_block(&mut f, 0, 0, &f1);
    }
    GroupElement::new(g, f, p)
}
