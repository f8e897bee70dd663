//! Monte Carlo checks. Each trial draws from its own stream, so results do
//! not depend on how trials are scheduled across workers.

use std::collections::BTreeMap;

use igmanova::invariance::{apply_action, random_group_element, random_group_element_with, reconstruct_transformation};
use igmanova::linalg::{
    self, block, numerical_rank, qr_decompose, rank_one_update_eigs, recover_k_magnitudes, rel_diff,
    schur_complement, ComplexMatrix,
};
use igmanova::mis::{
    compute_mis, induced_invariant, sample_mis_detailed, sufficient_statistic, to_representation, whiten_signal,
    whitening_transform,
};
use igmanova::model::{random_nuisance, sample_raw_with, to_canonical, Dataset};
use igmanova::rng::{complex_normal, complex_normal_matrix, derive_seed, trial_rng, SimRng};
use igmanova::{special, BlockPartition, Hypothesis, MisValue, SufficientStatistic, TrueParams};
use rayon::prelude::*;

use crate::scenario::{conditional_root, factor_target, CheckName, NuisanceMode, Setup};
use crate::stats::{correlation, ks_two_sample_at};
use crate::CliError;

pub const INVARIANCE_TOL: f64 = 1e-8;
pub const MAXIMALITY_TOL: f64 = 1e-6;
pub const STRUCTURAL_TOL: f64 = 1e-10;
pub const INDEPENDENCE_TOL: f64 = 0.05;
pub const MOMENT_TOL: f64 = 0.05;
pub const SPECIAL_CASE_TOL: f64 = 1e-10;
pub const EIG_LINK_TOL: f64 = 1e-9;
pub const SECULAR_TOL: f64 = 1e-8;
pub const RANK_TOL: f64 = 1e-8;
pub const MEAN_SIGMAS: f64 = 3.0;

/// One per-trial value destined for the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Functional {
    pub trial: u64,
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub details: BTreeMap<String, f64>,
    pub functionals: Vec<Functional>,
}

impl Outcome {
    fn at_most(statistic: f64, threshold: f64) -> Self {
        Outcome {
            statistic,
            threshold,
            pass: statistic <= threshold,
            details: BTreeMap::new(),
            functionals: Vec::new(),
        }
    }

    fn below(statistic: f64, threshold: f64) -> Self {
        Outcome { pass: statistic < threshold, ..Outcome::at_most(statistic, threshold) }
    }

    fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    fn series(&mut self, name: &str, values: &[f64]) {
        self.functionals.extend(values.iter().enumerate().map(|(trial, &value)| Functional {
            trial: trial as u64,
            name: name.to_string(),
            value,
        }));
    }
}

type CheckResult = Result<Outcome, CliError>;

/// Shared state for one check.
pub struct Ctx<'a> {
    pub setup: &'a Setup,
    pub trials: usize,
    seed: u64,
}

impl<'a> Ctx<'a> {
    pub fn new(setup: &'a Setup, check: CheckName, trials: usize, master_seed: u64) -> Self {
        Ctx { setup, trials, seed: derive_seed(master_seed, check.stream()) }
    }

    fn p(&self) -> BlockPartition {
        self.setup.partition
    }

    fn alpha(&self) -> f64 {
        self.setup.scenario.significance
    }

    fn stream(&self, sub: u64) -> u64 {
        derive_seed(self.seed, sub)
    }

    /// Runs `f` for every trial in parallel; results come back in trial order.
    fn trials<T: Send>(&self, sub: u64, f: impl Fn(&mut SimRng) -> igmanova::Result<T> + Sync) -> igmanova::Result<Vec<T>> {
        let stream = self.stream(sub);
        (0..self.trials as u64).into_par_iter().map(|t| f(&mut trial_rng(stream, t))).collect()
    }

    fn statistic(&self, params: &TrueParams, hyp: Hypothesis, rng: &mut SimRng) -> igmanova::Result<SufficientStatistic> {
        let x = sample_raw_with(&self.setup.spec, params, hyp, rng)?;
        sufficient_statistic(&to_canonical(&x, &self.setup.model)?)
    }

    fn mis(&self, params: &TrueParams, hyp: Hypothesis, rng: &mut SimRng) -> igmanova::Result<MisValue> {
        compute_mis(&self.statistic(params, hyp, rng)?)
    }

    /// A second nuisance pair, independent of the scenario's.
    fn alternate_nuisance(&self) -> igmanova::Result<TrueParams> {
        let p = self.p();
        match self.setup.scenario.nuisance_mode {
            NuisanceMode::Random { seed, scale } => random_nuisance(&p, scale, derive_seed(seed, 1)),
            NuisanceMode::Fixed(_) => {
                let scale = linalg::trace_re(&self.setup.params.r_star) / p.n() as f64;
                random_nuisance(&p, scale, self.stream(1000))
            }
        }
    }
}

pub fn run(check: CheckName, ctx: &Ctx) -> CheckResult {
    match check {
        CheckName::Invariance => invariance(ctx),
        CheckName::Maximality => maximality(ctx),
        CheckName::CfarKs => cfar_ks(ctx),
        CheckName::RepresentationKs => representation_ks(ctx),
        CheckName::Independence => independence(ctx),
        CheckName::Ancillarity => ancillarity(ctx),
        CheckName::ParameterReduction => parameter_reduction(ctx),
        CheckName::WishartMoments => wishart_moments(ctx),
        CheckName::SpecialCases => special_cases(ctx),
        CheckName::EigenLinks => eigen_links(ctx),
        CheckName::Rank => rank(ctx),
        CheckName::ActionDistribution => action_distribution(ctx),
    }
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(0.0, f64::max)
}

fn trace_a(v: &MisValue) -> f64 {
    linalg::trace_re(v.t_a())
}

fn trace_b(v: &MisValue) -> f64 {
    v.t_b().map(linalg::trace_re).unwrap_or(f64::NAN)
}

fn max_eig_a(v: &MisValue) -> f64 {
    linalg::max_eigenvalue(v.t_a()).unwrap_or(f64::NAN)
}

/// Named scalar summaries of the MIS used by the distribution checks.
fn summaries(v: &[MisValue], with_max_eig: bool) -> Vec<(&'static str, Vec<f64>)> {
    let mut out = vec![("tr_Ta", v.iter().map(trace_a).collect())];
    if with_max_eig {
        out.push(("maxeig_Ta", v.iter().map(max_eig_a).collect()));
    }
    if v.first().is_some_and(|x| x.t_b().is_some()) {
        out.push(("tr_Tb", v.iter().map(trace_b).collect()));
    }
    out
}

/// KS comparisons of matching summaries; the statistic is the largest distance.
fn ks_outcome(
    check: &str,
    labels: (&str, &str),
    a: &[(&'static str, Vec<f64>)],
    b: &[(&'static str, Vec<f64>)],
    alpha: f64,
) -> CheckResult {
    let mut worst = 0.0f64;
    let mut critical = 0.0;
    let mut details = BTreeMap::new();
    let mut functionals = Vec::new();
    for ((name, xa), (_, xb)) in a.iter().zip(b) {
        let ks = ks_two_sample_at(xa, xb, alpha)?;
        worst = worst.max(ks.statistic);
        critical = ks.critical;
        details.insert(format!("ks_{name}"), ks.statistic);
        for (label, xs) in [(labels.0, xa), (labels.1, xb)] {
            functionals.extend(xs.iter().enumerate().map(|(t, &value)| Functional {
                trial: t as u64,
                name: format!("{check}.{label}.{name}"),
                value,
            }));
        }
    }
    let mut out = Outcome::below(worst, critical);
    out.details = details;
    out.functionals = functionals;
    Ok(out)
}

fn random_unitary(n: usize, rng: &mut SimRng) -> igmanova::Result<ComplexMatrix> {
    Ok(qr_decompose(&complex_normal_matrix(n, n, rng))?.0)
}

fn invariance(ctx: &Ctx) -> CheckResult {
    let p = ctx.p();
    let dev = ctx.trials(0, |rng| {
        let s = ctx.statistic(&ctx.setup.params, ctx.setup.hypothesis, rng)?;
        let g = random_group_element_with(p, rng);
        Ok(compute_mis(&s)?.relative_deviation(&compute_mis(&apply_action(&g, &s)?)?))
    })?;
    let mut out = Outcome::at_most(max_of(&dev), INVARIANCE_TOL);
    out.series("invariance.deviation", &dev);
    Ok(out)
}

fn maximality(ctx: &Ctx) -> CheckResult {
    let p = ctx.p();
    let rows = ctx.trials(0, |rng| {
        let source = ctx.statistic(&ctx.setup.params, ctx.setup.hypothesis, rng)?;
        let g0 = random_group_element_with(p, rng);
        let target = apply_action(&g0, &source)?;
        let g = reconstruct_transformation(&target, &source)?;
        let mapped = apply_action(&g, &source)?;
        let err = rel_diff(&mapped.z_c, &target.z_c).max(rel_diff(&mapped.s_c, &target.s_c));
        Ok((err, g.structural_residual()))
    })?;
    let err: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let residual = max_of(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
    let mut out = Outcome::at_most(max_of(&err), MAXIMALITY_TOL).detail("max_structural_residual", residual);
    out.pass &= residual <= STRUCTURAL_TOL;
    out.series("maximality.error", &err);
    Ok(out)
}

fn cfar_ks(ctx: &Ctx) -> CheckResult {
    let first = ctx.setup.null_params();
    let second = ctx.alternate_nuisance()?;
    let a = ctx.trials(1, |rng| ctx.mis(&first, Hypothesis::H0, rng))?;
    let b = ctx.trials(2, |rng| ctx.mis(&second, Hypothesis::H0, rng))?;
    ks_outcome("cfar_ks", ("nuisance_a", "nuisance_b"), &summaries(&a, false), &summaries(&b, false), ctx.alpha())
}

fn representation_ks(ctx: &Ctx) -> CheckResult {
    let p = ctx.p();
    let setup = ctx.setup;
    let b_w = match setup.hypothesis {
        Hypothesis::H0 => None,
        Hypothesis::H1 => Some(whiten_signal(&setup.canonical.b, &setup.canonical.r, &p)?),
    };
    let pipeline = ctx.trials(1, |rng| {
        let mis = ctx.mis(&setup.params, setup.hypothesis, rng)?;
        Ok(linalg::trace_re(&to_representation(&mis)?.t_1a))
    })?;
    let sampler = ctx.trials(2, |rng| {
        Ok(linalg::trace_re(&sample_mis_detailed(&p, b_w.as_ref(), rng)?.sample.t_1a))
    })?;
    ks_outcome(
        "representation_ks",
        ("pipeline", "sampler"),
        &[("tr_T1a", pipeline)],
        &[("tr_T1a", sampler)],
        ctx.alpha(),
    )
}

fn independence(ctx: &Ctx) -> CheckResult {
    let null = ctx.setup.null_params();
    let pairs = ctx.trials(0, |rng| {
        let rep = to_representation(&ctx.mis(&null, Hypothesis::H0, rng)?)?;
        Ok((linalg::trace_re(&rep.t_1a), linalg::trace_re(&rep.t_1b)))
    })?;
    let a: Vec<f64> = pairs.iter().map(|x| x.0).collect();
    let b: Vec<f64> = pairs.iter().map(|x| x.1).collect();
    let rho = correlation(&a, &b);
    let mut out = Outcome::below(rho.abs(), INDEPENDENCE_TOL).detail("correlation", rho);
    out.series("independence.tr_T1a", &a);
    out.series("independence.tr_T1b", &b);
    Ok(out)
}

fn ancillarity(ctx: &Ctx) -> CheckResult {
    let null = ctx.setup.null_params();
    let h0 = ctx.trials(1, |rng| Ok(trace_b(&ctx.mis(&null, Hypothesis::H0, rng)?)))?;
    let h1 = ctx.trials(2, |rng| Ok(trace_b(&ctx.mis(&ctx.setup.params, Hypothesis::H1, rng)?)))?;
    ks_outcome("ancillarity", ("h0", "h1"), &[("tr_Tb", h0)], &[("tr_Tb", h1)], ctx.alpha())
}

fn parameter_reduction(ctx: &Ctx) -> CheckResult {
    let p = ctx.p();
    let setup = ctx.setup;
    let t_p = induced_invariant(&setup.canonical.b, &setup.canonical.r, &p)?.t_p;
    // Second pair: fresh covariance, signal rotated by a random unitary.
    let nuisance = ctx.alternate_nuisance()?;
    let r2 = setup.model.canonical_params(&nuisance)?.r;
    let w = factor_target(&t_p, p.r()).map_err(CliError::Check)?;
    let q = random_unitary(p.r(), &mut trial_rng(ctx.stream(3), 0))?;
    let b2 = conditional_root(&r2, &p)? * (q * w);
    let second = nuisance.with_signal(setup.model.raw_signal(&b2)?);
    let c2 = setup.model.canonical_params(&second)?;
    let mismatch = rel_diff(&induced_invariant(&c2.b, &c2.r, &p)?.t_p, &t_p);
    let b_gap = rel_diff(&c2.b, &setup.canonical.b);

    let a = ctx.trials(1, |rng| ctx.mis(&setup.params, Hypothesis::H1, rng))?;
    let b = ctx.trials(2, |rng| ctx.mis(&second, Hypothesis::H1, rng))?;
    let out = ks_outcome("parameter_reduction", ("pair_a", "pair_b"), &summaries(&a, true), &summaries(&b, true), ctx.alpha())?;
    let mut out = out.detail("t_p_mismatch", mismatch).detail("signal_distance", b_gap);
    out.pass &= mismatch <= 1e-8;
    Ok(out)
}

fn wishart_moments(ctx: &Ctx) -> CheckResult {
    let p = ctx.p();
    let setup = ctx.setup;
    let eye = |n: usize, dof: usize| linalg::identity(n).scale(dof as f64);
    let (want33, want23) = (eye(p.nj(), p.km()), eye(p.r(), p.km() - p.nj()));
    let n = ctx.trials as f64;

    let sampler = ctx.trials(1, |rng| {
        let d = sample_mis_detailed(&p, None, rng)?;
        Ok((d.s33, d.s23))
    })?;
    let w = whitening_transform(&setup.canonical.r, &p)?;
    let pipeline = ctx.trials(2, |rng| {
        let s = apply_action(&w, &ctx.statistic(&setup.params, setup.hypothesis, rng)?)?;
        let s2 = s.s(p.rows23(), p.rows23());
        Ok((s.s(p.rows3(), p.rows3()), schur_complement(&s2, p.r())?.0))
    })?;
    let mean = |v: &[(ComplexMatrix, ComplexMatrix)], second: bool| {
        let init = if second { want23.scale(0.0) } else { want33.scale(0.0) };
        v.iter().fold(init, |acc, x| acc + if second { &x.1 } else { &x.0 }).unscale(n)
    };
    let e = [
        rel_diff(&mean(&sampler, false), &want33),
        rel_diff(&mean(&sampler, true), &want23),
        rel_diff(&mean(&pipeline, false), &want33),
        rel_diff(&mean(&pipeline, true), &want23),
    ];
    Ok(Outcome::at_most(max_of(&e), MOMENT_TOL)
        .detail("sampler_s33", e[0])
        .detail("sampler_s23", e[1])
        .detail("pipeline_s33", e[2])
        .detail("pipeline_s23", e[3]))
}

fn iid_statistic(p: BlockPartition, rng: &mut SimRng) -> igmanova::Result<SufficientStatistic> {
    let z = complex_normal_matrix(p.n(), p.k(), rng);
    sufficient_statistic(&Dataset::new(z, p, None)?)
}

fn rel_scalar(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn scalar_pair_deviation(got: (f64, f64), general: &MisValue) -> f64 {
    let a = general.t_a()[(0, 0)].re;
    let b = general.t_b().map(|t| t[(0, 0)].re).unwrap_or(f64::NAN);
    rel_scalar(got.0, a).max(rel_scalar(got.1, b))
}

/// Special-case partitions that fit the scenario's `N`, `K` and `M`.
fn special_case_partitions(n: usize, k: usize, m: usize) -> Vec<(&'static str, BlockPartition)> {
    let part = |m, t, r| BlockPartition::from_dims(n, k, m, t, r).ok();
    let mut out = Vec::new();
    let sub = (n.saturating_sub(1)).clamp(1, 2);
    let cases = [
        ("pointlike", n >= 2, part(1, 0, 1)),
        ("vector_subspace", n >= 2, part(1, 0, sub)),
        ("subspace_interference", n >= 3, part(1, 1, 1)),
        ("multidim", true, part(m, 0, n)),
        ("range_spread", n >= 2, part(m, 0, 1)),
        ("gmanova", n >= 2, part(m, 0, sub)),
    ];
    for (name, ok, p) in cases {
        if let (true, Some(p)) = (ok, p) {
            out.push((name, p));
        }
    }
    out
}

fn special_cases(ctx: &Ctx) -> CheckResult {
    let p = ctx.p();
    let cases = special_case_partitions(p.n(), p.k(), p.m());
    let mut out = Outcome::at_most(0.0, SPECIAL_CASE_TOL);
    for (i, (name, q)) in cases.iter().enumerate() {
        let name = *name;
        let q = *q;
        let dev = ctx.trials(i as u64 + 1, |rng| {
            let s = iid_statistic(q, rng)?;
            let g = compute_mis(&s)?;
            Ok(match name {
                "pointlike" => scalar_pair_deviation(special::mis_pointlike(&s)?, &g),
                "vector_subspace" => scalar_pair_deviation(special::mis_vector_subspace(&s)?, &g),
                "subspace_interference" => scalar_pair_deviation(special::mis_subspace_interference(&s)?, &g),
                "multidim" => special::mis_multidim(&s)?.relative_deviation(&g),
                "range_spread" => {
                    let (t_a, t_b) = special::mis_range_spread(&s)?;
                    MisValue::Pair { t_a, t_b }.relative_deviation(&g)
                }
                _ => special::mis_gmanova(&s)?.relative_deviation(&g),
            })
        })?;
        let worst = max_of(&dev);
        out.statistic = out.statistic.max(worst);
        out.details.insert(name.to_string(), worst);
        out.series(&format!("special_cases.{name}.deviation"), &dev);
    }
    out.pass = out.statistic <= out.threshold;
    Ok(out)
}

fn spectrum_gap(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let scale = a.iter().chain(b).fold(1.0f64, |m, x| m.max(x.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

fn eigen_links(ctx: &Ctx) -> CheckResult {
    let p = ctx.p();
    let (n, k, m) = (p.n(), p.k(), p.m());
    let multidim = BlockPartition::from_dims(n, k, m, 0, n)?;
    let spread = BlockPartition::from_dims(n, k, m, 0, 1).ok().filter(|_| n >= 2);
    let rows = ctx.trials(0, |rng| {
        let (eig_t, eig_tc) = special::eig_link_multidim(&iid_statistic(multidim, rng)?)?;
        let link = spectrum_gap(&eig_t, &eig_tc);

        let mut composite = 0.0f64;
        if let Some(q) = spread {
            let s = iid_statistic(q, rng)?;
            let u = random_unitary(m, rng)?;
            let rotated = SufficientStatistic::new(&s.z_c * &u, s.s_c.clone(), q)?;
            let (ta, tb) = special::mis_range_spread(&s)?;
            let (ta2, tb2) = special::mis_range_spread(&rotated)?;
            let (eb, es) = special::composite_eig_statistic(&ta, &tb)?;
            let (eb2, es2) = special::composite_eig_statistic(&ta2, &tb2)?;
            let (secular, _) = special::composite_eig_secular(&ta, &tb)?;
            composite = spectrum_gap(&eb, &eb2).max(spectrum_gap(&es, &es2)).max(spectrum_gap(&es, &secular));
        }

        // Secular round trip on eigenvalues with gaps above 1e-6.
        let dim = n.max(2);
        let lambda = loop {
            let mut l: Vec<f64> = (0..dim).map(|_| 4.0 * complex_normal(rng).norm_sqr()).collect();
            l.sort_by(|a, b| b.total_cmp(a));
            if l.windows(2).all(|w| w[0] - w[1] > 1e-6) {
                break l;
            }
        };
        let kv: Vec<_> = (0..dim).map(|_| complex_normal(rng)).collect();
        let mu = rank_one_update_eigs(&lambda, &kv)?;
        let mags = recover_k_magnitudes(&lambda, &mu)?;
        let secular = mags.iter().zip(&kv).map(|(g, w)| (g - w.norm()).abs()).fold(0.0, f64::max);
        Ok([link, composite, secular])
    })?;
    let col = |i: usize| rows.iter().map(|r| r[i]).collect::<Vec<f64>>();
    let (link, composite, secular) = (col(0), col(1), col(2));
    let (l, c, s) = (max_of(&link), max_of(&composite), max_of(&secular));
    let ratio = (l / EIG_LINK_TOL).max(c / EIG_LINK_TOL).max(s / SECULAR_TOL);
    let mut out = Outcome::at_most(ratio, 1.0)
        .detail("eig_link", l)
        .detail("composite_invariance", c)
        .detail("secular_round_trip", s);
    out.series("eigen_links.eig_link", &link);
    out.series("eigen_links.composite_invariance", &composite);
    out.series("eigen_links.secular_round_trip", &secular);
    Ok(out)
}

fn rank(ctx: &Ctx) -> CheckResult {
    let p = ctx.p();
    let want_a = p.m().min(p.r());
    let want_b = p.m().min(p.nj());
    let ranks = ctx.trials(0, |rng| {
        let v = ctx.mis(&ctx.setup.params, ctx.setup.hypothesis, rng)?;
        Ok((numerical_rank(v.t_a(), RANK_TOL), v.t_b().map(|t| numerical_rank(t, RANK_TOL))))
    })?;
    let bad = ranks.iter().filter(|(a, b)| *a != want_a || b.is_some_and(|b| b != want_b)).count();
    let mut out = Outcome::at_most(bad as f64, 0.0)
        .detail("expected_rank_Ta", want_a as f64)
        .detail("expected_rank_Tb", if p.is_full() { f64::NAN } else { want_b as f64 });
    out.series("rank.rank_Ta", &ranks.iter().map(|r| r.0 as f64).collect::<Vec<_>>());
    if !p.is_full() {
        out.series("rank.rank_Tb", &ranks.iter().map(|r| r.1.unwrap_or(0) as f64).collect::<Vec<_>>());
    }
    Ok(out)
}

fn action_distribution(ctx: &Ctx) -> CheckResult {
    let p = ctx.p();
    let setup = ctx.setup;
    let null = setup.null_params();
    let g = random_group_element(p, ctx.stream(99));
    let moved = ctx.trials(0, |rng| apply_action(&g, &ctx.statistic(&null, Hypothesis::H0, rng)?))?;
    let n = ctx.trials as f64;
    let cov = moved.iter().fold(linalg::zeros(p.n(), p.n()), |acc, s| acc + &s.s_c).unscale(n * p.km() as f64);
    let mean = moved.iter().fold(linalg::zeros(p.n(), p.m()), |acc, s| acc + &s.z_c).unscale(n);
    let r = &setup.null_canonical.r;
    let want_cov = g.g() * r * g.g().adjoint();
    let mut mean0 = linalg::zeros(p.n(), p.m());
    linalg::set_block(&mut mean0, 0, 0, &setup.null_canonical.b_t1);
    let want_mean = g.g() * mean0 + g.f();
    let mut z = 0.0f64;
    for i in 0..p.n() {
        let se = (want_cov[(i, i)].re / n).sqrt();
        for j in 0..p.m() {
            z = z.max((mean[(i, j)] - want_mean[(i, j)]).norm() / se);
        }
    }
    let lower = block(&mean, p.t()..p.n(), 0..p.m());
    let err = rel_diff(&cov, &want_cov);
    let mut out = Outcome::at_most(err, MOMENT_TOL)
        .detail("mean_max_standard_errors", z)
        .detail("lower_mean_norm", linalg::frobenius(&lower));
    out.pass &= z <= MEAN_SIGMAS;
    Ok(out)
}
