//! Monte Carlo oracles for the samplers and the distribution-level claims.

use igmanova::invariance::{apply_action, random_group_element};
use igmanova::linalg::{self, block, frobenius, rel_diff, zeros, ComplexMatrix};
use igmanova::mis::{sample_mis_detailed, sufficient_statistic, whitening_transform};
use igmanova::model::{canonicalize, random_nuisance, sample_raw_with, to_canonical, Hypothesis, ProblemSpec};
use igmanova::rng::{complex_normal_matrix, seeded, trial_rng};

const TRIALS: usize = 10_000;

/// Element-wise check that `mean` lies within `z` standard errors of `want`,
/// where `var` holds the per-entry variance of one draw.
fn within_sigma(mean: &ComplexMatrix, want: &ComplexMatrix, var: &[f64], trials: usize, z: f64) -> bool {
    mean.iter().zip(want.iter()).zip(var).all(|((m, w), v)| {
        let se = (v / trials as f64).sqrt();
        (m - w).norm() <= z * se * std::f64::consts::SQRT_2
    })
}

#[test]
fn raw_mean_under_signal() {
    let spec = ProblemSpec::random(4, 10, 2, 1, 1, 3).unwrap();
    let p = spec.partition();
    let nuisance = random_nuisance(&p, 1.0, 4).unwrap();
    let params = nuisance.with_signal(complex_normal_matrix(1, 2, &mut seeded(5)));
    let want = (spec.a_t() * &params.b_t + spec.a_r() * &params.b_r) * spec.c();
    let mut sum = zeros(4, 10);
    for trial in 0..TRIALS {
        sum += sample_raw_with(&spec, &params, Hypothesis::H1, &mut trial_rng(1, trial as u64)).unwrap();
    }
    let mean = sum.unscale(TRIALS as f64);
    // Entry (i, j) of the noise has variance R*_ii.
    let var: Vec<f64> = (0..10).flat_map(|_| (0..4).map(|i| params.r_star[(i, i)].re)).collect();
    assert!(within_sigma(&mean, &want, &var, TRIALS, 3.0));
}

#[test]
fn raw_covariance_under_null() {
    let spec = ProblemSpec::canonical(4, 8, 1, 0, 1).unwrap();
    let params = random_nuisance(&spec.partition(), 1.5, 6).unwrap();
    let mut cov = zeros(4, 4);
    for trial in 0..TRIALS {
        let x = sample_raw_with(&spec, &params, Hypothesis::H0, &mut trial_rng(2, trial as u64)).unwrap();
        cov += &x * x.adjoint();
    }
    let cov = cov.unscale((TRIALS * 8) as f64);
    assert!(rel_diff(&cov, &params.r_star) < 0.05);
}

#[test]
fn canonical_mean_structure() {
    let spec = ProblemSpec::random(5, 12, 2, 1, 2, 7).unwrap();
    let p = spec.partition();
    let cm = canonicalize(&spec).unwrap();
    let h0 = random_nuisance(&p, 1.0, 8).unwrap();
    let h1 = h0.with_signal(complex_normal_matrix(2, 2, &mut seeded(9)));
    let cp = cm.canonical_params(&h1).unwrap();
    let mut want = zeros(5, 12);
    linalg::set_block(&mut want, 0, 0, &cp.b_t1);
    linalg::set_block(&mut want, 1, 0, &cp.b);
    let var: Vec<f64> = (0..12).flat_map(|_| (0..5).map(|i| cp.r[(i, i)].re)).collect();

    let mut sum1 = zeros(5, 12);
    let mut sum0 = zeros(5, 12);
    for trial in 0..TRIALS {
        let x1 = sample_raw_with(&spec, &h1, Hypothesis::H1, &mut trial_rng(3, trial as u64)).unwrap();
        let x0 = sample_raw_with(&spec, &h0, Hypothesis::H0, &mut trial_rng(4, trial as u64)).unwrap();
        sum1 += to_canonical(&x1, &cm).unwrap().z;
        sum0 += to_canonical(&x0, &cm).unwrap().z;
    }
    assert!(within_sigma(&sum1.unscale(TRIALS as f64), &want, &var, TRIALS, 3.0));
    let mean0 = sum0.unscale(TRIALS as f64);
    let lower = block(&mean0, 1..5, 0..12);
    let lower_var: Vec<f64> = (0..12).flat_map(|_| (1..5).map(|i| cp.r[(i, i)].re)).collect();
    assert!(within_sigma(&lower, &zeros(4, 12), &lower_var, TRIALS, 3.0));
}

#[test]
fn action_preserves_the_model() {
    // Secondary columns map to CN(0, G R G^H); the H0 mean keeps rows t..N zero.
    let spec = ProblemSpec::canonical(4, 10, 1, 1, 1).unwrap();
    let p = spec.partition();
    let cm = canonicalize(&spec).unwrap();
    let params = random_nuisance(&p, 1.0, 11).unwrap();
    let r = cm.canonical_params(&params).unwrap().r;
    let g = random_group_element(p, 12);
    let mut cov = zeros(4, 4);
    let mut mean = zeros(4, 1);
    for trial in 0..TRIALS {
        let x = sample_raw_with(&spec, &params, Hypothesis::H0, &mut trial_rng(5, trial as u64)).unwrap();
        let s = sufficient_statistic(&to_canonical(&x, &cm).unwrap()).unwrap();
        let moved = apply_action(&g, &s).unwrap();
        cov += moved.s_c;
        mean += moved.z_c;
    }
    let cov = cov.unscale((TRIALS * p.km()) as f64);
    let want = g.g() * &r * g.g().adjoint();
    assert!(rel_diff(&cov, &want) < 0.05);
    let mean = mean.unscale(TRIALS as f64);
    let var: Vec<f64> = (1..4).map(|i| want[(i, i)].re).collect();
    assert!(within_sigma(&block(&mean, 1..4, 0..1), &zeros(3, 1), &var, TRIALS, 3.0));
}

#[test]
fn wishart_dof_bookkeeping() {
    let p = igmanova::BlockPartition::from_dims(6, 16, 2, 1, 2).unwrap();
    let mut s33 = zeros(p.nj(), p.nj());
    let mut s23 = zeros(p.r(), p.r());
    for trial in 0..TRIALS {
        let draw = sample_mis_detailed(&p, None, &mut trial_rng(6, trial as u64)).unwrap();
        s33 += draw.s33;
        s23 += draw.s23;
    }
    let eye = |n: usize, c: usize| linalg::identity(n).scale(c as f64);
    assert!(rel_diff(&s33.unscale(TRIALS as f64), &eye(p.nj(), p.km())) < 0.05);
    assert!(rel_diff(&s23.unscale(TRIALS as f64), &eye(p.r(), p.km() - p.nj())) < 0.05);
}

#[test]
fn whitened_pipeline_blocks_have_wishart_means() {
    let spec = ProblemSpec::random(5, 13, 1, 1, 1, 13).unwrap();
    let p = spec.partition();
    let cm = canonicalize(&spec).unwrap();
    let params = random_nuisance(&p, 2.0, 14).unwrap();
    let r = cm.canonical_params(&params).unwrap().r;
    let w = whitening_transform(&r, &p).unwrap();
    let mut lower = zeros(p.n() - p.t(), p.n() - p.t());
    for trial in 0..2000 {
        let x = sample_raw_with(&spec, &params, Hypothesis::H0, &mut trial_rng(7, trial as u64)).unwrap();
        let s = apply_action(&w, &sufficient_statistic(&to_canonical(&x, &cm).unwrap()).unwrap()).unwrap();
        lower += s.s(p.rows23(), p.rows23());
    }
    let lower = lower.unscale(2000.0);
    assert!(rel_diff(&lower, &linalg::identity(p.n() - p.t()).scale(p.km() as f64)) < 0.05);
    assert!(frobenius(&lower) > 0.0);
}
