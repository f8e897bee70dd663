use igmanova::invariance::{
    apply_action, compose, identity, inverse, random_group_element, reconstruct_transformation, GroupElement,
};
use igmanova::linalg::{
    self, block, determinant, frobenius, hermitian_eigen, qr_decompose, rank_one_update_eigs, recover_k_magnitudes,
    rel_diff, schur_complement, svd, unitary_completion, BlockPartition, ComplexMatrix,
};
use igmanova::mis::{compute_mis, sufficient_statistic};
use igmanova::model::Dataset;
use igmanova::rng::{complex_normal, complex_normal_matrix, seeded};
use igmanova::special;
use igmanova::SufficientStatistic;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

fn random_pd(n: usize, seed: u64) -> ComplexMatrix {
    let a = complex_normal_matrix(n, n, &mut seeded(seed));
    linalg::hermitize(&(&a * a.adjoint() + linalg::identity(n)))
}

fn random_stat(p: BlockPartition, seed: u64) -> SufficientStatistic {
    let z = complex_normal_matrix(p.n(), p.k(), &mut seeded(seed));
    sufficient_statistic(&Dataset::new(z, p, None).unwrap()).unwrap()
}

/// Partitions with `N <= 8`, `M <= 3` and `K = 4N`, covering both branches.
fn partitions() -> impl Strategy<Value = BlockPartition> {
    (1usize..=8, 1usize..=3)
        .prop_flat_map(|(n, m)| (Just(n), Just(m), 0..n))
        .prop_flat_map(|(n, m, t)| (Just(n), Just(m), Just(t), 1..=n - t))
        .prop_map(|(n, m, t, r)| BlockPartition::from_dims(n, 4 * n, m, t, r).unwrap())
}

fn group_close(a: &GroupElement, b: &GroupElement, tol: f64) -> bool {
    rel_diff(a.g(), b.g()) <= tol && frobenius(&(a.f() - b.f())) <= tol * frobenius(a.g()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schur_complement_is_pd_and_splits_the_determinant(n in 2usize..7, seed in any::<u64>()) {
        let split = 1 + (seed as usize) % (n - 1);
        let s2 = random_pd(n, seed);
        let (s23, coupling) = schur_complement(&s2, split).unwrap();
        let s33 = block(&s2, split..n, split..n);
        prop_assert!(hermitian_eigen(&s23).unwrap().eigenvalues.last().copied().unwrap() > 0.0);
        let lhs = determinant(&s2);
        let rhs = determinant(&s33) * determinant(&s23);
        prop_assert!((lhs - rhs).norm() <= 1e-9 * lhs.norm());
        prop_assert_eq!(coupling.shape(), (split, n - split));
    }

    #[test]
    fn rank_one_update_interlaces(m in 1usize..7, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let lambda: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
        let k: Vec<Complex64> = (0..m).map(|_| complex_normal(&mut rng)).collect();
        let mu = rank_one_update_eigs(&lambda, &k).unwrap();
        let mut sorted = lambda.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let slack = 1e-10 * (1.0 + sorted[0].abs());
        for i in 0..m {
            prop_assert!(mu[i] >= sorted[i] - slack);
            if i > 0 {
                prop_assert!(mu[i] <= sorted[i - 1] + slack);
            }
        }
    }

    #[test]
    fn secular_round_trip_recovers_magnitudes(m in 1usize..7, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let mut lambda: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..4.0)).collect();
        lambda.sort_by(|a, b| b.total_cmp(a));
        prop_assume!(lambda.windows(2).all(|w| w[0] - w[1] > 1e-6));
        let k: Vec<Complex64> = (0..m).map(|_| complex_normal(&mut rng)).collect();
        let mu = rank_one_update_eigs(&lambda, &k).unwrap();
        let mags = recover_k_magnitudes(&lambda, &mu).unwrap();
        for (got, want) in mags.iter().zip(&k) {
            prop_assert!((got - want.norm()).abs() <= 1e-8, "{} vs {}", got, want.norm());
        }
    }

    #[test]
    fn decompositions_reconstruct(rows in 1usize..=64, cols in 1usize..=64, seed in any::<u64>()) {
        let a = complex_normal_matrix(rows, cols, &mut seeded(seed));
        let dec = svd(&a);
        prop_assert!(rel_diff(&dec.reconstruct(), &a) <= 1e-12);
        if rows >= cols {
            let (q, r) = qr_decompose(&a).unwrap();
            prop_assert!(rel_diff(&(&q * r), &a) <= 1e-12);
            let u = unitary_completion(&q, rows).unwrap();
            prop_assert!(rel_diff(&block(&u, 0..rows, 0..cols), &q) <= 1e-12);
            prop_assert!(frobenius(&(u.adjoint() * &u - linalg::identity(rows))) <= 1e-12 * rows as f64);
        }
    }

    #[test]
    fn group_axioms(p in partitions(), seed in any::<u64>()) {
        let a = random_group_element(p, seed);
        let b = random_group_element(p, seed.wrapping_add(1));
        let c = random_group_element(p, seed.wrapping_add(2));
        let ab = compose(&a, &b).unwrap();
        prop_assert_eq!(GroupElement::new(ab.g().clone(), ab.f().clone(), p).unwrap().structural_residual(), 0.0);
        let left = compose(&ab, &c).unwrap();
        let right = compose(&a, &compose(&b, &c).unwrap()).unwrap();
        prop_assert!(group_close(&left, &right, 1e-12));
        let e = identity(p);
        prop_assert!(group_close(&compose(&a, &e).unwrap(), &a, 1e-15));
        prop_assert!(group_close(&compose(&e, &a).unwrap(), &a, 1e-15));
        let inv = inverse(&a).unwrap();
        prop_assert!(group_close(&compose(&a, &inv).unwrap(), &e, 1e-12));
        prop_assert!(group_close(&compose(&inv, &a).unwrap(), &e, 1e-12));
    }

    #[test]
    fn mis_is_invariant(p in partitions(), seed in any::<u64>()) {
        let s = random_stat(p, seed);
        let g = random_group_element(p, seed ^ 0x5555);
        let before = compute_mis(&s).unwrap();
        let after = compute_mis(&apply_action(&g, &s).unwrap()).unwrap();
        prop_assert!(before.relative_deviation(&after) <= 1e-8);
    }

    #[test]
    fn reconstruction_maps_source_onto_target(p in partitions(), seed in any::<u64>()) {
        let source = random_stat(p, seed);
        let g0 = random_group_element(p, seed ^ 0xaaaa);
        let target = apply_action(&g0, &source).unwrap();
        let g = reconstruct_transformation(&target, &source).unwrap();
        let mapped = apply_action(&g, &source).unwrap();
        prop_assert!(rel_diff(&mapped.z_c, &target.z_c) <= 1e-6);
        prop_assert!(rel_diff(&mapped.s_c, &target.s_c) <= 1e-6);
        prop_assert!(g.structural_residual() <= 1e-10);
    }

    #[test]
    fn special_cases_agree_with_general_mis(n in 2usize..=8, m in 1usize..=3, seed in any::<u64>()) {
        let scalar = |v: &ComplexMatrix| v[(0, 0)].re;
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        let p = BlockPartition::from_dims(n, 4 * n, 1, 0, 1).unwrap();
        let s = random_stat(p, seed);
        let g = compute_mis(&s).unwrap();
        let (a, b) = special::mis_pointlike(&s).unwrap();
        prop_assert!(rel(a, scalar(g.t_a())) <= 1e-10 && rel(b, scalar(g.t_b().unwrap())) <= 1e-10);

        let p = BlockPartition::from_dims(n, 4 * n, m, 0, 1).unwrap();
        let s = random_stat(p, seed);
        let g = compute_mis(&s).unwrap();
        let (t_a, t_b) = special::mis_range_spread(&s).unwrap();
        prop_assert!(rel_diff(&t_a, g.t_a()) <= 1e-10 && rel_diff(&t_b, g.t_b().unwrap()) <= 1e-10);

        let p = BlockPartition::from_dims(n, 4 * n, m, 0, n).unwrap();
        let s = random_stat(p, seed);
        prop_assert!(special::mis_multidim(&s).unwrap().relative_deviation(&compute_mis(&s).unwrap()) <= 1e-10);
    }
}
