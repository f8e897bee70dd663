//! Spectral maps for a diagonal-plus-rank-one Hermitian matrix.
//!
//! The eigenvalues of `diag(lambda) + k k^H` are the zeros of
//! `w(s) = 1 + sum_n |k_n|^2 / (lambda_n - s)`, so they depend on `k` only
//! through `|k|`. The inverse map recovers `|k|` from the two spectra.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerances for the forward and inverse secular maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecularConfig {
    /// Entries with `|k_n| <= deflation * ||k||` are deflated.
    pub deflation: f64,
    /// Poles closer than `merge * scale` are merged before root search.
    pub merge: f64,
    /// Bracket endpoints sit `shrink * scale` inside each pole.
    pub shrink: f64,
    /// Minimum relative gap between poles for the inverse map.
    pub min_gap: f64,
    /// Slack (relative to scale) allowed when checking interlacing.
    pub interlace_slack: f64,
}

impl Default for SecularConfig {
    fn default() -> Self {
        Self { deflation: 1e-12, merge: 1e-14, shrink: 1e-14, min_gap: 1e-12, interlace_slack: 1e-10 }
    }
}

/// Secular function evaluated relative to `origin`: poles are stored as
/// `delta_n = lambda_n - origin` so that `lambda_n - s = delta_n - tau`.
struct Secular<'a> {
    delta: &'a [f64],
    weight: &'a [f64],
}

impl Secular<'_> {
    fn value_and_slope(&self, tau: f64) -> (f64, f64) {
        let mut value = 1.0;
        let mut slope = 0.0;
        for (&d, &w) in self.delta.iter().zip(self.weight) {
            let gap = d - tau;
            value += w / gap;
            slope += w / (gap * gap);
        }
        (value, slope)
    }

    /// Root of an increasing function on `(lo, hi)` where the sign changes
    /// from negative to positive: safeguarded Newton inside a bisection bracket.
    fn root(&self, mut lo: f64, mut hi: f64) -> f64 {
        let (f_lo, _) = self.value_and_slope(lo);
        if f_lo >= 0.0 {
            return lo;
        }
        let (f_hi, _) = self.value_and_slope(hi);
        if f_hi <= 0.0 {
            return hi;
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let (f, df) = self.value_and_slope(x);
            if f == 0.0 {
                return x;
            }
            if f < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let newton = x - f / df;
            let next = if newton > lo && newton < hi && df.is_finite() && df > 0.0 {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let width = hi - lo;
            if width <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) || next == x {
                return next;
            }
            x = next;
        }
        x
    }
}

/// Eigenvalues of `diag(lambda_b) + k k^H`, in descending order.
pub fn rank_one_update_eigs(lambda_b: &[f64], k: &[Complex64]) -> Result<Vec<f64>> {
    rank_one_update_eigs_with(lambda_b, k, &SecularConfig::default())
}

pub fn rank_one_update_eigs_with(lambda_b: &[f64], k: &[Complex64], cfg: &SecularConfig) -> Result<Vec<f64>> {
    if lambda_b.len() != k.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} eigenvalues against {} update entries",
            lambda_b.len(),
            k.len()
        )));
    }
    let mut pairs: Vec<(f64, f64)> = lambda_b.iter().zip(k).map(|(&l, z)| (l, z.norm_sqr())).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let knorm2: f64 = pairs.iter().map(|p| p.1).sum();
    let spread = pairs.iter().map(|p| p.0.abs()).fold(0.0, f64::max);
    let scale = spread + knorm2;
    let mut out = Vec::with_capacity(pairs.len());
    if knorm2 == 0.0 {
        out.extend(pairs.iter().map(|p| p.0));
        return Ok(out);
    }
    let deflate = (cfg.deflation * knorm2.sqrt()).powi(2);

    // Merge (near-)repeated poles: a unitary rotation in their eigenspace
    // moves the combined weight onto one entry; the others are deflated.
    let mut poles: Vec<(f64, f64)> = Vec::new();
    for (lam, w) in pairs {
        match poles.last_mut() {
            Some(last) if (last.0 - lam).abs() <= cfg.merge * scale => {
                last.1 += w;
                out.push(lam);
            }
            _ => poles.push((lam, w)),
        }
    }
    let mut active: Vec<(f64, f64)> = Vec::with_capacity(poles.len());
    for (lam, w) in poles {
        if w <= deflate {
            out.push(lam);
        } else {
            active.push((lam, w));
        }
    }

    let total: f64 = active.iter().map(|p| p.1).sum();
    let shrink = cfg.shrink * scale;
    let lambdas: Vec<f64> = active.iter().map(|p| p.0).collect();
    let weights: Vec<f64> = active.iter().map(|p| p.1).collect();
    for i in 0..active.len() {
        // Interval above pole i: (lambda_i, lambda_{i-1}) or (lambda_0, lambda_0 + total].
        let lower = lambdas[i];
        let upper = if i == 0 { lambdas[0] + total } else { lambdas[i - 1] };
        let mid = 0.5 * (lower + upper);
        let probe = {
            let delta: Vec<f64> = lambdas.iter().map(|l| l - mid).collect();
            Secular { delta: &delta, weight: &weights }.value_and_slope(0.0).0
        };
        // w increases between poles; w(mid) > 0 puts the root nearer the lower pole.
        let origin = if probe > 0.0 || i == 0 { lower } else { upper };
        let delta: Vec<f64> = lambdas.iter().map(|l| l - origin).collect();
        let f = Secular { delta: &delta, weight: &weights };
        let (lo, hi) = if i == 0 {
            (shrink, total + shrink)
        } else if origin == lower {
            (shrink, 0.5 * (upper - lower))
        } else {
            (-0.5 * (upper - lower), -shrink)
        };
        let (lo, hi) = if lo < hi { (lo, hi) } else { (0.5 * (lo + hi), 0.5 * (lo + hi)) };
        out.push(origin + f.root(lo, hi));
    }
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}

/// Recovers `|k|` from `eig(diag(lambda_b))` and `eig(diag(lambda_b) + k k^H)`.
///
/// The squared magnitudes solve `sum_n |k_n|^2 / (lambda_n - mu_i) = -1` for
/// every updated eigenvalue `mu_i`; the system has the closed-form solution
/// `|k_n|^2 = (mu_n - lambda_n) prod_{j != n} (mu_j - lambda_n) / (lambda_j - lambda_n)`.
/// Output is ordered like `lambda_b` sorted descending.
pub fn recover_k_magnitudes(lambda_b: &[f64], lambda_sum: &[f64]) -> Result<Vec<f64>> {
    recover_k_magnitudes_tol(lambda_b, lambda_sum, &SecularConfig::default())
}

pub fn recover_k_magnitudes_tol(lambda_b: &[f64], lambda_sum: &[f64], cfg: &SecularConfig) -> Result<Vec<f64>> {
    if lambda_b.len() != lambda_sum.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} base eigenvalues against {} updated",
            lambda_b.len(),
            lambda_sum.len()
        )));
    }
    let mut lam = lambda_b.to_vec();
    let mut mu = lambda_sum.to_vec();
    lam.sort_by(|a, b| b.total_cmp(a));
    mu.sort_by(|a, b| b.total_cmp(a));
    let m = lam.len();
    let scale = lam.iter().chain(&mu).map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for w in lam.windows(2) {
        if w[0] - w[1] <= cfg.min_gap * scale {
            return Err(Error::IllConditioned(format!("repeated base eigenvalue near {:.6e}", w[0])));
        }
    }
    let slack = cfg.interlace_slack * scale;
    for i in 0..m {
        let above = if i == 0 { f64::INFINITY } else { lam[i - 1] };
        if mu[i] < lam[i] - slack || mu[i] > above + slack {
            return Err(Error::InfeasibleSpectra(format!(
                "updated eigenvalue {:.6e} outside [{:.6e}, {:.6e}]",
                mu[i], lam[i], above
            )));
        }
    }
    let mut out = Vec::with_capacity(m);
    for n in 0..m {
        let mut eps = (mu[n] - lam[n]).max(0.0);
        for j in 0..m {
            if j != n {
                eps *= ((mu[j] - lam[n]) / (lam[j] - lam[n])).max(0.0);
            }
        }
        out.push(eps.sqrt());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, diag_real, hermitian_eigen, ComplexMatrix};
    use crate::rng::{complex_normal, seeded};
    use nalgebra::DMatrix;
    use rand::Rng;

    fn direct(lambda: &[f64], k: &[Complex64]) -> Vec<f64> {
        let kv = DMatrix::from_fn(k.len(), 1, |i, _| k[i]);
        let m: ComplexMatrix = diag_real(lambda) + &kv * kv.adjoint();
        hermitian_eigen(&m).unwrap().eigenvalues
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn update_of_first_axis() {
        let got = rank_one_update_eigs(&[1.0, 2.0], &[c64(1.0, 0.0), c64(0.0, 0.0)]).unwrap();
        assert!(close(&got, &[2.0, 2.0], 1e-14), "{got:?}");
    }

    #[test]
    fn update_of_zero_matrix() {
        let got = rank_one_update_eigs(&[0.0, 0.0], &[c64(1.0, 0.0), c64(1.0, 0.0)]).unwrap();
        assert!(close(&got, &[2.0, 0.0], 1e-14), "{got:?}");
    }

    #[test]
    fn update_two_by_two() {
        let got = rank_one_update_eigs(&[1.0, 3.0], &[c64(1.0, 0.0), c64(1.0, 0.0)]).unwrap();
        let s = 2f64.sqrt();
        assert!(close(&got, &[3.0 + s, 3.0 - s], 1e-13), "{got:?}");
        assert!(close(&direct(&[1.0, 3.0], &[c64(1.0, 0.0), c64(1.0, 0.0)]), &got, 1e-13));
    }

    #[test]
    fn update_rejects_length_mismatch() {
        assert!(matches!(rank_one_update_eigs(&[1.0], &[]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn recover_unchanged_spectrum() {
        let got = recover_k_magnitudes(&[3.0, 1.0], &[3.0, 1.0]).unwrap();
        assert_eq!(got, vec![0.0, 0.0]);
    }

    #[test]
    fn recover_two_by_two() {
        let s = 2f64.sqrt();
        let got = recover_k_magnitudes(&[1.0, 3.0], &[3.0 + s, 3.0 - s]).unwrap();
        assert!(close(&got, &[1.0, 1.0], 1e-12), "{got:?}");
    }

    #[test]
    fn recover_rejects_bad_spectra() {
        assert!(matches!(recover_k_magnitudes(&[3.0, 1.0], &[3.5, 0.5]), Err(Error::InfeasibleSpectra(_))));
        assert!(matches!(recover_k_magnitudes(&[1.0, 1.0], &[2.0, 1.0]), Err(Error::IllConditioned(_))));
    }

    #[test]
    fn forward_matches_direct_eigensolver_and_inverts() {
        let mut rng = seeded(21);
        for _ in 0..200 {
            let m = rng.random_range(1..6);
            let lambda: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..5.0)).collect();
            let k: Vec<Complex64> = (0..m).map(|_| complex_normal(&mut rng)).collect();
            let got = rank_one_update_eigs(&lambda, &k).unwrap();
            let want = direct(&lambda, &k);
            assert!(close(&got, &want, 1e-11), "{got:?} vs {want:?}");
            let trace: f64 = lambda.iter().sum::<f64>() + k.iter().map(|z| z.norm_sqr()).sum::<f64>();
            assert!((got.iter().sum::<f64>() - trace).abs() <= 1e-9 * trace.abs().max(1.0));

            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| lambda[b].total_cmp(&lambda[a]));
            let gaps_ok = order.windows(2).all(|w| lambda[w[0]] - lambda[w[1]] > 1e-6);
            if gaps_ok {
                let mags = recover_k_magnitudes(&lambda, &got).unwrap();
                for (pos, &idx) in order.iter().enumerate() {
                    assert!((mags[pos] - k[idx].norm()).abs() <= 1e-8, "{mags:?}");
                }
            }
        }
    }

    #[test]
    fn repeated_poles_are_merged() {
        let k = [c64(0.6, 0.0), c64(0.0, 0.8), c64(0.3, 0.0)];
        let lambda = [2.0, 2.0, -1.0];
        let got = rank_one_update_eigs(&lambda, &k).unwrap();
        assert!(close(&got, &direct(&lambda, &k), 1e-12), "{got:?}");
    }

    #[test]
    fn closed_form_matches_linear_system() {
        let mut rng = seeded(5);
        for _ in 0..50 {
            let lambda: Vec<f64> = vec![3.5, 2.0, 1.1, 0.2];
            let k: Vec<Complex64> = (0..4).map(|_| complex_normal(&mut rng)).collect();
            let mu = rank_one_update_eigs(&lambda, &k).unwrap();
            let alpha = DMatrix::from_fn(4, 4, |i, n| 1.0 / (lambda[n] - mu[i]));
            let eps = alpha.lu().solve(&DMatrix::from_element(4, 1, -1.0)).unwrap();
            let mags = recover_k_magnitudes(&lambda, &mu).unwrap();
            for n in 0..4 {
                assert!((mags[n] * mags[n] - eps[(n, 0)]).abs() <= 1e-8 * (1.0 + eps[(n, 0)].abs()));
            }
        }
    }
}
