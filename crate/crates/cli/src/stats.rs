//! Two-sample Kolmogorov-Smirnov test and small summary statistics.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("sample {0} is empty")]
    EmptySample(&'static str),
    #[error("significance level {0} is outside (0, 1)")]
    BadSignificance(f64),
}

/// Sup-distance between empirical CDFs and its asymptotic critical value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub critical: f64,
}

impl KsResult {
    pub fn accepts(&self) -> bool {
        self.statistic < self.critical
    }
}

/// Asymptotic coefficient `c(alpha)`; pinned to `1.628` at `alpha = 0.01`.
pub fn ks_coefficient(alpha: f64) -> Result<f64, StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::BadSignificance(alpha));
    }
    if (alpha - 0.01).abs() < 1e-12 {
        Ok(1.628)
    } else {
        Ok((-0.5 * (alpha / 2.0).ln()).sqrt())
    }
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult, StatsError> {
    ks_two_sample_at(a, b, 0.01)
}

pub fn ks_two_sample_at(a: &[f64], b: &[f64], alpha: f64) -> Result<KsResult, StatsError> {
    if a.is_empty() {
        return Err(StatsError::EmptySample("a"));
    }
    if b.is_empty() {
        return Err(StatsError::EmptySample("b"));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        // Step past every copy of the smallest remaining value in both samples.
        let v = if x[i].total_cmp(&y[j]).is_le() { x[i] } else { y[j] };
        while i < n && x[i] == v {
            i += 1;
        }
        while j < m && y[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let (nf, mf) = (n as f64, m as f64);
    let critical = ks_coefficient(alpha)? * ((nf + mf) / (nf * mf)).sqrt();
    Ok(KsResult { statistic: d, critical })
}

/// Pearson sample correlation; `0` when either sample is constant.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n < 2 {
        return 0.0;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for k in 0..n {
        let (da, db) = (a[k] - ma, b[k] - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}
