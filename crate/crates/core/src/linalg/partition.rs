use std::ops::Range;

use crate::error::{Error, Result};

/// Row/column bookkeeping of the canonical form.
///
/// Rows of `Z` split as `t` (interference), `r` (signal) and `nj = N - J`
/// (signal-free); columns split as `m` primary and `km = K - M` secondary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockPartition {
    t: usize,
    r: usize,
    nj: usize,
    m: usize,
    km: usize,
}

impl BlockPartition {
    pub fn new(t: usize, r: usize, nj: usize, m: usize, km: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidPartition("signal rank r must be at least 1".into()));
        }
        if m == 0 {
            return Err(Error::InvalidPartition("right-subspace rank M must be at least 1".into()));
        }
        if km < t + r + nj {
            return Err(Error::InvalidPartition(format!(
                "secondary data K-M = {km} is smaller than N = {}",
                t + r + nj
            )));
        }
        Ok(Self { t, r, nj, m, km })
    }

    /// Partition from the model dimensions `(N, K, M, t, r)`.
    pub fn from_dims(n: usize, k: usize, m: usize, t: usize, r: usize) -> Result<Self> {
        if t + r > n {
            return Err(Error::InvalidPartition(format!("t + r = {} exceeds N = {n}", t + r)));
        }
        if m > k {
            return Err(Error::InvalidPartition(format!("M = {m} exceeds K = {k}")));
        }
        Self::new(t, r, n - t - r, m, k - m)
    }

    pub fn t(&self) -> usize {
        self.t
    }
    pub fn r(&self) -> usize {
        self.r
    }
    pub fn nj(&self) -> usize {
        self.nj
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn km(&self) -> usize {
        self.km
    }
    /// `J = t + r`.
    pub fn j(&self) -> usize {
        self.t + self.r
    }
    pub fn n(&self) -> usize {
        self.t + self.r + self.nj
    }
    pub fn k(&self) -> usize {
        self.m + self.km
    }
    /// True when the signal-free block is absent (`J = N`).
    pub fn is_full(&self) -> bool {
        self.nj == 0
    }

    pub fn rows1(&self) -> Range<usize> {
        0..self.t
    }
    pub fn rows2(&self) -> Range<usize> {
        self.t..self.t + self.r
    }
    pub fn rows3(&self) -> Range<usize> {
        self.j()..self.n()
    }
    /// Rows of blocks 2 and 3 together.
    pub fn rows23(&self) -> Range<usize> {
        self.t..self.n()
    }
}

impl std::fmt::Display for BlockPartition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "(t={}, r={}, N-J={}, M={}, K-M={})",
            self.t, self.r, self.nj, self.m, self.km
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_short_secondary_data() {
        assert!(BlockPartition::new(1, 1, 2, 1, 3).is_err());
        assert!(BlockPartition::new(1, 1, 2, 1, 4).is_ok());
    }

    #[test]
    fn rejects_zero_signal_rank() {
        assert!(BlockPartition::new(1, 0, 2, 1, 8).is_err());
        assert!(BlockPartition::new(1, 1, 2, 0, 8).is_err());
    }

    #[test]
    fn ranges_cover_rows() {
        let p = BlockPartition::from_dims(6, 16, 2, 1, 2).unwrap();
        assert_eq!(p.rows1(), 0..1);
        assert_eq!(p.rows2(), 1..3);
        assert_eq!(p.rows3(), 3..6);
        assert_eq!(p.km(), 14);
        assert!(!p.is_full());
        assert!(BlockPartition::from_dims(3, 8, 2, 0, 3).unwrap().is_full());
    }
}
