use thiserror::Error;

/// Errors raised by the numerical kernels and the statistics built on them.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is rank deficient (smallest pivot {pivot:.3e}, threshold {threshold:.3e})")]
    RankDeficient { pivot: f64, threshold: f64 },

    #[error("input columns are not orthonormal (deviation {deviation:.3e})")]
    NotIsometry { deviation: f64 },

    #[error("matrix is not Hermitian positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("spectra are not compatible with a rank-one update: {0}")]
    InfeasibleSpectra(String),

    #[error("ill-conditioned input: {0}")]
    IllConditioned(String),

    #[error("hypothesis label does not match the signal parameters: {0}")]
    LabelMismatch(String),

    #[error("insufficient secondary data: {0}")]
    InsufficientSecondaryData(String),

    #[error("unsupported partition for this operation: {0}")]
    UnsupportedBranch(String),

    #[error("statistics are not equivalent (relative MIS deviation {deviation:.3e})")]
    NotEquivalent { deviation: f64 },

    #[error("matrix is not rank one (second eigenvalue ratio {ratio:.3e})")]
    NotRankOne { ratio: f64 },

    #[error("matrix lacks the block structure of the group: {0}")]
    NotInGroup(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
