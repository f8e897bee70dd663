//! Invariance toolkit for adaptive detection under the I-GMANOVA
//! (interference-augmented generalized MANOVA) signal model.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: complex decompositions, Schur complements, Hermitian roots
//!   and the rank-one (secular equation) spectral maps.
//! - [`model`]: the raw double-subspace hypothesis test, its reduction to
//!   canonical form and seeded data synthesis.
//! - [`invariance`]: the block-triangular transformation group, its action on
//!   the sufficient statistic and the constructive maximality algorithm.
//! - [`mis`]: the maximal invariant statistic, the induced parameter-space
//!   invariant, whitening and the stochastic representation sampler.
//! - [`special`]: closed forms for the classical sub-models and the
//!   eigenvalue statistics of the enlarged groups.

pub mod error;
pub mod invariance;
pub mod linalg;
pub mod mis;
pub mod model;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
pub use invariance::{GroupElement, SufficientStatistic};
pub use linalg::{BlockPartition, ComplexMatrix, SpectralPair};
pub use mis::{InducedInvariant, MisSample, MisValue};
pub use model::{CanonicalModel, Dataset, Hypothesis, ProblemSpec, TrueParams};
