//! Self-training for tabular classification with fixed-threshold, curriculum
//! and likelihood-regularized pseudo-labeling.
//!
//! The pieces compose bottom-up: [`tabdata`] loads and splits data,
//! [`learners`] provides the base classifiers, [`likelihood`] scores how well
//! a row fits the empirical feature distribution of a class, [`pseudolabel`]
//! turns classifier confidence (optionally regularized by that likelihood)
//! into pseudo-label batches, and [`selftrain`] runs the retraining cycle.
//! [`bench`] wires everything into cross-validated experiments.

pub mod bench;
pub mod error;
pub mod learners;
pub mod likelihood;
pub mod metrics;
pub mod pseudolabel;
pub mod selftrain;
pub mod tabdata;

pub use error::{Error, Result};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator for one purpose (`stream`) under a user seed.
pub(crate) fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
