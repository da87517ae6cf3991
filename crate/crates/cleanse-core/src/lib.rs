//! Removal of mislabeled training instances by surrogate-model black-box
//! optimization.
//!
//! The training subset is encoded as an n-bit selection vector. A quadratic
//! surrogate of the (log-transformed) validation loss is refit from all
//! evaluated selections, turned into a QUBO matrix, and handed to an
//! annealing sampler; the lowest-energy previously-unseen sample is accepted,
//! evaluated against the validation split, and fed back into the surrogate.
//!
//! Modules follow the pipeline:
//! - [`bits`]: packed bit-vectors shared by inputs, selections and samples
//! - [`task_data`]: the noisy majority-bit benchmark datasets
//! - [`base_learner`]: L2-regularized logistic regression and log-loss
//! - [`surrogate`]: feature expansion, ridge fit, QUBO extraction
//! - [`samplers`]: simulated annealing, simulated quantum annealing,
//!   uniform-random and exhaustive QUBO samplers
//! - [`engine`]: the sequential optimization loop with postprocessing

pub mod base_learner;
pub mod bits;
pub mod engine;
mod error;
pub mod samplers;
pub mod surrogate;
pub mod task_data;

pub use error::{Error, Result};
