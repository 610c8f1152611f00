//! Datasets, sub-cost families, regularizers and their first-order oracles.
//!
//! All three losses depend on `w` only through the margin `⟨x_i, w⟩`, so every
//! sub-gradient is a scalar multiple of the feature vector. The optimizers rely
//! on this to store per-point gradients as a single coefficient.

mod dataset;
mod problem;
mod sparse;

pub use dataset::{DataPoint, Dataset};
pub use problem::{Loss, ProblemSpec, Regularizer, SmoothnessProfile, DEFAULT_ITERATE_BOUND};
pub use sparse::SparseVec;
