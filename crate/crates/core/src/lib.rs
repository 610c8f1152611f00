//! Multi-armed bandit datapoint sampling for stochastic optimization.
//!
//! The core is generic over the working scalar (`f32` or `f64`); the
//! [`f64s`] and [`f32s`] modules fix it for convenience.

// `!(x > 0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod io;
pub mod metrics;
pub mod model;
pub mod optimize;
pub mod sampling;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision aliases.
pub mod f64s {
    pub type Dataset = crate::model::Dataset<f64>;
    pub type DataPoint = crate::model::DataPoint<f64>;
    pub type ProblemSpec = crate::model::ProblemSpec<f64>;
    pub type Sampler = crate::sampling::Sampler<f64>;
    pub type RunConfig = crate::optimize::RunConfig<f64>;
    pub type RunTrace = crate::optimize::RunTrace<f64>;
}

/// Single-precision aliases.
pub mod f32s {
    pub type Dataset = crate::model::Dataset<f32>;
    pub type DataPoint = crate::model::DataPoint<f32>;
    pub type ProblemSpec = crate::model::ProblemSpec<f32>;
    pub type Sampler = crate::sampling::Sampler<f32>;
    pub type RunConfig = crate::optimize::RunConfig<f32>;
    pub type RunTrace = crate::optimize::RunTrace<f32>;
}
