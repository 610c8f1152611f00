//! Stochastic optimizers driven by a pluggable datapoint sampler.

pub(crate) mod estimator;
mod run;
mod schedule;
mod step;
mod trace;

pub use estimator::{EstimatorKind, EstimatorState, GradientEstimate, ProxSvrgState, SagaState};
pub use run::{build_sampler, reward_bounds, run, run_with_sampler, BoundSource, RunConfig, SamplerConfig};
pub use schedule::StepSchedule;
pub use step::{apply_step, prox_sgd_step, sgd_step, Method, SgdState};
pub use trace::{
    weighted_average_iterate, Checkpoint, RunTrace, StepRecord, TraceOptions, VerificationHistory, WeightedAverage,
};
