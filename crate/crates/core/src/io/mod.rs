//! Dataset sources and result serialization.

mod libsvm;
mod summary;
mod synthetic;
mod trace;

pub use libsvm::{parse_libsvm, parse_libsvm_str, read_libsvm, write_libsvm, LabelMode, LibsvmOptions};
pub use summary::{
    float_repr, read_summary, read_summary_file, write_summary, write_summary_file, Aggregate, RepeatSummary,
    RunSummary, SUMMARY_SCHEMA_VERSION,
};
pub use synthetic::{generate_synthetic, scale_for_tau, tau_of_scale, SyntheticConfig, FEATURE_STD_FLOOR};
pub use trace::{
    format_float, read_trace, read_trace_file, write_trace, write_trace_file, TRACE_COLUMNS, TRACE_SCHEMA_VERSION,
};
