//! Inference and the seen / unseen / cross evaluation harness.

mod evaluate;
mod infer;

pub use evaluate::{
    eval_pairs, evaluate, rt60_histogram, EvalMode, EvalOutcome, EvalPair, EvalRecord, EvalSpec, MetricKind, HISTOGRAM_HEADER,
    HIST_BIN, HIST_BINS, REPORT_PREFIX, SAMPLES_HEADER, STRATA_HEADER,
};
pub use infer::{CallCounts, SourceKind, System, Variant};
