//! Cross-validation, confusion-matrix metrics and the configuration and
//! architecture sweeps.
//!
//! Percentages are kept at full precision and rounded to one decimal only
//! when printed. A recall or precision whose denominator is zero is `None`
//! and prints as `n/a`.

mod cv;
mod folds;
mod metrics;
mod sweep;

pub use cv::{cross_validate, cross_validate_with_folds, mean_std, train_fold, with_jobs, CvResult, CvSpec, FoldOutcome};
pub use folds::{complement, kfold_split, stratified_holdout, stratified_kfold};
pub use metrics::{confusion, fmt_pct, metrics, ConfusionMatrix, MetricsReport};
pub use sweep::{
    run_architecture_sweep, run_config_sweep, run_sweep, CellSummary, Evaluation, FailedRun, ReportRow, SweepCell,
    SweepReport, SweepSpec, SweepSummary, DEFAULT_FOLDS, REPORT_HEADER, SAMPLE_RATES, VALIDATION_FRACTION,
};
