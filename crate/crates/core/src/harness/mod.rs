//! Experiment runner: seeded repetitions, record files, sweeps and reports.

mod config;
mod report;
mod runner;

pub use config::{
    default_fractions, BudgetRule, ExperimentConfig, FidelityConfig, Method, ResolvedConfig, SweepKind, SweepSpec,
};
pub use report::{collect, report, summarize, CurvePoint, Report, SummaryRow, SUMMARY_CSV, SUMMARY_JSON};
pub use runner::{
    read_records, render_records, run_experiment, run_resolved, run_sweep, thread_pool, BlockMetadata, Experiment,
    ExperimentOutcome, ExperimentRecord, Status, SCHEMA_VERSION,
};
