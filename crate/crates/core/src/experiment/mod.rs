//! Sweep experiments over synthetic and real networks, and their CSV reports.

mod config;
mod report;
mod run;

pub use config::{load_solver_config, ExperimentConfig, ExperimentKind, Method, Preset};
pub use report::{emit_report, mean_se, summarize, ReportFiles, SummaryRow, LONG_SCHEMA, SUMMARY_SCHEMA, TRIALS_SCHEMA};
pub use run::{run_experiment, ExperimentResults, SweepAxis, SweepPoint, TrialOutcome, TrialRecord};
