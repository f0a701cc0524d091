//! Batch experiments over ranges of iterate orders: configuration files,
//! parallel orchestration and CSV, JSON and SVG reports.

pub mod config;
pub mod error;
pub mod report;
pub mod run;
pub mod svg;

pub use config::{ExperimentConfig, ExperimentKind, NRange, Target};
pub use error::CliError;
pub use report::{emit_report, CsvRow, ExperimentReport, Outcome, ReportFormat, TaskRecord, CSV_HEADER};
pub use run::{replay, run_experiment};
