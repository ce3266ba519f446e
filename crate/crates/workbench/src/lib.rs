//! Benchmark harness: runs every forecaster on every region of a dataset,
//! aggregates the regional forecasts into a national one, and writes error
//! tables, forecast CSVs, search logs and weekly plots.

pub mod config;
pub mod data;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod plot;
pub mod report;

pub use config::BenchConfig;
pub use data::{load_dataset, prepare, Prepared, PreparedRegion};
pub use error::{BenchError, Result};
pub use output::{read_series_table, write_outcome};
pub use pipeline::{conv_baselines, run_benchmark, run_search, BenchOutcome};
pub use plot::{render_weekly_plot, WeekData};
pub use report::{build_report, evaluate, EvaluationReport, Metrics, ReportRow};
