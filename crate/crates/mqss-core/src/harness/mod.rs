//! Experiment front end: configuration, seeded Monte Carlo trial execution,
//! proportion statistics with Wilson intervals, and deterministic reports.

pub mod config;
pub mod report;
pub mod trials;

pub use config::{load_config, ConfigError, ExperimentConfig, ProtocolKind, ReportFormat};
pub use report::{render_detect_report, render_run_report, render_sweep_report, write_text};
pub use trials::{
    detect_curves, run_trials, sweep_photon_count, DetectRow, MetricSummary, SummaryStats,
    SweepRow, TrialRecord,
};
