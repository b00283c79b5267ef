//! Metrics and the simulation harness.

mod metrics;
mod sim;

pub use metrics::{compute_metrics, score_from_components, MetricsReport};
pub use sim::{
    evaluate_forest, read_results_csv, run_ratio_benchmark, run_simulation_cell,
    run_simulation_study, run_univariate_study, write_results_csv, RatioBenchmarkResult,
    ResultRow, SimulationConfig, SimulationResult, UnivariateStudyConfig, UnivariateStudyResult,
};
