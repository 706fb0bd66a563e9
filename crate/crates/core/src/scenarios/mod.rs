//! Experiment runners: the convergence grid, the resumption-mode
//! comparison and the contention scenario.

mod comparison;
mod config;
mod contention;
mod grid;
mod metrics;

pub use comparison::{
    prime, resumed_world, run_repetitions, run_resumption_comparison, ComparisonResult, ModeRun,
    Primed, SummaryRow,
};
pub use config::{GridSpec, ScenarioConfig, MB};
pub use contention::{run_contention, ContentionResult, COMPETITOR_FLOW, PRIME_FLOW, RESUMED_FLOW};
pub use grid::{run_convergence_grid, GridCell};
pub use metrics::{compute_utilization, rate_series, FlowMetrics, RunMetrics};
