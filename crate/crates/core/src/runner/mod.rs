//! Scenario configuration, the comparison grid and sweeps.

mod grid;
mod scenario;
mod sweep;

pub use grid::{grid_id, paper_grid, GRID_BE_COUNTS, GRID_MIXES};
pub use scenario::{parse_scenario, ScenarioSpec, StationGroup};
pub use sweep::{
    summarize, sweep, CellFailure, MetricMeans, SummaryRow, SweepReport, SUMMARY_HEADER,
};
