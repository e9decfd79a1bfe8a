//! Closed-loop scenario harness.
//!
//! A scenario file ([`load_scenario`]) describes the plant preset, the
//! turbine schedule, the strategy and the engine window. [`run_closed_loop`]
//! steps the plant and the advisory engine in lockstep and records every
//! sample; [`export_csv`] writes the series and [`compare`] reports metric
//! deltas between two runs.

mod compare;
mod config;
mod csv_io;
mod run;

pub use compare::{check_timeline, compare, compare_metrics, ComparisonReport, MetricDelta};
pub use config::{
    bundled_scenario, load_scenario, EngineSection, ScenarioConfig, ScenarioFile, StrategySection, BORATION_LIMIT,
    BUNDLED_SCENARIOS, DEFAULT_BUDGET_S, DEFAULT_PLANT_STEP, DILUTION_LIMIT,
};
pub use csv_io::{export_csv, format_sig, load_csv, read_csv, write_csv, CSV_COLUMNS, CSV_DIGITS};
pub use run::{
    run_closed_loop, Metrics, RecommendationSnapshot, RunResult, Sample, WallTimeStats, CONVERGENCE_EPS,
};

use crate::plant::{equilibrium_imbalances, PlantParams};

/// Convergence targets of a recorded series: the equilibrium imbalances at
/// its final turbine power with AO on the reference implied by the AO and
/// AO-deviation columns.
pub fn targets_from_series(samples: &[Sample], params: &PlantParams) -> (f64, f64) {
    match samples.last() {
        Some(s) => equilibrium_imbalances(s.p_turb, s.ao - s.ao_dev, params),
        None => (0.0, 0.0),
    }
}
