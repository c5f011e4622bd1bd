//! Scenario definition, closed-loop simulation, metrics, and benchmarks.

mod bench;
mod scenario;
mod sim;
mod terrain;

pub use bench::{
    benchmark_sdf, compare_modes, loglog_slope, CompareReport, SdfBenchReport, SdfBenchRow,
};
pub use scenario::{GaitSpec, RunSpec, Scenario, ScenarioError, SolverSpec};
pub use sim::{
    build_perception, initial_state, make_controller, run_on_perception, run_scenario,
    write_metrics, write_telemetry, write_trajectory, HarnessError, PerceptionProducts,
    RunMetrics, RunResult, TrajectorySample,
};
pub use terrain::{TerrainError, TerrainSpec};
