//! Joint UAV placement, transmit power and bandwidth allocation for a
//! terahertz uplink/downlink system, with the supporting numerical audits.

pub mod audit;
pub mod bandwidth;
pub mod error;
pub mod lambert;
pub mod location;
pub mod model;
pub mod optimizer;
pub mod power;
pub mod scenario;
pub mod sweep;

pub use audit::{run_audit, AuditReport, ClaimVerdict};
pub use bandwidth::{min_bandwidth, solve_bandwidth};
pub use error::{Error, Result};
pub use lambert::{lambert_w, Branch};
pub use location::{solve_location, LocationOptions, LocationSolution};
pub use model::{constraint_report, total_objective, ConstraintReport, Decision, RadioConstants, Scenario, UserSpec};
pub use optimizer::{
    exhaustive_search, initial_decision, optimize, run_baseline, BaselineMode, ExhaustiveOptions, OptimizeOptions,
    SolveTrace, TraceEntry,
};
pub use power::{solve_power_all, solve_power_single};
pub use scenario::{generate_scenario, scenario_from_json, scenario_to_json, ScenarioParams};
pub use sweep::{run_sweep, ResultRow, SweepConfig, SweepSpec, SweepVariable};
