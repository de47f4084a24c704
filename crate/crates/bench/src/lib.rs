//! Fixtures shared by the benchmarks and the scaling test.

use thzuav_core::{generate_scenario, initial_decision, Decision, Scenario, ScenarioParams};

/// Table I scenario with `n` users and its feasible starting decision.
///
/// The energy budget grows with `n` so that large instances stay feasible
/// at the equal-split start.
pub fn fixture(seed: u64, n: usize) -> (Scenario, Decision) {
    let params = ScenarioParams { energy_budget: 8.0 * (n as f64 / 14.0).max(1.0), ..ScenarioParams::default() };
    let s = generate_scenario(seed, n, &params).expect("valid parameters");
    let init = initial_decision(&s).expect("feasible start");
    (s, init)
}
