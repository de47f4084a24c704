//! Per-user transmit power at fixed UAV position and bandwidth.
//!
//! The delay is strictly decreasing in power, so the optimum is the largest
//! power that satisfies both the power cap and the uplink energy budget
//! `log2(1 + k p) / p >= l`. Binding the energy budget gives
//!
//! ```text
//! p* = -W_{-1}(-c e^{-c}) / (l ln 2) - 1/k,   c = l ln 2 / k,
//! ```
//!
//! and the returned power is `min(p*, P)`. The principal branch only
//! recovers the trivial root `p = 0`.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::lambert::{lambert_w, Branch};
use crate::model::{distance, snr_coefficient, Scenario};

/// Ratios this close to one are treated as infeasible.
const FEASIBILITY_MARGIN: f64 = 1e-12;

/// Below this `1 - c` the argument of W-1 sits too close to -1/e for its
/// rounding to be harmless, and the root is found in shifted variables.
const NEAR_UNITY: f64 = 1e-2;

/// `u - ln(1 + u)`, accurate for small `|u|`.
fn excess(u: f64) -> f64 {
    if u.abs() < 0.1 {
        // u^2/2 - u^3/3 + u^4/4 - ...
        let mut term = -u;
        let mut sum = 0.0;
        for n in 2..40 {
            term *= -u;
            sum += term / n as f64;
        }
        sum
    } else {
        u - u.ln_1p()
    }
}

/// For `c = 1 - delta`, returns `eps > 0` with `-W-1(-c e^{-c}) = 1 + eps`,
/// i.e. the positive root of `excess(eps) = excess(-delta)`.
fn branch_offset(delta: f64) -> f64 {
    let target = excess(-delta);
    let mut eps = delta * (1.0 + 2.0 * delta / 3.0);
    for _ in 0..50 {
        let step = (excess(eps) - target) * (1.0 + eps) / eps;
        eps -= step;
        if step.abs() <= 1e-17 * eps {
            break;
        }
    }
    eps
}

/// Energy-limited power before the cap is applied.
pub fn energy_limited_power(k: f64, l: f64) -> Result<f64> {
    for (name, v) in [("k", k), ("l", l)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::domain(format!("{name} must be positive and finite, got {v}")));
        }
    }
    let c = l * LN_2 / k;
    if c >= 1.0 - FEASIBILITY_MARGIN {
        return Err(Error::EnergyInfeasible { users: vec![] });
    }
    let delta = 1.0 - c;
    if delta < NEAR_UNITY {
        // -W - c = (1 + eps) - (1 - delta)
        return Ok((branch_offset(delta) + delta) / (l * LN_2));
    }
    let w = lambert_w(Branch::Negative, -c * (-c).exp())?;
    // -W/(l ln2) - 1/k, written with a single cancellation
    Ok((-w - c) / (l * LN_2))
}

/// Optimal power for one user with SNR coefficient `k`, rate threshold `l`
/// and power cap `max_power`.
pub fn solve_power_single(k: f64, l: f64, max_power: f64) -> Result<f64> {
    if !(max_power > 0.0) {
        return Err(Error::domain(format!("power cap must be positive, got {max_power}")));
    }
    Ok(energy_limited_power(k, l)?.min(max_power))
}

/// Optimal powers for all users; the problem separates per user.
pub fn solve_power_all(s: &Scenario, x: f64, y: f64, bandwidth: &[f64]) -> Result<Vec<f64>> {
    if bandwidth.len() != s.num_users() {
        return Err(Error::DimensionMismatch { expected: s.num_users(), got: bandwidth.len() });
    }
    let mut out = Vec::with_capacity(bandwidth.len());
    let mut infeasible = Vec::new();
    for (n, (u, &w)) in s.users.iter().zip(bandwidth).enumerate() {
        let d = distance(u, x, y, s.altitude);
        let k = snr_coefficient(w, d, &s.radio)?;
        let l = u.uplink_bits / (w * u.energy_budget);
        match solve_power_single(k, l, s.max_power) {
            Ok(p) => out.push(p),
            Err(Error::EnergyInfeasible { .. }) => infeasible.push(n),
            Err(e) => return Err(e),
        }
    }
    if infeasible.is_empty() {
        Ok(out)
    } else {
        Err(Error::EnergyInfeasible { users: infeasible })
    }
}
