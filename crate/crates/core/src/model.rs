//! Channel, rate and delay model for a single THz UAV serving ground users.
//!
//! Everything here is SI: meters, hertz, watts, joules, bits and seconds.
//! Decibel quantities only exist on [`RadioConstants`], which keeps the
//! values it was built from so scenarios serialize back unchanged.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};

/// Physical constants of the radio link.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioConstants {
    h0_db: f64,
    sigma2_dbm_per_hz: f64,
    h0: f64,
    sigma2: f64,
    absorption: f64,
    frequency: f64,
}

impl RadioConstants {
    /// Builds the constants from the decibel form used in scenario files:
    /// reference gain in dB and noise spectral density in dBm/Hz.
    pub fn from_db(h0_db: f64, sigma2_dbm_per_hz: f64, absorption: f64, frequency: f64) -> Result<Self> {
        if !h0_db.is_finite() || !sigma2_dbm_per_hz.is_finite() {
            return Err(Error::InvalidScenario("radio dB values must be finite".into()));
        }
        let h0 = 10f64.powf(h0_db / 10.0);
        let sigma2 = 10f64.powf(sigma2_dbm_per_hz / 10.0) * 1e-3;
        Self::checked(h0_db, sigma2_dbm_per_hz, h0, sigma2, absorption, frequency)
    }

    /// Builds the constants from linear values (gain, W/Hz).
    pub fn linear(h0: f64, sigma2: f64, absorption: f64, frequency: f64) -> Result<Self> {
        let h0_db = 10.0 * h0.log10();
        let sigma2_dbm_per_hz = 10.0 * (sigma2 * 1e3).log10();
        Self::checked(h0_db, sigma2_dbm_per_hz, h0, sigma2, absorption, frequency)
    }

    fn checked(
        h0_db: f64,
        sigma2_dbm_per_hz: f64,
        h0: f64,
        sigma2: f64,
        absorption: f64,
        frequency: f64,
    ) -> Result<Self> {
        if !(h0 > 0.0 && h0.is_finite()) {
            return Err(Error::InvalidScenario(format!("h0 must be positive, got {h0}")));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidScenario(format!("sigma2 must be positive, got {sigma2}")));
        }
        if !(absorption >= 0.0 && absorption.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "absorption coefficient must be non-negative, got {absorption}"
            )));
        }
        if !(frequency > 0.0 && frequency.is_finite()) {
            return Err(Error::InvalidScenario(format!("frequency must be positive, got {frequency}")));
        }
        Ok(RadioConstants { h0_db, sigma2_dbm_per_hz, h0, sigma2, absorption, frequency })
    }

    /// Reference channel gain at 1 m, linear.
    pub fn h0(&self) -> f64 {
        self.h0
    }

    /// Noise power spectral density, W/Hz.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Molecular absorption coefficient, 1/m.
    pub fn absorption(&self) -> f64 {
        self.absorption
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    pub fn h0_db(&self) -> f64 {
        self.h0_db
    }

    pub fn sigma2_dbm_per_hz(&self) -> f64 {
        self.sigma2_dbm_per_hz
    }

    /// Copy with a different absorption coefficient.
    pub fn with_absorption(&self, absorption: f64) -> Result<Self> {
        Self::checked(self.h0_db, self.sigma2_dbm_per_hz, self.h0, self.sigma2, absorption, self.frequency)
    }
}

/// One ground user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSpec {
    pub x: f64,
    pub y: f64,
    /// Uplink payload, bits.
    pub uplink_bits: f64,
    /// Downlink payload, bits.
    pub downlink_bits: f64,
    /// Uplink energy budget, J.
    pub energy_budget: f64,
}

/// A full problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub users: Vec<UserSpec>,
    pub radio: RadioConstants,
    /// UAV altitude, m.
    pub altitude: f64,
    /// UAV transmit power, W.
    pub uav_power: f64,
    /// Per-user transmit power limit, W.
    pub max_power: f64,
    /// Total bandwidth shared by all users, Hz.
    pub total_bandwidth: f64,
    pub area_side: f64,
    pub seed: Option<u64>,
}

impl Scenario {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// Checks the instance invariants.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if self.users.is_empty() {
            return bad("at least one user is required".into());
        }
        for (name, v) in [
            ("altitude", self.altitude),
            ("uav_power", self.uav_power),
            ("max_power", self.max_power),
            ("total_bandwidth", self.total_bandwidth),
            ("area_side", self.area_side),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        for (n, u) in self.users.iter().enumerate() {
            if !(u.uplink_bits > 0.0 && u.downlink_bits > 0.0 && u.energy_budget > 0.0) {
                return bad(format!("user {n}: payloads and energy budget must be positive"));
            }
            let inside = |c: f64| (0.0..=self.area_side).contains(&c);
            if !inside(u.x) || !inside(u.y) {
                return bad(format!("user {n} at ({}, {}) lies outside the area", u.x, u.y));
            }
        }
        Ok(())
    }

    /// Distance from user `n` to a UAV hovering at (x, y).
    pub fn distance(&self, n: usize, x: f64, y: f64) -> f64 {
        distance(&self.users[n], x, y, self.altitude)
    }
}

/// One candidate solution: UAV position plus per-user power and bandwidth.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Decision {
    pub x: f64,
    pub y: f64,
    pub power: Vec<f64>,
    pub bandwidth: Vec<f64>,
}

impl Decision {
    pub(crate) fn check_dims(&self, n: usize) -> Result<()> {
        for got in [self.power.len(), self.bandwidth.len()] {
            if got != n {
                return Err(Error::DimensionMismatch { expected: n, got });
            }
        }
        Ok(())
    }
}

/// Per-user quantities derived from a scenario and a decision.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkDerived {
    pub distance: f64,
    pub gain: f64,
    /// SNR per watt of transmit power, 1/W.
    pub snr_coefficient: f64,
    /// Energy-constraint rate threshold D / (w Q).
    pub rate_threshold: f64,
    /// One plus the uplink SNR.
    pub snr_plus_one: f64,
    pub uplink_rate: f64,
    pub downlink_rate: f64,
    pub uplink_delay: f64,
    pub downlink_delay: f64,
}

/// Residuals of the bandwidth, power and energy constraints.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ConstraintReport {
    pub bandwidth_residual: f64,
    pub power_violations: Vec<f64>,
    pub energy_violations: Vec<f64>,
    pub feasible: bool,
}

pub const BANDWIDTH_TOL: f64 = 1e-9;
pub const POWER_TOL: f64 = 1e-12;
pub const ENERGY_TOL: f64 = 1e-9;

/// UAV-to-user distance with the UAV at altitude `altitude` above (x, y).
pub fn distance(user: &UserSpec, x: f64, y: f64, altitude: f64) -> f64 {
    let dx = x - user.x;
    let dy = y - user.y;
    (dx * dx + dy * dy + altitude * altitude).sqrt()
}

/// Path gain `d^-2 exp(-a d)`.
pub fn channel_gain(d: f64, absorption: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::domain(format!("distance must be positive, got {d}")));
    }
    Ok((-absorption * d).exp() / (d * d))
}

/// SNR obtained per watt of transmit power over bandwidth `w` at distance `d`.
pub fn snr_coefficient(w: f64, d: f64, radio: &RadioConstants) -> Result<f64> {
    if !(w > 0.0) {
        return Err(Error::domain(format!("bandwidth must be positive, got {w}")));
    }
    let gain = channel_gain(d, radio.absorption)?;
    Ok(radio.h0 * gain / (w * radio.sigma2))
}

/// Shannon rate `w log2(1 + k p)`; serves both link directions.
pub fn link_rate(power: f64, w: f64, k: f64) -> f64 {
    w * (k * power).ln_1p() / LN_2
}

pub fn uplink_rate(p: f64, w: f64, k: f64) -> f64 {
    link_rate(p, w, k)
}

pub fn downlink_rate(q: f64, w: f64, k: f64) -> f64 {
    link_rate(q, w, k)
}

/// Time to move `bits` at `rate`; infinite when the rate is zero.
pub fn transfer_delay(bits: f64, rate: f64) -> f64 {
    if rate > 0.0 {
        bits / rate
    } else {
        f64::INFINITY
    }
}

pub fn uplink_delay(bits: f64, rate: f64) -> f64 {
    transfer_delay(bits, rate)
}

pub fn downlink_delay(bits: f64, rate: f64) -> f64 {
    transfer_delay(bits, rate)
}

/// Derived link quantities for every user.
pub fn derive_links(s: &Scenario, dec: &Decision) -> Result<Vec<LinkDerived>> {
    dec.check_dims(s.num_users())?;
    s.users
        .iter()
        .enumerate()
        .map(|(n, u)| {
            let p = dec.power[n];
            let w = dec.bandwidth[n];
            let d = distance(u, dec.x, dec.y, s.altitude);
            let gain = channel_gain(d, s.radio.absorption)?;
            let k = snr_coefficient(w, d, &s.radio)?;
            let r_up = uplink_rate(p, w, k);
            let r_dn = downlink_rate(s.uav_power, w, k);
            Ok(LinkDerived {
                distance: d,
                gain,
                snr_coefficient: k,
                rate_threshold: u.uplink_bits / (w * u.energy_budget),
                snr_plus_one: 1.0 + k * p,
                uplink_rate: r_up,
                downlink_rate: r_dn,
                uplink_delay: uplink_delay(u.uplink_bits, r_up),
                downlink_delay: downlink_delay(u.downlink_bits, r_dn),
            })
        })
        .collect()
}

/// Total uplink plus downlink delay over all users, seconds.
pub fn total_objective(s: &Scenario, dec: &Decision) -> Result<f64> {
    Ok(derive_links(s, dec)?
        .iter()
        .map(|l| l.uplink_delay + l.downlink_delay)
        .sum())
}

pub fn constraint_report(s: &Scenario, dec: &Decision) -> Result<ConstraintReport> {
    let links = derive_links(s, dec)?;
    let total: f64 = dec.bandwidth.iter().sum();
    let bandwidth_residual = (total - s.total_bandwidth).abs() / s.total_bandwidth;
    let power_violations: Vec<f64> = dec.power.iter().map(|&p| (p - s.max_power).max(0.0)).collect();
    let energy_violations: Vec<f64> = links
        .iter()
        .zip(&s.users)
        .zip(&dec.power)
        .map(|((l, u), &p)| (l.uplink_delay * p - u.energy_budget).max(0.0))
        .collect();
    let positive = dec.power.iter().chain(&dec.bandwidth).all(|&v| v > 0.0);
    let feasible = positive
        && bandwidth_residual <= BANDWIDTH_TOL
        && power_violations.iter().all(|&v| v <= POWER_TOL)
        && energy_violations.iter().all(|&v| v <= ENERGY_TOL);
    Ok(ConstraintReport { bandwidth_residual, power_violations, energy_violations, feasible })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radio() -> RadioConstants {
        RadioConstants::from_db(-40.0, -174.0, 0.005, 1.2e12).unwrap()
    }

    fn user(x: f64, y: f64) -> UserSpec {
        UserSpec { x, y, uplink_bits: 1e13, downlink_bits: 8e12, energy_budget: 8.0 }
    }

    fn scenario(users: Vec<UserSpec>) -> Scenario {
        Scenario {
            users,
            radio: radio(),
            altitude: 20.0,
            uav_power: 2.0,
            max_power: 0.1,
            total_bandwidth: 100e9,
            area_side: 50.0,
            seed: None,
        }
    }

    #[test]
    fn distance_directly_below() {
        assert_eq!(distance(&user(0.0, 0.0), 0.0, 0.0, 20.0), 20.0);
    }

    #[test]
    fn distance_matches_euclid() {
        let d = distance(&user(30.0, 40.0), 0.0, 0.0, 0.001);
        let expected = (30f64.powi(2) + 40f64.powi(2) + 1e-6).sqrt();
        assert!((d - expected).abs() < 1e-12);
        assert!((d - 50.0).abs() < 1e-7);
    }

    #[test]
    fn gain_values() {
        assert_eq!(channel_gain(1.0, 0.0).unwrap(), 1.0);
        let g = channel_gain(10.0, 0.005).unwrap();
        assert!((g - 1e-2 * (-0.05f64).exp()).abs() < 1e-17);
        assert!(channel_gain(20.0, 0.005).unwrap() < g);
        assert!(channel_gain(0.0, 0.005).is_err());
        assert!(channel_gain(-1.0, 0.005).is_err());
    }

    #[test]
    fn snr_coefficient_footnote_magnitude() {
        let k = snr_coefficient(10e9, 10.0, &radio()).unwrap();
        let direct = 1e-4 / (10e9 * 100.0 * 0.05f64.exp() * 10f64.powf(-17.4) * 1e-3);
        assert!((k - direct).abs() / direct < 1e-12);
        // 1 + k p with p = 1 mW lands just under 25 under these constants
        assert!((1.0 + k * 1e-3 - 24.8938).abs() < 1e-3);
    }

    #[test]
    fn snr_coefficient_scaling() {
        let r = radio();
        let k1 = snr_coefficient(5e9, 30.0, &r).unwrap();
        let k2 = snr_coefficient(10e9, 30.0, &r).unwrap();
        assert!((k1 / k2 - 2.0).abs() < 1e-14);
        let r0 = r.with_absorption(0.0).unwrap();
        let k0 = snr_coefficient(5e9, 30.0, &r0).unwrap();
        assert!((k0 - r.h0() / (5e9 * 900.0 * r.sigma2())).abs() / k0 < 1e-14);
        assert!(snr_coefficient(0.0, 30.0, &r).is_err());
        assert!(snr_coefficient(1.0, 0.0, &r).is_err());
    }

    #[test]
    fn rate_values() {
        assert_eq!(uplink_rate(0.0, 1e9, 5.0), 0.0);
        assert!((uplink_rate(1.0, 1.0, 1.0) - 1.0).abs() < 1e-15);
        let r = uplink_rate(23.0, 10e9, 1.0);
        assert!((r - 10e9 * 24f64.log2()).abs() / r < 1e-14);
        assert_eq!(uplink_rate(0.3, 2e9, 7.0), downlink_rate(0.3, 2e9, 7.0));
    }

    #[test]
    fn delay_values() {
        assert_eq!(uplink_delay(10.0, 5.0), 2.0);
        assert_eq!(downlink_delay(10.0, 0.0), f64::INFINITY);
    }

    #[test]
    fn zero_power_gives_infinite_objective() {
        let s = scenario(vec![user(10.0, 10.0)]);
        let dec = Decision { x: 10.0, y: 10.0, power: vec![0.0], bandwidth: vec![100e9] };
        assert_eq!(total_objective(&s, &dec).unwrap(), f64::INFINITY);
        assert!(!constraint_report(&s, &dec).unwrap().feasible);
    }

    #[test]
    fn table_one_delay_is_finite() {
        let s = scenario(vec![user(10.0, 10.0)]);
        let dec = Decision { x: 25.0, y: 25.0, power: vec![0.1], bandwidth: vec![100e9] };
        let links = derive_links(&s, &dec).unwrap();
        assert!(links[0].uplink_delay.is_finite() && links[0].uplink_delay > 0.0);
    }

    #[test]
    fn objective_mirror_symmetry() {
        let a = scenario(vec![user(10.0, 10.0)]);
        let b = scenario(vec![user(40.0, 40.0)]);
        let da = Decision { x: 20.0, y: 15.0, power: vec![0.05], bandwidth: vec![100e9] };
        let db = Decision { x: 30.0, y: 35.0, ..da.clone() };
        let fa = total_objective(&a, &da).unwrap();
        let fb = total_objective(&b, &db).unwrap();
        assert!((fa - fb).abs() <= 1e-12 * fa);
    }

    #[test]
    fn objective_decreasing_in_power() {
        let s = scenario(vec![user(10.0, 10.0), user(30.0, 40.0)]);
        let mut dec = Decision { x: 25.0, y: 25.0, power: vec![0.02, 0.05], bandwidth: vec![50e9, 50e9] };
        let mut prev = total_objective(&s, &dec).unwrap();
        for _ in 0..10 {
            dec.power[1] *= 1.2;
            let next = total_objective(&s, &dec).unwrap();
            assert!(next < prev);
            prev = next;
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let s = scenario(vec![user(10.0, 10.0)]);
        let dec = Decision { x: 0.0, y: 0.0, power: vec![0.1, 0.1], bandwidth: vec![1.0] };
        assert_eq!(total_objective(&s, &dec), Err(Error::DimensionMismatch { expected: 1, got: 2 }));
    }

    #[test]
    fn constraint_report_cases() {
        let s = scenario(vec![user(10.0, 10.0), user(30.0, 40.0)]);
        let dec = Decision { x: 20.0, y: 25.0, power: vec![0.01, 0.11], bandwidth: vec![50e9, 50e9] };
        let r = constraint_report(&s, &dec).unwrap();
        assert_eq!(r.bandwidth_residual, 0.0);
        assert_eq!(r.power_violations[0], 0.0);
        assert!((r.power_violations[1] - 0.01).abs() < 1e-15);
        assert!(!r.feasible);
    }

    #[test]
    fn energy_violation_found_by_shrinking_bandwidth() {
        let s = scenario(vec![user(10.0, 10.0), user(30.0, 40.0)]);
        let energy = |w: f64| {
            let dec = Decision { x: 20.0, y: 25.0, power: vec![0.1, 0.1], bandwidth: vec![w, 100e9 - w] };
            derive_links(&s, &dec).unwrap()[0].uplink_delay * 0.1
        };
        // bisection for the bandwidth where user 0 spends exactly its budget
        let (mut lo, mut hi) = (1.0, 99e9);
        assert!(energy(lo) > 8.0 && energy(hi) < 8.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if energy(mid) > 8.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let w = lo * 0.5;
        let dec = Decision { x: 20.0, y: 25.0, power: vec![0.1, 0.1], bandwidth: vec![w, 100e9 - w] };
        let r = constraint_report(&s, &dec).unwrap();
        assert!(r.energy_violations[0] > 0.0);
        assert_eq!(r.energy_violations[1], 0.0);
        assert!(!r.feasible);
    }

    #[test]
    fn db_conversion() {
        let r = radio();
        assert!((r.h0() - 1e-4).abs() < 1e-18);
        assert!((r.sigma2() - 3.981e-21).abs() / 3.981e-21 < 1e-3);
        assert_eq!(r.h0_db(), -40.0);
        assert!(RadioConstants::from_db(-40.0, -174.0, -0.1, 1e12).is_err());
    }
}
