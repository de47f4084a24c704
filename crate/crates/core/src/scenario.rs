//! Scenario generation and the JSON scenario format.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{RadioConstants, Scenario, UserSpec};

pub const TBIT: f64 = 1e12;
pub const GHZ: f64 = 1e9;

/// Constants used to generate random scenarios. Defaults follow the
/// reference system parameters (50 m square, 100 GHz, 2 W UAV, 0.1 W users).
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    pub area_side: f64,
    pub altitude: f64,
    pub uav_power: f64,
    pub max_power: f64,
    pub total_bandwidth: f64,
    /// Per-user uplink energy budget, J (same for every user).
    pub energy_budget: f64,
    pub h0_db: f64,
    pub sigma2_dbm_per_hz: f64,
    pub absorption: f64,
    pub frequency: f64,
    /// Uplink payloads, bits; assigned to users by cycling.
    pub uplink_cycle: Vec<f64>,
    /// Downlink payloads, bits; assigned to users by cycling.
    pub downlink_cycle: Vec<f64>,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            area_side: 50.0,
            altitude: 20.0,
            uav_power: 2.0,
            max_power: 0.1,
            total_bandwidth: 100.0 * GHZ,
            energy_budget: 8.0,
            h0_db: -40.0,
            sigma2_dbm_per_hz: -174.0,
            absorption: 0.005,
            frequency: 1.2e12,
            uplink_cycle: vec![10.0 * TBIT, 8.0 * TBIT, 6.0 * TBIT, 4.0 * TBIT],
            downlink_cycle: vec![8.0 * TBIT, 6.4 * TBIT, 4.8 * TBIT, 3.2 * TBIT],
        }
    }
}

/// Draws `num_users` users uniformly on the square area and assigns
/// payloads by cycling the configured lists. Identical seeds give identical
/// scenarios, and the first `m` users do not depend on `num_users`.
pub fn generate_scenario(seed: u64, num_users: usize, params: &ScenarioParams) -> Result<Scenario> {
    if num_users == 0 {
        return Err(Error::InvalidScenario("at least one user is required".into()));
    }
    if params.uplink_cycle.is_empty() || params.downlink_cycle.is_empty() {
        return Err(Error::InvalidScenario("payload lists must not be empty".into()));
    }
    let radio = RadioConstants::from_db(
        params.h0_db,
        params.sigma2_dbm_per_hz,
        params.absorption,
        params.frequency,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users = (0..num_users)
        .map(|n| {
            let x = rng.gen::<f64>() * params.area_side;
            let y = rng.gen::<f64>() * params.area_side;
            UserSpec {
                x,
                y,
                uplink_bits: params.uplink_cycle[n % params.uplink_cycle.len()],
                downlink_bits: params.downlink_cycle[n % params.downlink_cycle.len()],
                energy_budget: params.energy_budget,
            }
        })
        .collect();
    let s = Scenario {
        users,
        radio,
        altitude: params.altitude,
        uav_power: params.uav_power,
        max_power: params.max_power,
        total_bandwidth: params.total_bandwidth,
        area_side: params.area_side,
        seed: Some(seed),
    };
    s.validate()?;
    Ok(s)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UserJson {
    x_m: f64,
    y_m: f64,
    #[serde(rename = "D_bits")]
    d_bits: f64,
    #[serde(rename = "E_bits")]
    e_bits: f64,
    #[serde(rename = "Q_joules")]
    q_joules: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RadioJson {
    h0_db: f64,
    sigma2_dbm_per_hz: f64,
    a_per_m: f64,
    f_hz: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioJson {
    users: Vec<UserJson>,
    radio: RadioJson,
    #[serde(rename = "H_m")]
    h_m: f64,
    q_watts: f64,
    #[serde(rename = "P_watts")]
    p_watts: f64,
    #[serde(rename = "B_W_hz")]
    bw_hz: f64,
    area_side_m: f64,
    #[serde(default)]
    seed: Option<u64>,
}

/// Pretty-printed JSON for a scenario.
pub fn scenario_to_json(s: &Scenario) -> String {
    let doc = ScenarioJson {
        users: s
            .users
            .iter()
            .map(|u| UserJson {
                x_m: u.x,
                y_m: u.y,
                d_bits: u.uplink_bits,
                e_bits: u.downlink_bits,
                q_joules: u.energy_budget,
            })
            .collect(),
        radio: RadioJson {
            h0_db: s.radio.h0_db(),
            sigma2_dbm_per_hz: s.radio.sigma2_dbm_per_hz(),
            a_per_m: s.radio.absorption(),
            f_hz: s.radio.frequency(),
        },
        h_m: s.altitude,
        q_watts: s.uav_power,
        p_watts: s.max_power,
        bw_hz: s.total_bandwidth,
        area_side_m: s.area_side,
        seed: s.seed,
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("scenario serializes");
    out.push('\n');
    out
}

/// Parses and validates a scenario document. Unknown keys are rejected.
pub fn scenario_from_json(text: &str) -> Result<Scenario> {
    let doc: ScenarioJson = serde_json::from_str(text)?;
    let radio = RadioConstants::from_db(
        doc.radio.h0_db,
        doc.radio.sigma2_dbm_per_hz,
        doc.radio.a_per_m,
        doc.radio.f_hz,
    )?;
    let s = Scenario {
        users: doc
            .users
            .into_iter()
            .map(|u| UserSpec {
                x: u.x_m,
                y: u.y_m,
                uplink_bits: u.d_bits,
                downlink_bits: u.e_bits,
                energy_budget: u.q_joules,
            })
            .collect(),
        radio,
        altitude: doc.h_m,
        uav_power: doc.q_watts,
        max_power: doc.p_watts,
        total_bandwidth: doc.bw_hz,
        area_side: doc.area_side_m,
        seed: doc.seed,
    };
    s.validate()?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn payload_lists_in_order() {
        let s = generate_scenario(1, 4, &ScenarioParams::default()).unwrap();
        let d: Vec<f64> = s.users.iter().map(|u| u.uplink_bits / TBIT).collect();
        assert_eq!(d, vec![10.0, 8.0, 6.0, 4.0]);
        let e: Vec<f64> = s.users.iter().map(|u| u.downlink_bits).collect();
        assert_eq!(e, vec![8e12, 6.4e12, 4.8e12, 3.2e12]);
    }

    #[test]
    fn payloads_cycle_past_the_list() {
        let s = generate_scenario(1, 6, &ScenarioParams::default()).unwrap();
        let d: Vec<f64> = s.users.iter().map(|u| u.uplink_bits / TBIT).collect();
        assert_eq!(d, vec![10.0, 8.0, 6.0, 4.0, 10.0, 8.0]);
    }

    #[test]
    fn generation_is_deterministic_and_prefix_stable() {
        let p = ScenarioParams::default();
        let a = generate_scenario(7, 14, &p).unwrap();
        assert_eq!(a, generate_scenario(7, 14, &p).unwrap());
        let b = generate_scenario(7, 4, &p).unwrap();
        assert_eq!(&a.users[..4], &b.users[..]);
        assert_ne!(a, generate_scenario(8, 14, &p).unwrap());
        assert!(a.users.iter().all(|u| (0.0..=50.0).contains(&u.x) && (0.0..=50.0).contains(&u.y)));
    }

    #[test]
    fn zero_users_rejected() {
        assert!(generate_scenario(1, 0, &ScenarioParams::default()).is_err());
    }

    #[test]
    fn parser_converts_db_and_rejects_unknown_keys() {
        let s = generate_scenario(3, 2, &ScenarioParams::default()).unwrap();
        let text = scenario_to_json(&s);
        let back = scenario_from_json(&text).unwrap();
        assert!((back.radio.h0() - 1e-4).abs() < 1e-18);
        assert_eq!(back, s);

        let tampered = text.replacen("\"H_m\"", "\"altitude\": 3, \"H_m\"", 1);
        assert!(matches!(scenario_from_json(&tampered), Err(Error::Parse(_))));
        let tampered = text.replacen("\"x_m\"", "\"z_m\": 0.0, \"x_m\"", 1);
        assert!(scenario_from_json(&tampered).is_err());
    }

    #[test]
    fn parser_validates_ranges() {
        let s = generate_scenario(3, 2, &ScenarioParams::default()).unwrap();
        let text = scenario_to_json(&s).replace("\"H_m\": 20.0", "\"H_m\": -1.0");
        assert!(matches!(scenario_from_json(&text), Err(Error::InvalidScenario(_))));
    }

    proptest! {
        #[test]
        fn json_round_trip_is_byte_identical(seed in any::<u64>(), n in 1usize..20, a in 0.0f64..0.02, h in 1.0f64..100.0) {
            let params = ScenarioParams { absorption: a, altitude: h, ..ScenarioParams::default() };
            let s = generate_scenario(seed, n, &params).unwrap();
            let first = scenario_to_json(&s);
            let second = scenario_to_json(&scenario_from_json(&first).unwrap());
            prop_assert_eq!(first, second);
        }
    }
}
