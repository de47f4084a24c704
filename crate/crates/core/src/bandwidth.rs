//! Bandwidth allocation at fixed powers and UAV position.
//!
//! Each user's delay `D / R_up(w) + E / R_down(w)` with
//! `R(w) = w log2(1 + kappa / w)` is strictly decreasing and convex in its
//! own bandwidth, and the uplink energy budget turns into a lower bound
//! `w >= w_min`. The allocation that splits `B_W` optimally equalizes the
//! marginal delay reduction `lambda` across users above their lower bound;
//! `lambda` is found by a bracketed search on the dual.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::model::{distance, Scenario};

/// Delay and energy of one user as functions of its bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthLink {
    pub uplink_bits: f64,
    pub downlink_bits: f64,
    /// Uplink received SNR times bandwidth, Hz.
    pub kappa_up: f64,
    /// Downlink received SNR times bandwidth, Hz.
    pub kappa_down: f64,
    pub power: f64,
    pub energy_budget: f64,
}

/// `ln(1 + s) - s / (1 + s)`, accurate for small `s`.
fn rate_slope_core(s: f64) -> f64 {
    if s < 1e-4 {
        s * s * (0.5 - s * (2.0 / 3.0 - 0.75 * s))
    } else {
        s.ln_1p() - s / (1.0 + s)
    }
}

/// Rate and its first two derivatives in `w`.
fn rate_derivs(kappa: f64, w: f64) -> (f64, f64, f64) {
    let s = kappa / w;
    let r = w * s.ln_1p() / LN_2;
    let r1 = rate_slope_core(s) / LN_2;
    let r2 = -s * s / (w * (1.0 + s) * (1.0 + s) * LN_2);
    (r, r1, r2)
}

impl BandwidthLink {
    pub fn new(s: &Scenario, n: usize, power: f64, x: f64, y: f64) -> Result<Self> {
        let u = &s.users[n];
        let d = distance(u, x, y, s.altitude);
        // SNR per watt per unit bandwidth, so that k = unit / w
        let unit = crate::model::snr_coefficient(1.0, d, &s.radio)?;
        Ok(BandwidthLink {
            uplink_bits: u.uplink_bits,
            downlink_bits: u.downlink_bits,
            kappa_up: unit * power,
            kappa_down: unit * s.uav_power,
            power,
            energy_budget: u.energy_budget,
        })
    }

    pub fn delay(&self, w: f64) -> f64 {
        let (ru, _, _) = rate_derivs(self.kappa_up, w);
        let (rd, _, _) = rate_derivs(self.kappa_down, w);
        self.uplink_bits / ru + self.downlink_bits / rd
    }

    /// Uplink energy `p D / R_up(w)`, J.
    pub fn energy(&self, w: f64) -> f64 {
        let (ru, _, _) = rate_derivs(self.kappa_up, w);
        self.power * self.uplink_bits / ru
    }

    /// Marginal delay reduction `-d(delay)/dw`, s/Hz; positive and
    /// decreasing in `w`.
    pub fn marginal(&self, w: f64) -> f64 {
        let (ru, ru1, _) = rate_derivs(self.kappa_up, w);
        let (rd, rd1, _) = rate_derivs(self.kappa_down, w);
        self.uplink_bits * ru1 / (ru * ru) + self.downlink_bits * rd1 / (rd * rd)
    }

    /// Second derivative of the delay in `w`, s/Hz^2; positive.
    pub fn curvature(&self, w: f64) -> f64 {
        let part = |bits: f64, kappa: f64| {
            let (r, r1, r2) = rate_derivs(kappa, w);
            bits * (2.0 * r1 * r1 - r * r2) / (r * r * r)
        };
        part(self.uplink_bits, self.kappa_up) + part(self.downlink_bits, self.kappa_down)
    }
}

/// Smallest bandwidth in `[1 Hz, B_W]` at which user `n`'s uplink energy
/// with power `power` at distance `dist` fits its budget.
pub fn min_bandwidth(n: usize, s: &Scenario, power: f64, dist: f64) -> Result<f64> {
    if !(power > 0.0) {
        return Err(Error::domain(format!("power must be positive, got {power}")));
    }
    let unit = crate::model::snr_coefficient(1.0, dist, &s.radio)?;
    let u = &s.users[n];
    let link = BandwidthLink {
        uplink_bits: u.uplink_bits,
        downlink_bits: u.downlink_bits,
        kappa_up: unit * power,
        kappa_down: unit * s.uav_power,
        power,
        energy_budget: u.energy_budget,
    };
    min_bandwidth_for(&link, s.total_bandwidth).map_err(|_| Error::EnergyInfeasible { users: vec![n] })
}

const LOWEST_BANDWIDTH: f64 = 1.0;

fn min_bandwidth_for(link: &BandwidthLink, total: f64) -> Result<f64> {
    let q = link.energy_budget;
    if link.energy(total) > q {
        return Err(Error::EnergyInfeasible { users: vec![] });
    }
    if link.energy(LOWEST_BANDWIDTH) <= q {
        return Ok(LOWEST_BANDWIDTH);
    }
    // energy decreases in w; bisect in log w and keep the feasible end
    let (mut lo, mut hi) = (LOWEST_BANDWIDTH.ln(), total.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if link.energy(mid.exp()) > q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = hi.exp();
    Ok(if link.energy(w) <= q { w } else { total.min(w * (1.0 + 4.0 * f64::EPSILON)) })
}

/// Bandwidth where the marginal reduction equals `lambda`, within `[lo, hi]`.
fn marginal_root(link: &BandwidthLink, lambda: f64, lo: f64, hi: f64, warm: f64) -> f64 {
    if link.marginal(lo) <= lambda {
        return lo;
    }
    if link.marginal(hi) >= lambda {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    let mut w = if warm > a && warm < b { warm } else { (a * b).sqrt() };
    for _ in 0..200 {
        let g = link.marginal(w) - lambda;
        if g > 0.0 {
            a = w;
        } else if g < 0.0 {
            b = w;
        } else {
            return w;
        }
        // m' = -curvature
        let newton = w + g / link.curvature(w);
        let next = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
        if (next - w).abs() <= 1e-15 * w || b - a <= 4.0 * f64::EPSILON * b {
            return next;
        }
        w = next;
    }
    w
}

/// Outcome details of a bandwidth solve.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthSolution {
    pub bandwidth: Vec<f64>,
    pub lower_bounds: Vec<f64>,
    /// Common marginal delay reduction of users above their bound, s/Hz.
    pub multiplier: f64,
}

/// Optimal split of the total bandwidth at fixed powers and position.
pub fn solve_bandwidth(s: &Scenario, power: &[f64], x: f64, y: f64) -> Result<Vec<f64>> {
    Ok(solve_bandwidth_detailed(s, power, x, y)?.bandwidth)
}

pub fn solve_bandwidth_detailed(s: &Scenario, power: &[f64], x: f64, y: f64) -> Result<BandwidthSolution> {
    let n = s.num_users();
    if power.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: power.len() });
    }
    let total = s.total_bandwidth;
    let mut links = Vec::with_capacity(n);
    let mut lower = Vec::with_capacity(n);
    let mut infeasible = Vec::new();
    for (k, &p) in power.iter().enumerate() {
        if !(p > 0.0) {
            return Err(Error::domain(format!("user {k} power must be positive")));
        }
        let link = BandwidthLink::new(s, k, p, x, y)?;
        match min_bandwidth_for(&link, total) {
            Ok(w) => lower.push(w),
            Err(_) => {
                infeasible.push(k);
                lower.push(f64::NAN);
            }
        }
        links.push(link);
    }
    if !infeasible.is_empty() {
        return Err(Error::EnergyInfeasible { users: infeasible });
    }
    let floor: f64 = lower.iter().sum();
    if floor > total * (1.0 + 1e-9) {
        let share = total / n as f64;
        let mut users: Vec<usize> = (0..n).filter(|&k| lower[k] > share).collect();
        if users.is_empty() {
            users = (0..n).collect();
        }
        return Err(Error::EnergyInfeasible { users });
    }
    if floor >= total {
        let scale = total / floor;
        let bandwidth = lower.iter().map(|w| w * scale).collect();
        let multiplier = links.iter().zip(&lower).map(|(l, &w)| l.marginal(w)).fold(0.0, f64::max);
        return Ok(BandwidthSolution { bandwidth, lower_bounds: lower, multiplier });
    }

    let share = total / n as f64;
    let mut lam_hi = links.iter().zip(&lower).map(|(l, &w)| l.marginal(w)).fold(0.0, f64::max);
    let mut lam_lo = links
        .iter()
        .zip(&lower)
        .map(|(l, &w)| l.marginal(w.max(share)))
        .fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = lower.iter().map(|&lo| lo.max(share)).collect();
    let allocate = |lambda: f64, w: &mut Vec<f64>| -> f64 {
        let mut sum = 0.0;
        for k in 0..n {
            w[k] = marginal_root(&links[k], lambda, lower[k], total, w[k]);
            sum += w[k];
        }
        sum - total
    };

    let tol = 1e-12 * total;
    let mut lambda = (lam_lo * lam_hi).sqrt();
    for _ in 0..200 {
        let h = allocate(lambda, &mut w);
        if h.abs() <= tol {
            break;
        }
        if h > 0.0 {
            lam_lo = lambda;
        } else {
            lam_hi = lambda;
        }
        if lam_hi <= lam_lo * (1.0 + 4.0 * f64::EPSILON) {
            break;
        }
        // Newton on log(lambda): d(sum w)/d lambda = -sum 1/curvature over free users
        let slope: f64 = (0..n)
            .filter(|&k| w[k] > lower[k] && w[k] < total)
            .map(|k| -1.0 / links[k].curvature(w[k]))
            .sum();
        let next = if slope < 0.0 {
            (lambda.ln() - h / (lambda * slope)).exp()
        } else {
            f64::NAN
        };
        lambda = if next > lam_lo && next < lam_hi { next } else { (lam_lo * lam_hi).sqrt() };
    }

    // spread the remaining residual over users above their bound
    let residual = total - w.iter().sum::<f64>();
    let weights: Vec<f64> = (0..n)
        .map(|k| if w[k] > lower[k] { 1.0 / links[k].curvature(w[k]) } else { 0.0 })
        .collect();
    let wsum: f64 = weights.iter().sum();
    if wsum > 0.0 {
        for k in 0..n {
            w[k] = (w[k] + residual * weights[k] / wsum).max(lower[k]);
        }
    }
    Ok(BandwidthSolution { bandwidth: w, lower_bounds: lower, multiplier: lambda })
}
