//! UAV placement at fixed powers and bandwidths.
//!
//! Every delay term has the form `payload / (w log2(e))` with
//! `e = 1 + K d^-2 e^{-a d}` and `d` the UAV-user distance, so one kernel
//! ([`delay_term_derivatives`]) gives value, gradient and Hessian in (x, y)
//! for both link directions and for the uplink energy `p * t_up`.
//!
//! [`solve_location`] minimizes the summed delay subject to the per-user
//! energy budgets with a log barrier and damped Newton steps.

use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::model::{RadioConstants, Scenario, ENERGY_TOL};

/// SNR-plus-one bound under which the energy term is certified convex.
pub const CONVEXITY_SNR_BOUND: f64 = 24.0;

/// Geometry and link parameters of a single delay term.
#[derive(Debug, Clone, Copy)]
pub struct DelayTermInput {
    pub user: [f64; 2],
    pub altitude: f64,
    /// Transmit power of the link (user power uplink, UAV power downlink).
    pub power: f64,
    pub bandwidth: f64,
    pub payload: f64,
}

/// Value, gradient and Hessian of a delay term in (x, y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayTerm {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
    /// One plus the link SNR at this point.
    pub snr_plus_one: f64,
}

impl DelayTerm {
    fn scaled(&self, c: f64) -> DelayTerm {
        DelayTerm {
            value: c * self.value,
            grad: [c * self.grad[0], c * self.grad[1]],
            hess: [
                [c * self.hess[0][0], c * self.hess[0][1]],
                [c * self.hess[1][0], c * self.hess[1][1]],
            ],
            snr_plus_one: self.snr_plus_one,
        }
    }
}

/// Analytic derivatives of `payload / (w log2(1 + k(w, x, y) power))` with
/// respect to the UAV coordinates, via the chain rule through `e` and `d`.
pub fn delay_term_derivatives(t: &DelayTermInput, radio: &RadioConstants, x: f64, y: f64) -> Result<DelayTerm> {
    if !(t.altitude > 0.0) {
        return Err(Error::domain("degenerate geometry: altitude must be positive"));
    }
    if !(t.power > 0.0 && t.bandwidth > 0.0) {
        return Err(Error::domain("power and bandwidth must be positive"));
    }
    let a = radio.absorption();
    let dx = x - t.user[0];
    let dy = y - t.user[1];
    let d2 = dx * dx + dy * dy + t.altitude * t.altitude;
    let d = d2.sqrt();
    let big_k = radio.h0() * t.power / (t.bandwidth * radio.sigma2());
    let snr = big_k * (-a * d).exp() / d2;
    let e = 1.0 + snr;
    let ln_e = snr.ln_1p();
    let c = t.payload * LN_2 / t.bandwidth;

    let value = c / ln_e;
    let t_e = -c / (e * ln_e * ln_e);
    let t_ee = c * (ln_e + 2.0) / (e * e * ln_e * ln_e * ln_e);
    let ad = a * d;
    let e_d = -snr * (ad + 2.0) / d;
    let e_dd = snr * (ad * ad + 4.0 * ad + 6.0) / d2;
    let t_d = t_e * e_d;
    let t_dd = t_ee * e_d * e_d + t_e * e_dd;

    let u = [dx / d, dy / d];
    let d3 = d2 * d;
    let hess_d = [[(d2 - dx * dx) / d3, -dx * dy / d3], [-dx * dy / d3, (d2 - dy * dy) / d3]];
    let mut hess = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            hess[i][j] = t_dd * u[i] * u[j] + t_d * hess_d[i][j];
        }
    }
    Ok(DelayTerm { value, grad: [t_d * u[0], t_d * u[1]], hess, snr_plus_one: e })
}

/// Tuning of the barrier method.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationOptions {
    pub mu_start: f64,
    pub mu_end: f64,
    pub mu_factor: f64,
    /// First-order tolerance on the barrier gradient, s/m.
    pub grad_tol: f64,
    pub max_steps_per_stage: usize,
}

impl Default for LocationOptions {
    fn default() -> Self {
        LocationOptions { mu_start: 1.0, mu_end: 1e-8, mu_factor: 10.0, grad_tol: 1e-8, max_steps_per_stage: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocationSolution {
    pub x: f64,
    pub y: f64,
    pub objective: f64,
    /// Barrier gradient norm at the end of the last stage, s/m.
    pub grad_norm: f64,
    /// Every SNR-plus-one seen during the solve stayed below 24.
    pub convexity_certificate: bool,
    /// A line search found no acceptable step.
    pub stalled: bool,
    /// The start point was returned unchanged.
    pub kept_start: bool,
    pub steps: usize,
}

struct Eval {
    f: f64,
    grad: [f64; 2],
    hess: [[f64; 2]; 2],
    slack: Vec<f64>,
    energy: Vec<DelayTerm>,
    max_snr_plus_one: f64,
}

struct Problem<'a> {
    s: &'a Scenario,
    power: &'a [f64],
    bandwidth: &'a [f64],
}

impl Problem<'_> {
    fn terms(&self, n: usize) -> (DelayTermInput, DelayTermInput) {
        let u = &self.s.users[n];
        let up = DelayTermInput {
            user: [u.x, u.y],
            altitude: self.s.altitude,
            power: self.power[n],
            bandwidth: self.bandwidth[n],
            payload: u.uplink_bits,
        };
        let down = DelayTermInput { power: self.s.uav_power, payload: u.downlink_bits, ..up };
        (up, down)
    }

    /// Summed delay, its derivatives, and the energy slacks; users are
    /// accumulated in index order.
    fn eval(&self, x: f64, y: f64) -> Result<Eval> {
        let mut f = 0.0;
        let mut grad = [0.0; 2];
        let mut hess = [[0.0; 2]; 2];
        let mut slack = Vec::with_capacity(self.power.len());
        let mut energy = Vec::with_capacity(self.power.len());
        let mut max_e: f64 = 0.0;
        for n in 0..self.power.len() {
            let (up, down) = self.terms(n);
            let tu = delay_term_derivatives(&up, &self.s.radio, x, y)?;
            let td = delay_term_derivatives(&down, &self.s.radio, x, y)?;
            f += tu.value + td.value;
            for i in 0..2 {
                grad[i] += tu.grad[i] + td.grad[i];
                for j in 0..2 {
                    hess[i][j] += tu.hess[i][j] + td.hess[i][j];
                }
            }
            max_e = max_e.max(tu.snr_plus_one).max(td.snr_plus_one);
            let en = tu.scaled(self.power[n]);
            slack.push(self.s.users[n].energy_budget - en.value);
            energy.push(en);
        }
        Ok(Eval { f, grad, hess, slack, energy, max_snr_plus_one: max_e })
    }
}

/// Summed uplink and downlink delay at UAV position (x, y) with fixed
/// powers and bandwidths.
pub fn location_objective(s: &Scenario, power: &[f64], bandwidth: &[f64], x: f64, y: f64) -> Result<f64> {
    Ok(Problem { s, power, bandwidth }.eval(x, y)?.f)
}

/// Largest uplink energy overshoot `p t_up - Q` at (x, y), J.
pub fn max_energy_excess(s: &Scenario, power: &[f64], bandwidth: &[f64], x: f64, y: f64) -> Result<f64> {
    let ev = Problem { s, power, bandwidth }.eval(x, y)?;
    Ok(ev.slack.iter().map(|&sl| -sl).fold(f64::NEG_INFINITY, f64::max))
}

struct BarrierPoint {
    phi: f64,
    grad: [f64; 2],
    hess: [[f64; 2]; 2],
}

fn barrier(ev: &Eval, mu: f64) -> Option<BarrierPoint> {
    let mut phi = ev.f;
    let mut grad = ev.grad;
    let mut hess = ev.hess;
    for (sl, en) in ev.slack.iter().zip(&ev.energy) {
        if sl.is_infinite() {
            continue;
        }
        if !(*sl > 0.0) {
            return None;
        }
        phi -= mu * sl.ln();
        for i in 0..2 {
            grad[i] += mu * en.grad[i] / sl;
            for j in 0..2 {
                hess[i][j] += mu * (en.hess[i][j] / sl + en.grad[i] * en.grad[j] / (sl * sl));
            }
        }
    }
    Some(BarrierPoint { phi, grad, hess })
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// Newton direction when the Hessian is positive definite, otherwise the
/// steepest-descent direction capped at 10 m.
fn descent_direction(bp: &BarrierPoint) -> [f64; 2] {
    let [[a, b], [_, c]] = bp.hess;
    let det = a * c - b * b;
    let g = bp.grad;
    if a > 0.0 && c > 0.0 && det > 1e-12 * a * c {
        [-(c * g[0] - b * g[1]) / det, -(a * g[1] - b * g[0]) / det]
    } else {
        let scale = (10.0 / norm(g)).min(1.0);
        [-scale * g[0], -scale * g[1]]
    }
}

/// Direction that strictly lowers every binding energy term, if one exists.
fn interior_direction(ev: &Eval, active: &[usize]) -> Option<[f64; 2]> {
    let mut angles = Vec::with_capacity(active.len());
    for &n in active {
        let g = ev.energy[n].grad;
        if norm(g) == 0.0 {
            return None;
        }
        angles.push((-g[1]).atan2(-g[0]));
    }
    angles.sort_by(f64::total_cmp);
    // largest circular gap between consecutive descent directions
    let mut best_gap = angles[0] + 2.0 * PI - angles[angles.len() - 1];
    let mut arc_start = angles[0];
    for w in angles.windows(2) {
        let gap = w[1] - w[0];
        if gap > best_gap {
            best_gap = gap;
            arc_start = w[1];
        }
    }
    if best_gap <= PI + 1e-12 {
        return None;
    }
    let mid = arc_start + 0.5 * (2.0 * PI - best_gap);
    let v = [mid.cos(), mid.sin()];
    let ok = active.iter().all(|&n| {
        let g = ev.energy[n].grad;
        v[0] * g[0] + v[1] * g[1] < 0.0
    });
    ok.then_some(v)
}

/// Minimizes the summed delay over the UAV position with powers and
/// bandwidths held fixed, subject to every user's uplink energy budget.
///
/// The start must satisfy the energy budgets. Budgets that are binding at
/// the start are first relaxed by moving toward the binding users; if no
/// such move exists the start is returned unchanged. The returned objective
/// never exceeds the objective at the start.
pub fn solve_location(
    s: &Scenario,
    power: &[f64],
    bandwidth: &[f64],
    init: (f64, f64),
    opts: &LocationOptions,
) -> Result<LocationSolution> {
    let n = s.num_users();
    for got in [power.len(), bandwidth.len()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    if let Some(k) = power.iter().position(|&p| p > s.max_power * (1.0 + 1e-12)) {
        return Err(Error::domain(format!("user {k} power exceeds the cap")));
    }
    let problem = Problem { s, power, bandwidth };
    let start = problem.eval(init.0, init.1)?;
    if let Some(k) = start.slack.iter().position(|&sl| sl < -ENERGY_TOL) {
        return Err(Error::InfeasibleInit(format!("user {k} exceeds its energy budget at the start")));
    }
    let mut max_e = start.max_snr_plus_one;
    let keep_start = |max_e: f64, stalled: bool, steps: usize| LocationSolution {
        x: init.0,
        y: init.1,
        objective: start.f,
        grad_norm: f64::NAN,
        convexity_certificate: max_e < CONVEXITY_SNR_BOUND,
        stalled,
        kept_start: true,
        steps,
    };

    let active: Vec<usize> = (0..n)
        .filter(|&k| start.slack[k] <= 1e-9 * s.users[k].energy_budget.min(1e300))
        .collect();
    let mut z = [init.0, init.1];
    if !active.is_empty() {
        let Some(v) = interior_direction(&start, &active) else {
            return Ok(keep_start(max_e, false, 0));
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let trial = [z[0] + t * v[0], z[1] + t * v[1]];
            let ev = problem.eval(trial[0], trial[1])?;
            if ev.slack.iter().all(|&sl| sl > 0.0) {
                max_e = max_e.max(ev.max_snr_plus_one);
                z = trial;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            return Ok(keep_start(max_e, false, 0));
        }
    }

    let mut mu = opts.mu_start;
    let mut steps = 0;
    let mut stalled = false;
    let mut grad_norm;
    loop {
        let ev = problem.eval(z[0], z[1])?;
        let mut bp = barrier(&ev, mu).ok_or_else(|| Error::domain("barrier left the feasible region"))?;
        for _ in 0..opts.max_steps_per_stage {
            grad_norm = norm(bp.grad);
            if grad_norm <= opts.grad_tol {
                break;
            }
            let d = descent_direction(&bp);
            let slope = bp.grad[0] * d[0] + bp.grad[1] * d[1];
            if !(slope < 0.0) {
                break;
            }
            // predicted decrease below the rounding level of phi
            let in_noise = -slope <= 1e-12 * bp.phi.abs().max(1.0);
            let mut t = 1.0;
            let mut accepted = None;
            while t >= 1e-14 {
                let trial = [z[0] + t * d[0], z[1] + t * d[1]];
                let tev = problem.eval(trial[0], trial[1])?;
                if let Some(tbp) = barrier(&tev, mu) {
                    let armijo = tbp.phi <= bp.phi + 1e-4 * t * slope;
                    let noise_ok = in_noise && norm(tbp.grad) < grad_norm && tbp.phi <= bp.phi + 1e-12 * bp.phi.abs();
                    if armijo || noise_ok {
                        accepted = Some((trial, tev, tbp));
                        break;
                    }
                }
                t *= 0.5;
            }
            let Some((trial, tev, tbp)) = accepted else {
                stalled = !in_noise;
                break;
            };
            steps += 1;
            z = trial;
            max_e = max_e.max(tev.max_snr_plus_one);
            bp = tbp;
        }
        grad_norm = norm(bp.grad);
        if mu <= opts.mu_end * (1.0 + 1e-12) {
            break;
        }
        mu = (mu / opts.mu_factor).max(opts.mu_end);
    }

    let end = problem.eval(z[0], z[1])?;
    if !(end.f <= start.f) || end.slack.iter().any(|&sl| sl < -ENERGY_TOL) {
        return Ok(keep_start(max_e, stalled, steps));
    }
    Ok(LocationSolution {
        x: z[0],
        y: z[1],
        objective: end.f,
        grad_norm,
        convexity_certificate: max_e < CONVEXITY_SNR_BOUND,
        stalled,
        kept_start: false,
        steps,
    })
}
