//! Alternating optimization over power, UAV position and bandwidth, the
//! single-block baselines and the exhaustive multi-start reference.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::{min_bandwidth, solve_bandwidth};
use crate::error::{Error, Result};
use crate::location::{solve_location, LocationOptions};
use crate::model::{constraint_report, total_objective, Decision, Scenario};
use crate::power::solve_power_all;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineMode {
    Proposed,
    /// Location only.
    OL,
    /// Power only.
    OP,
    /// Bandwidth only.
    OW,
    /// Grid search plus multi-start polish.
    EXH,
}

impl BaselineMode {
    pub const ALL: [BaselineMode; 5] =
        [BaselineMode::Proposed, BaselineMode::OL, BaselineMode::OP, BaselineMode::OW, BaselineMode::EXH];

    pub fn label(self) -> &'static str {
        match self {
            BaselineMode::Proposed => "proposed",
            BaselineMode::OL => "ol",
            BaselineMode::OP => "op",
            BaselineMode::OW => "ow",
            BaselineMode::EXH => "exh",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        BaselineMode::ALL.into_iter().find(|m| m.label().eq_ignore_ascii_case(s))
    }
}

impl std::fmt::Display for BaselineMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub k: usize,
    pub objective_s: f64,
    pub x: f64,
    pub y: f64,
    #[serde(rename = "max_power_change_W")]
    pub max_power_change_w: f64,
    #[serde(rename = "max_bandwidth_change_Hz")]
    pub max_bandwidth_change_hz: f64,
    pub convexity_certificate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveTrace {
    pub initial_objective_s: f64,
    pub iterations: Vec<TraceEntry>,
    pub converged: bool,
    /// Excluded from serialized output so that results are reproducible.
    #[serde(skip)]
    pub total_wall_time_s: f64,
}

impl SolveTrace {
    pub fn final_objective(&self) -> f64 {
        self.iterations.last().map_or(self.initial_objective_s, |e| e.objective_s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOptions {
    /// Relative change of the objective that counts as converged.
    pub tol: f64,
    pub max_iters: usize,
    pub location: LocationOptions,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions { tol: 1e-6, max_iters: 100, location: LocationOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveOptions {
    /// Spacing of the position grid, m.
    pub grid_step: f64,
    /// Number of polishing runs (the first starts at the best grid point).
    pub starts: usize,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for ExhaustiveOptions {
    fn default() -> Self {
        ExhaustiveOptions { grid_step: 0.5, starts: 4, seed: 0, parallel: true }
    }
}

/// Water level `t` such that `sum max(floor_n, t) = total`, or `None` when
/// the floors alone exceed the total.
fn clip_to_floors(floors: &[f64], total: f64) -> Option<Vec<f64>> {
    if floors.iter().sum::<f64>() > total {
        return None;
    }
    let mut level = total / floors.len() as f64;
    for _ in 0..=floors.len() {
        let (fixed, count) = floors
            .iter()
            .filter(|&&f| f >= level)
            .fold((0.0, 0usize), |(s, c), &f| (s + f, c + 1));
        let free = floors.len() - count;
        if free == 0 {
            break;
        }
        let next = (total - fixed) / free as f64;
        if next == level {
            break;
        }
        level = next;
    }
    Some(floors.iter().map(|&f| f.max(level)).collect())
}

/// Starting decision at a given UAV position: equal bandwidth split raised
/// to the bandwidth each user needs at full power, then closed-form powers.
pub fn initial_decision_at(s: &Scenario, x: f64, y: f64) -> Result<Decision> {
    let n = s.num_users();
    let equal = vec![s.total_bandwidth / n as f64; n];
    let floors: Option<Vec<f64>> = (0..n)
        .map(|k| min_bandwidth(k, s, s.max_power, s.distance(k, x, y)).ok())
        .collect();
    let bandwidth = floors
        .and_then(|f| clip_to_floors(&f, s.total_bandwidth))
        .unwrap_or(equal);
    let power = solve_power_all(s, x, y, &bandwidth)
        .map_err(|e| Error::InfeasibleInit(format!("no feasible power at ({x}, {y}): {e}")))?;
    Ok(Decision { x, y, power, bandwidth })
}

/// Starting decision with the UAV above the user centroid.
pub fn initial_decision(s: &Scenario) -> Result<Decision> {
    let n = s.num_users() as f64;
    let x = s.users.iter().map(|u| u.x).sum::<f64>() / n;
    let y = s.users.iter().map(|u| u.y).sum::<f64>() / n;
    initial_decision_at(s, x, y)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

fn wrap(iteration: usize, block: &'static str) -> impl Fn(Error) -> Error {
    move |e| Error::Block { iteration, block, source: Box::new(e) }
}

/// Accepts `cand` if it is feasible and does not increase the objective.
fn accept(s: &Scenario, cur: &mut Decision, obj: &mut f64, cand: Decision) -> Result<bool> {
    if !constraint_report(s, &cand)?.feasible {
        return Ok(false);
    }
    let f = total_objective(s, &cand)?;
    if f <= *obj {
        *cur = cand;
        *obj = f;
        Ok(true)
    } else {
        Ok(false)
    }
}

fn check_init(s: &Scenario, init: &Decision) -> Result<f64> {
    let report = constraint_report(s, init)?;
    if !report.feasible {
        return Err(Error::InfeasibleInit(format!(
            "bandwidth residual {:e}, power violations {:?}, energy violations {:?}",
            report.bandwidth_residual, report.power_violations, report.energy_violations
        )));
    }
    total_objective(s, init)
}

/// Cycles power, location and bandwidth updates until the relative change
/// of the objective falls to `tol` or `max_iters` passes have run.
pub fn optimize(s: &Scenario, init: &Decision, opts: &OptimizeOptions) -> Result<(Decision, SolveTrace)> {
    if !(opts.tol > 0.0) {
        return Err(Error::domain(format!("tol must be positive, got {}", opts.tol)));
    }
    let started = Instant::now();
    let mut obj = check_init(s, init)?;
    let mut cur = init.clone();
    let mut trace = SolveTrace { initial_objective_s: obj, iterations: Vec::new(), converged: false, total_wall_time_s: 0.0 };

    for k in 1..=opts.max_iters {
        let prev = cur.clone();
        let prev_obj = obj;

        let power = solve_power_all(s, cur.x, cur.y, &cur.bandwidth).map_err(wrap(k, "power"))?;
        let cand = Decision { power, ..cur.clone() };
        accept(s, &mut cur, &mut obj, cand)?;

        let loc = solve_location(s, &cur.power, &cur.bandwidth, (cur.x, cur.y), &opts.location)
            .map_err(wrap(k, "location"))?;
        let cand = Decision { x: loc.x, y: loc.y, ..cur.clone() };
        accept(s, &mut cur, &mut obj, cand)?;

        let bandwidth = solve_bandwidth(s, &cur.power, cur.x, cur.y).map_err(wrap(k, "bandwidth"))?;
        let cand = Decision { bandwidth, ..cur.clone() };
        accept(s, &mut cur, &mut obj, cand)?;

        trace.iterations.push(TraceEntry {
            k,
            objective_s: obj,
            x: cur.x,
            y: cur.y,
            max_power_change_w: max_abs_diff(&cur.power, &prev.power),
            max_bandwidth_change_hz: max_abs_diff(&cur.bandwidth, &prev.bandwidth),
            convexity_certificate: loc.convexity_certificate,
        });
        if (prev_obj - obj).abs() <= opts.tol * prev_obj {
            trace.converged = true;
            break;
        }
    }
    trace.total_wall_time_s = started.elapsed().as_secs_f64();
    Ok((cur, trace))
}

fn single_block(
    s: &Scenario,
    init: &Decision,
    step: impl FnOnce(&Decision) -> Result<(Decision, bool)>,
) -> Result<(Decision, SolveTrace)> {
    let started = Instant::now();
    let mut obj = check_init(s, init)?;
    let initial = obj;
    let mut cur = init.clone();
    let (cand, certificate) = step(init).map_err(wrap(1, "baseline"))?;
    accept(s, &mut cur, &mut obj, cand)?;
    let entry = TraceEntry {
        k: 1,
        objective_s: obj,
        x: cur.x,
        y: cur.y,
        max_power_change_w: max_abs_diff(&cur.power, &init.power),
        max_bandwidth_change_hz: max_abs_diff(&cur.bandwidth, &init.bandwidth),
        convexity_certificate: certificate,
    };
    Ok((
        cur,
        SolveTrace {
            initial_objective_s: initial,
            iterations: vec![entry],
            converged: true,
            total_wall_time_s: started.elapsed().as_secs_f64(),
        },
    ))
}

/// Runs one comparison scheme from `init`. Blocks a scheme does not
/// optimize keep their initial values.
pub fn run_baseline(
    s: &Scenario,
    mode: BaselineMode,
    init: &Decision,
    opts: &OptimizeOptions,
    exh: &ExhaustiveOptions,
) -> Result<(Decision, SolveTrace)> {
    match mode {
        BaselineMode::Proposed => optimize(s, init, opts),
        BaselineMode::OL => single_block(s, init, |d| {
            let loc = solve_location(s, &d.power, &d.bandwidth, (d.x, d.y), &opts.location)?;
            Ok((Decision { x: loc.x, y: loc.y, ..d.clone() }, loc.convexity_certificate))
        }),
        BaselineMode::OP => single_block(s, init, |d| {
            let power = solve_power_all(s, d.x, d.y, &d.bandwidth)?;
            Ok((Decision { power, ..d.clone() }, false))
        }),
        BaselineMode::OW => single_block(s, init, |d| {
            let bandwidth = solve_bandwidth(s, &d.power, d.x, d.y)?;
            Ok((Decision { bandwidth, ..d.clone() }, false))
        }),
        BaselineMode::EXH => {
            let started = Instant::now();
            let initial = check_init(s, init)?;
            let (dec, obj) = exhaustive_search(s, opts, exh)?;
            let (dec, obj) = if obj <= initial { (dec, obj) } else { (init.clone(), initial) };
            let entry = TraceEntry {
                k: 1,
                objective_s: obj,
                x: dec.x,
                y: dec.y,
                max_power_change_w: max_abs_diff(&dec.power, &init.power),
                max_bandwidth_change_hz: max_abs_diff(&dec.bandwidth, &init.bandwidth),
                convexity_certificate: false,
            };
            Ok((
                dec,
                SolveTrace {
                    initial_objective_s: initial,
                    iterations: vec![entry],
                    converged: true,
                    total_wall_time_s: started.elapsed().as_secs_f64(),
                },
            ))
        }
    }
}

/// Best power and bandwidth for a fixed UAV position: starting decision,
/// then the bandwidth and power blocks once each.
pub fn evaluate_position(s: &Scenario, x: f64, y: f64) -> Result<(Decision, f64)> {
    let mut cur = initial_decision_at(s, x, y)?;
    let mut obj = total_objective(s, &cur)?;
    if let Ok(bandwidth) = solve_bandwidth(s, &cur.power, x, y) {
        let cand = Decision { bandwidth, ..cur.clone() };
        accept(s, &mut cur, &mut obj, cand)?;
    }
    if let Ok(power) = solve_power_all(s, x, y, &cur.bandwidth) {
        let cand = Decision { power, ..cur.clone() };
        accept(s, &mut cur, &mut obj, cand)?;
    }
    Ok((cur, obj))
}

/// Grid points `0, step, 2 step, ...` covering `[0, side]`.
fn grid_axis(side: f64, step: f64) -> Vec<f64> {
    let count = (side / step).floor() as usize;
    let mut axis: Vec<f64> = (0..=count).map(|i| i as f64 * step).collect();
    if axis.last().is_some_and(|&v| v < side * (1.0 - 1e-12)) {
        axis.push(side);
    }
    axis
}

/// Best grid position over the square area, or `None` if every point is
/// infeasible. Ties go to the first point in row-major order.
pub fn grid_search(s: &Scenario, grid_step: f64, parallel: bool) -> Result<Option<(Decision, f64)>> {
    if !(grid_step > 0.0) {
        return Err(Error::domain(format!("grid step must be positive, got {grid_step}")));
    }
    let axis = grid_axis(s.area_side, grid_step);
    let points: Vec<(f64, f64)> = axis.iter().flat_map(|&x| axis.iter().map(move |&y| (x, y))).collect();
    let eval = |&(x, y): &(f64, f64)| evaluate_position(s, x, y).ok();
    let results: Vec<Option<(Decision, f64)>> = if parallel {
        points.par_iter().map(eval).collect()
    } else {
        points.iter().map(eval).collect()
    };
    let mut best: Option<(Decision, f64)> = None;
    for r in results.into_iter().flatten() {
        if match &best { None => true, Some(b) => r.1 < b.1 } {
            best = Some(r);
        }
    }
    Ok(best)
}

/// Near-global reference solution: grid search over positions followed by
/// alternating optimization from the best grid point and from randomly
/// perturbed copies of it. Returns the best decision found.
pub fn exhaustive_search(s: &Scenario, opts: &OptimizeOptions, exh: &ExhaustiveOptions) -> Result<(Decision, f64)> {
    let (seed_dec, seed_obj) = grid_search(s, exh.grid_step, exh.parallel)?
        .ok_or_else(|| Error::EnergyInfeasible { users: (0..s.num_users()).collect() })?;
    let mut rng = ChaCha8Rng::seed_from_u64(exh.seed);
    let mut starts = vec![seed_dec.clone()];
    for _ in 1..exh.starts {
        let r = 2.0 * exh.grid_step;
        let x = (seed_dec.x + rng.gen_range(-r..=r)).clamp(0.0, s.area_side);
        let y = (seed_dec.y + rng.gen_range(-r..=r)).clamp(0.0, s.area_side);
        if let Ok(d) = initial_decision_at(s, x, y) {
            starts.push(d);
        }
    }
    let mut best = (seed_dec, seed_obj);
    for start in &starts {
        if let Ok((dec, trace)) = optimize(s, start, opts) {
            let f = trace.final_objective();
            if f < best.1 {
                best = (dec, f);
            }
        }
    }
    Ok(best)
}
