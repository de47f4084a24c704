//! Parameter sweeps over random scenarios and their CSV form.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{initial_decision, run_baseline, BaselineMode, ExhaustiveOptions, OptimizeOptions};
use crate::scenario::{generate_scenario, ScenarioParams, GHZ};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "absorption_a")]
    Absorption,
    #[serde(rename = "total_bandwidth")]
    TotalBandwidth,
    #[serde(rename = "num_users")]
    NumUsers,
    #[serde(rename = "altitude")]
    Altitude,
}

impl SweepVariable {
    pub fn label(self) -> &'static str {
        match self {
            SweepVariable::Absorption => "absorption_a",
            SweepVariable::TotalBandwidth => "total_bandwidth",
            SweepVariable::NumUsers => "num_users",
            SweepVariable::Altitude => "altitude",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        [Self::Absorption, Self::TotalBandwidth, Self::NumUsers, Self::Altitude]
            .into_iter()
            .find(|v| v.label() == s)
    }

    /// Default grid for the variable.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepVariable::Absorption => vec![0.0025, 0.005, 0.0075, 0.01, 0.0125],
            SweepVariable::TotalBandwidth => [60.0, 80.0, 100.0, 120.0, 140.0].iter().map(|v| v * GHZ).collect(),
            SweepVariable::NumUsers => vec![4.0, 8.0, 12.0, 16.0, 20.0],
            SweepVariable::Altitude => vec![10.0, 20.0, 30.0],
        }
    }

    /// Per-user energy budget used with this sweep unless overridden, J.
    pub fn default_energy_budget(self) -> f64 {
        match self {
            SweepVariable::Absorption => 8.0,
            _ => 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    /// Random scenarios per value.
    pub trials: usize,
    pub modes: Vec<BaselineMode>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidScenario("sweep needs at least one value".into()));
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidScenario("sweep values must be strictly increasing".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidScenario("sweep needs at least one trial".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::InvalidScenario("sweep needs at least one mode".into()));
        }
        if self.variable == SweepVariable::NumUsers && self.values.iter().any(|v| !(v.fract() == 0.0 && *v >= 1.0)) {
            return Err(Error::InvalidScenario("user counts must be positive integers".into()));
        }
        Ok(())
    }
}

/// Fixed settings shared by every point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub base: ScenarioParams,
    pub num_users: usize,
    /// Trial `i` uses scenario seed `seed + i`.
    pub seed: u64,
    pub optimize: OptimizeOptions,
    pub exhaustive: ExhaustiveOptions,
    pub parallel: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            base: ScenarioParams::default(),
            num_users: 14,
            seed: 0,
            optimize: OptimizeOptions::default(),
            exhaustive: ExhaustiveOptions::default(),
            parallel: true,
        }
    }
}

/// Aggregate of one (value, mode) pair. `trials` counts every seed tried;
/// the statistics cover the `trials - infeasible_trials` solved ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub variable: String,
    pub value: f64,
    pub mode: String,
    pub mean_delay_s: f64,
    pub min_delay_s: f64,
    pub max_delay_s: f64,
    pub mean_iters: f64,
    pub trials: usize,
    pub infeasible_trials: usize,
}

/// Outcome of one mode on one random scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub value: f64,
    pub trial: usize,
    pub seed: u64,
    pub mode: BaselineMode,
    /// `None` when the scenario or the mode was infeasible.
    pub objective_s: Option<f64>,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    pub trials: Vec<TrialRecord>,
}

impl SweepOutput {
    /// Paired objectives of `mode` at `value`, indexed by trial.
    pub fn objectives(&self, value: f64, mode: BaselineMode) -> Vec<Option<f64>> {
        self.trials
            .iter()
            .filter(|t| t.value == value && t.mode == mode)
            .map(|t| t.objective_s)
            .collect()
    }

    pub fn row(&self, value: f64, mode: BaselineMode) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.value == value && r.mode == mode.label())
    }
}

fn params_at(variable: SweepVariable, value: f64, base: &ScenarioParams, num_users: usize) -> (ScenarioParams, usize) {
    let mut p = base.clone();
    let mut n = num_users;
    match variable {
        SweepVariable::Absorption => p.absorption = value,
        SweepVariable::TotalBandwidth => p.total_bandwidth = value,
        SweepVariable::NumUsers => n = value as usize,
        SweepVariable::Altitude => p.altitude = value,
    }
    (p, n)
}

fn run_trial(spec: &SweepSpec, cfg: &SweepConfig, value: f64, trial: usize) -> Result<Vec<TrialRecord>> {
    let seed = cfg.seed.wrapping_add(trial as u64);
    let (params, n) = params_at(spec.variable, value, &cfg.base, cfg.num_users);
    let s = generate_scenario(seed, n, &params)?;
    let record = |mode, outcome: Result<(f64, usize)>| -> Result<TrialRecord> {
        match outcome {
            Ok((obj, iters)) => {
                Ok(TrialRecord { value, trial, seed, mode, objective_s: Some(obj), iterations: iters, error: None })
            }
            Err(e) if e.is_infeasible() => {
                Ok(TrialRecord { value, trial, seed, mode, objective_s: None, iterations: 0, error: Some(e.to_string()) })
            }
            Err(e) => Err(e),
        }
    };
    let init = match initial_decision(&s) {
        Ok(d) => d,
        Err(e) => return spec.modes.iter().map(|&m| record(m, Err(e.clone()))).collect(),
    };
    spec.modes
        .iter()
        .map(|&mode| {
            let outcome = run_baseline(&s, mode, &init, &cfg.optimize, &cfg.exhaustive)
                .map(|(_, t)| (t.final_objective(), t.iterations.len()));
            record(mode, outcome)
        })
        .collect()
}

/// Runs every (value, trial, mode) combination and aggregates per
/// (value, mode). Output order is fixed by (value, trial, mode) regardless
/// of parallel execution.
pub fn run_sweep(spec: &SweepSpec, cfg: &SweepConfig) -> Result<SweepOutput> {
    spec.validate()?;
    let jobs: Vec<(f64, usize)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.trials).map(move |t| (v, t)))
        .collect();
    let results: Vec<Result<Vec<TrialRecord>>> = if cfg.parallel {
        jobs.par_iter().map(|&(v, t)| run_trial(spec, cfg, v, t)).collect()
    } else {
        jobs.iter().map(|&(v, t)| run_trial(spec, cfg, v, t)).collect()
    };
    let mut trials = Vec::with_capacity(jobs.len() * spec.modes.len());
    for r in results {
        trials.extend(r?);
    }

    let mut rows = Vec::new();
    for &value in &spec.values {
        for &mode in &spec.modes {
            let group: Vec<&TrialRecord> = trials.iter().filter(|t| t.value == value && t.mode == mode).collect();
            let solved: Vec<&TrialRecord> = group.iter().copied().filter(|t| t.objective_s.is_some()).collect();
            let objs: Vec<f64> = solved.iter().filter_map(|t| t.objective_s).collect();
            let count = objs.len() as f64;
            rows.push(ResultRow {
                variable: spec.variable.label().to_string(),
                value,
                mode: mode.label().to_string(),
                mean_delay_s: objs.iter().sum::<f64>() / count,
                min_delay_s: objs.iter().copied().fold(f64::INFINITY, f64::min),
                max_delay_s: objs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean_iters: solved.iter().map(|t| t.iterations as f64).sum::<f64>() / count,
                trials: group.len(),
                infeasible_trials: group.len() - solved.len(),
            });
        }
    }
    Ok(SweepOutput { rows, trials })
}

/// Largest relative reduction `1 - proposed / baseline` over all paired
/// trials, per baseline mode present in the output.
pub fn max_reductions(out: &SweepOutput) -> Vec<(BaselineMode, f64)> {
    let mut res = Vec::new();
    for mode in [BaselineMode::OL, BaselineMode::OP, BaselineMode::OW, BaselineMode::EXH] {
        let mut best = f64::NEG_INFINITY;
        for t in out.trials.iter().filter(|t| t.mode == mode) {
            let proposed = out
                .trials
                .iter()
                .find(|p| p.mode == BaselineMode::Proposed && p.value == t.value && p.trial == t.trial);
            if let (Some(b), Some(Some(p))) = (t.objective_s, proposed.map(|p| p.objective_s)) {
                best = best.max(1.0 - p / b);
            }
        }
        if best.is_finite() {
            res.push((mode, best));
        }
    }
    res
}

pub fn write_rows_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn rows_to_csv(rows: &[ResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_rows_csv(rows, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_rows_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let expected = [
        "variable",
        "value",
        "mode",
        "mean_delay_s",
        "min_delay_s",
        "max_delay_s",
        "mean_iters",
        "trials",
        "infeasible_trials",
    ];
    if header.iter().ne(expected) {
        return Err(Error::Parse(format!("unexpected CSV header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
