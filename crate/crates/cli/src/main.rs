use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use thzuav_core::audit::run_audit;
use thzuav_core::optimizer::{initial_decision, run_baseline, BaselineMode, ExhaustiveOptions, OptimizeOptions, SolveTrace};
use thzuav_core::scenario::{generate_scenario, scenario_from_json, scenario_to_json, ScenarioParams};
use thzuav_core::sweep::{max_reductions, rows_to_csv, run_sweep, SweepConfig, SweepSpec, SweepVariable};
use thzuav_core::{constraint_report, ConstraintReport, Decision, Error, Scenario};

/// UAV placement, power and bandwidth allocation for terahertz links.
#[derive(Parser)]
#[command(name = "thzuav", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random scenario and print it as JSON.
    Gen(GenArgs),
    /// Solve one scenario with one scheme.
    Solve(SolveArgs),
    /// Run every scheme on one scenario.
    Compare(CompareArgs),
    /// Sweep one parameter over random scenarios.
    Sweep(SweepArgs),
    /// Check the convexity argument numerically.
    Verify(VerifyArgs),
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Read the scenario from a JSON file instead of generating one.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, conflicts_with = "scenario")]
    users: Option<usize>,
    /// Side of the square area, m.
    #[arg(long, conflicts_with = "scenario")]
    area: Option<f64>,
    /// UAV altitude, m.
    #[arg(long, conflicts_with = "scenario")]
    altitude: Option<f64>,
    /// Molecular absorption coefficient, 1/m.
    #[arg(long, conflicts_with = "scenario")]
    absorption: Option<f64>,
    /// Total bandwidth, Hz.
    #[arg(long, conflicts_with = "scenario")]
    bandwidth: Option<f64>,
    /// Per-user uplink energy budget, J.
    #[arg(long, conflicts_with = "scenario")]
    energy: Option<f64>,
    /// User power cap, W.
    #[arg(long = "max-power", conflicts_with = "scenario")]
    max_power: Option<f64>,
    /// UAV transmit power, W.
    #[arg(long = "uav-power", conflicts_with = "scenario")]
    uav_power: Option<f64>,
}

impl ScenarioArgs {
    fn params(&self, default_energy: f64) -> ScenarioParams {
        let d = ScenarioParams::default();
        ScenarioParams {
            area_side: self.area.unwrap_or(d.area_side),
            altitude: self.altitude.unwrap_or(d.altitude),
            uav_power: self.uav_power.unwrap_or(d.uav_power),
            max_power: self.max_power.unwrap_or(d.max_power),
            total_bandwidth: self.bandwidth.unwrap_or(d.total_bandwidth),
            energy_budget: self.energy.unwrap_or(default_energy),
            absorption: self.absorption.unwrap_or(d.absorption),
            ..d
        }
    }

    fn users(&self) -> usize {
        self.users.unwrap_or(14)
    }

    fn load(&self) -> anyhow::Result<Scenario> {
        match &self.scenario {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                Ok(scenario_from_json(&text)?)
            }
            None => Ok(generate_scenario(self.seed, self.users(), &self.params(8.0))?),
        }
    }
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Relative objective change that ends the alternating loop.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long = "max-iters", default_value_t = 100)]
    max_iters: usize,
    /// Grid spacing of the exhaustive reference, m.
    #[arg(long = "grid-step", default_value_t = 0.5)]
    grid_step: f64,
    /// Polishing runs of the exhaustive reference.
    #[arg(long, default_value_t = 4)]
    starts: usize,
}

impl SolverArgs {
    fn options(&self) -> anyhow::Result<(OptimizeOptions, ExhaustiveOptions)> {
        anyhow::ensure!(self.tol > 0.0, "--tol must be positive");
        anyhow::ensure!(self.max_iters > 0, "--max-iters must be positive");
        anyhow::ensure!(self.grid_step > 0.0, "--grid-step must be positive");
        anyhow::ensure!(self.starts > 0, "--starts must be positive");
        Ok((
            OptimizeOptions { tol: self.tol, max_iters: self.max_iters, ..Default::default() },
            ExhaustiveOptions { grid_step: self.grid_step, starts: self.starts, ..Default::default() },
        ))
    }
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Write the result here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Proposed,
    Ol,
    Op,
    Ow,
    Exh,
    All,
}

impl ModeArg {
    fn modes(self) -> Vec<BaselineMode> {
        match self {
            ModeArg::Proposed => vec![BaselineMode::Proposed],
            ModeArg::Ol => vec![BaselineMode::OL],
            ModeArg::Op => vec![BaselineMode::OP],
            ModeArg::Ow => vec![BaselineMode::OW],
            ModeArg::Exh => vec![BaselineMode::EXH],
            ModeArg::All => BaselineMode::ALL.to_vec(),
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Proposed)]
    mode: ModeArg,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::All)]
    mode: ModeArg,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_parser = parse_variable)]
    variable: SweepVariable,
    /// Comma-separated values; defaults to the variable's standard grid.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Schemes to run, comma-separated.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [ModeArg::Proposed, ModeArg::Ol, ModeArg::Op, ModeArg::Ow])]
    mode: Vec<ModeArg>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_variable(s: &str) -> Result<SweepVariable, String> {
    SweepVariable::from_label(s)
        .ok_or_else(|| format!("unknown variable `{s}`; expected absorption_a, total_bandwidth, num_users or altitude"))
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn to_json(value: &impl Serialize) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn csv_text<R: Serialize>(rows: &[R]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    mode: BaselineMode,
    objective_s: f64,
    decision: &'a Decision,
    constraints: ConstraintReport,
    trace: &'a SolveTrace,
}

#[derive(Serialize)]
struct CompareRow {
    mode: BaselineMode,
    objective_s: f64,
    iterations: usize,
    converged: bool,
    /// `1 - proposed / this`, when the proposed scheme was run.
    reduction_by_proposed: Option<f64>,
}

fn solve_one(
    s: &Scenario,
    init: &Decision,
    mode: BaselineMode,
    solver: &SolverArgs,
) -> anyhow::Result<(Decision, SolveTrace)> {
    let (opts, exh) = solver.options()?;
    Ok(run_baseline(s, mode, init, &opts, &exh)?)
}

fn cmd_gen(args: &GenArgs) -> anyhow::Result<()> {
    let s = args.scenario.load()?;
    emit(args.out.as_deref(), &scenario_to_json(&s))
}

fn cmd_solve(args: &SolveArgs) -> anyhow::Result<()> {
    let modes = args.mode.modes();
    anyhow::ensure!(modes.len() == 1, "solve runs a single mode; use `compare` for several");
    let s = args.scenario.load()?;
    let init = initial_decision(&s)?;
    let (dec, trace) = solve_one(&s, &init, modes[0], &args.solver)?;
    eprintln!("elapsed {:.3} s", trace.total_wall_time_s);
    let text = match args.output.format {
        Format::Json => to_json(&SolveOutput {
            mode: modes[0],
            objective_s: trace.final_objective(),
            decision: &dec,
            constraints: constraint_report(&s, &dec)?,
            trace: &trace,
        })?,
        Format::Csv => csv_text(&trace.iterations)?,
    };
    emit(args.output.out.as_deref(), &text)
}

fn cmd_compare(args: &CompareArgs) -> anyhow::Result<()> {
    let s = args.scenario.load()?;
    let init = initial_decision(&s)?;
    let started = Instant::now();
    let mut results = Vec::new();
    for mode in args.mode.modes() {
        let (_, trace) = solve_one(&s, &init, mode, &args.solver)?;
        results.push((mode, trace));
    }
    eprintln!("elapsed {:.3} s", started.elapsed().as_secs_f64());
    let proposed = results.iter().find(|(m, _)| *m == BaselineMode::Proposed).map(|(_, t)| t.final_objective());
    let rows: Vec<CompareRow> = results
        .iter()
        .map(|(mode, t)| CompareRow {
            mode: *mode,
            objective_s: t.final_objective(),
            iterations: t.iterations.len(),
            converged: t.converged,
            reduction_by_proposed: proposed.map(|p| 1.0 - p / t.final_objective()),
        })
        .collect();
    let text = match args.output.format {
        Format::Json => to_json(&rows)?,
        Format::Csv => csv_text(&rows)?,
    };
    emit(args.output.out.as_deref(), &text)
}

#[derive(Serialize)]
struct SweepJson<'a> {
    rows: &'a [thzuav_core::ResultRow],
    trials: &'a [thzuav_core::sweep::TrialRecord],
    max_reductions: Vec<(BaselineMode, f64)>,
}

fn cmd_sweep(args: &SweepArgs) -> anyhow::Result<()> {
    anyhow::ensure!(args.scenario.scenario.is_none(), "sweep generates its own scenarios; drop --scenario");
    let mut modes: Vec<BaselineMode> = Vec::new();
    for m in args.mode.iter().flat_map(|m| m.modes()) {
        if !modes.contains(&m) {
            modes.push(m);
        }
    }
    let spec = SweepSpec {
        variable: args.variable,
        values: args.values.clone().unwrap_or_else(|| args.variable.default_values()),
        trials: args.trials,
        modes,
    };
    let (optimize, exhaustive) = args.solver.options()?;
    let cfg = SweepConfig {
        base: args.scenario.params(args.variable.default_energy_budget()),
        num_users: args.scenario.users(),
        seed: args.scenario.seed,
        optimize,
        exhaustive,
        parallel: true,
    };
    let started = Instant::now();
    let out = run_sweep(&spec, &cfg)?;
    eprintln!("elapsed {:.3} s", started.elapsed().as_secs_f64());
    let reductions = max_reductions(&out);
    for (mode, r) in &reductions {
        eprintln!("largest reduction vs {mode}: {:.1}%", 100.0 * r);
    }
    let text = match args.output.format {
        Format::Csv => rows_to_csv(&out.rows)?,
        Format::Json => to_json(&SweepJson { rows: &out.rows, trials: &out.trials, max_reductions: reductions })?,
    };
    emit(args.output.out.as_deref(), &text)
}

/// Returns whether every claim passed.
fn cmd_verify(args: &VerifyArgs) -> anyhow::Result<bool> {
    anyhow::ensure!(args.samples > 0, "--samples must be positive");
    let started = Instant::now();
    let report = run_audit(args.samples, args.seed);
    for c in &report.claims {
        let status = if c.passed() { "ok  " } else { "FAIL" };
        let mut line = format!("{status} {:<48} {:>6} samples {:>6} violations", c.claim_id, c.samples, c.violations);
        if let Some(obs) = c.observed {
            line += &format!("  observed {obs:.6}");
        }
        if let Some(r) = c.reference {
            line += &format!("  reference {r}");
        }
        eprintln!("{line}");
    }
    eprintln!("elapsed {:.3} s", started.elapsed().as_secs_f64());
    emit(args.out.as_deref(), &to_json(&report)?)?;
    Ok(report.overall_pass)
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_infeasible() => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a).map(|_| true),
        Command::Solve(a) => cmd_solve(a).map(|_| true),
        Command::Compare(a) => cmd_compare(a).map(|_| true),
        Command::Sweep(a) => cmd_sweep(a).map(|_| true),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
