//! Acceptance criteria 1-9. Each test prints one `criterion N: PASS|FAIL`
//! line with the measured numbers, then asserts.

use std::f64::consts::LN_2;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thzuav_core::audit::{
    audit_en_bound, audit_first_determinant, audit_second_determinant, find_g_root, find_vertex_root,
    EN_BOUND_REFERENCE,
};
use thzuav_core::location::{location_objective, solve_location, LocationOptions};
use thzuav_core::model::{derive_links, snr_coefficient};
use thzuav_core::optimizer::{exhaustive_search, initial_decision, optimize, run_baseline, BaselineMode};
use thzuav_core::power::{energy_limited_power, solve_power_single};
use thzuav_core::sweep::{max_reductions, run_sweep, SweepConfig, SweepOutput, SweepSpec, SweepVariable};
use thzuav_core::{
    constraint_report, generate_scenario, solve_bandwidth, total_objective, Decision, ExhaustiveOptions,
    OptimizeOptions, Scenario, ScenarioParams,
};

fn verdict(n: u32, ok: bool, detail: &str) -> bool {
    println!("criterion {n}: {} {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

/// Root of log2(1 + k p)/p = l by bisection.
fn bisect_power(k: f64, l: f64) -> f64 {
    let f = |p: f64| (k * p).ln_1p() / (p * LN_2) - l;
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0f64;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn criterion_1_closed_form_power() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cases: Vec<(f64, f64, f64)> = (0..1000)
        .map(|_| {
            let k = 10f64.powf(rng.gen_range(-2.0..6.0));
            let c = rng.gen_range(1e-6..1.0 - 1e-6);
            let cap = 10f64.powf(rng.gen_range(-4.0..1.0));
            (k, c * k / LN_2, cap)
        })
        .collect();
    let started = Instant::now();
    let mut worst = 0.0f64;
    let mut capped_ok = true;
    for &(k, l, cap) in &cases {
        let p = energy_limited_power(k, l).unwrap();
        let oracle = bisect_power(k, l);
        worst = worst.max((p - oracle).abs() / oracle);
        capped_ok &= solve_power_single(k, l, cap).unwrap() == p.min(cap);
    }
    let elapsed = started.elapsed();
    let ok = worst <= 1e-9 && capped_ok && within(elapsed, 1.0);
    assert!(verdict(1, ok, &format!("worst relative error {worst:.2e} over 1000 triples in {elapsed:.2?}")));
}

#[test]
fn criterion_2_convexity_certificate() {
    let started = Instant::now();
    let mut claims = audit_first_determinant(10_000, 7);
    claims.extend(audit_second_determinant(10_000, 8));
    let elapsed = started.elapsed();
    let needed = [
        "first_det.I_positive",
        "first_det.d2B_dx2_positive",
        "second_det.G1_positive",
        "second_det.hessian_psd",
        "second_det.hessian_matches_finite_differences",
    ];
    let mut ok = within(elapsed, 30.0);
    let mut detail = String::new();
    for id in needed {
        let c = claims.iter().find(|c| c.claim_id == id).unwrap();
        ok &= c.passed() && c.samples == 10_000;
        detail += &format!("{id}={}/{} ", c.violations, c.samples);
    }
    assert!(verdict(2, ok, &format!("violations {detail}in {elapsed:.2?}")));
}

#[test]
fn criterion_3_reference_constants() {
    let g_root = find_g_root();
    let vertex_root = find_vertex_root();
    let en = audit_en_bound();
    let max_e = en[0].observed.unwrap();
    let g_ok = (g_root - 41.4125).abs() <= 1e-3;
    let vertex_ok = (vertex_root - 2940.74).abs() <= 1.0;
    let en_ok = max_e <= 24.0;
    println!("  g root {g_root:.6} (target 41.4125 +- 0.001): {}", if g_ok { "ok" } else { "off" });
    println!("  vertex root {vertex_root:.4} (target 2940.74 +- 1): {}", if vertex_ok { "ok" } else { "off" });
    println!(
        "  max e over d in [10, 200] m = {max_e:.6} at d = {} m, reference {EN_BOUND_REFERENCE}, limit 24: {}",
        en[1].observed.unwrap(),
        if en_ok { "ok" } else { "exceeded" }
    );
    let ok = g_ok && vertex_ok && en_ok;
    assert!(verdict(
        3,
        ok,
        &format!("g root {g_root:.6}, vertex root {vertex_root:.3}, max e {max_e:.4} (reference {EN_BOUND_REFERENCE})")
    ));
}

fn table_one(seed: u64, n: usize) -> Scenario {
    generate_scenario(seed, n, &ScenarioParams::default()).unwrap()
}

#[test]
fn criterion_4_descent_and_convergence() {
    let opts = OptimizeOptions::default();
    let started = Instant::now();
    let (mut monotone, mut converged, mut feasible) = (0, 0, 0);
    let mut max_iters = 0;
    for seed in 0..100 {
        let s = table_one(seed, 14);
        let init = initial_decision(&s).unwrap();
        let (dec, trace) = optimize(&s, &init, &opts).unwrap();
        let mut prev = trace.initial_objective_s;
        let mut ok = true;
        for e in &trace.iterations {
            ok &= e.objective_s <= prev + 1e-9;
            prev = e.objective_s;
        }
        monotone += ok as usize;
        converged += (trace.converged && trace.iterations.len() <= 100) as usize;
        feasible += constraint_report(&s, &dec).unwrap().feasible as usize;
        max_iters = max_iters.max(trace.iterations.len());
    }
    let elapsed = started.elapsed();
    let ok = monotone == 100 && converged == 100 && feasible == 100 && within(elapsed, 120.0);
    assert!(verdict(
        4,
        ok,
        &format!("monotone {monotone}/100, converged {converged}/100, feasible {feasible}/100, max iterations {max_iters}, {elapsed:.2?}")
    ));
}

#[test]
fn criterion_5_baseline_dominance() {
    let opts = OptimizeOptions::default();
    let exh = ExhaustiveOptions::default();
    let mut dominated = 0;
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..100 {
        let s = table_one(seed, 14);
        let init = initial_decision(&s).unwrap();
        let proposed = run_baseline(&s, BaselineMode::Proposed, &init, &opts, &exh).unwrap().1.final_objective();
        let mut ok = true;
        for mode in [BaselineMode::OL, BaselineMode::OP, BaselineMode::OW] {
            let other = run_baseline(&s, mode, &init, &opts, &exh).unwrap().1.final_objective();
            ok &= proposed <= other;
            worst = worst.max(proposed - other);
        }
        dominated += ok as usize;
    }

    // reductions on the absorption sweep are reported, not asserted
    let spec = SweepSpec {
        variable: SweepVariable::Absorption,
        values: SweepVariable::Absorption.default_values(),
        trials: 20,
        modes: vec![BaselineMode::Proposed, BaselineMode::OL, BaselineMode::OP, BaselineMode::OW],
    };
    let out = run_sweep(&spec, &SweepConfig::default()).unwrap();
    for (mode, r) in max_reductions(&out) {
        println!("  largest reduction vs {mode} on the absorption sweep: {:.1}%", 100.0 * r);
    }
    let ok = dominated == 100;
    assert!(verdict(5, ok, &format!("proposed <= OL, OP, OW on {dominated}/100 scenarios (largest excess {worst:.3e} s)")));
}

#[test]
fn criterion_6_near_optimality() {
    let opts = OptimizeOptions::default();
    let exh = ExhaustiveOptions { grid_step: 0.5, ..Default::default() };
    let started = Instant::now();
    let mut passed = 0;
    let mut worst_ratio = 0.0f64;
    for i in 0..20u64 {
        let n = 2 + (i as usize % 5);
        let s = table_one(100 + i, n);
        let init = initial_decision(&s).unwrap();
        let proposed = optimize(&s, &init, &opts).unwrap().1.final_objective();
        let (_, reference) = exhaustive_search(&s, &opts, &exh).unwrap();
        let ratio = proposed / reference;
        worst_ratio = worst_ratio.max(ratio);
        passed += (ratio <= 1.02) as usize;
    }
    let elapsed = started.elapsed();
    let ok = passed == 20 && within(elapsed, 300.0);
    assert!(verdict(6, ok, &format!("{passed}/20 within 2% of the exhaustive reference, worst ratio {worst_ratio:.5}, {elapsed:.2?}")));
}

fn proposed_means(out: &SweepOutput, values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|&v| {
            let objs: Vec<f64> = out.objectives(v, BaselineMode::Proposed).into_iter().map(|o| o.unwrap()).collect();
            objs.iter().sum::<f64>() / objs.len() as f64
        })
        .collect()
}

fn sweep_means(variable: SweepVariable, energy: f64, altitude: f64) -> (Vec<f64>, Vec<f64>) {
    let values = variable.default_values();
    let spec = SweepSpec { variable, values: values.clone(), trials: 20, modes: vec![BaselineMode::Proposed] };
    let cfg = SweepConfig {
        base: ScenarioParams { energy_budget: energy, altitude, ..ScenarioParams::default() },
        ..SweepConfig::default()
    };
    let out = run_sweep(&spec, &cfg).unwrap();
    let means = proposed_means(&out, &values);
    (values, means)
}

fn strictly(v: &[f64], cmp: impl Fn(f64, f64) -> bool) -> bool {
    v.windows(2).all(|w| cmp(w[0], w[1]))
}

#[test]
fn criterion_7_figure_trends() {
    let started = Instant::now();
    let (_, by_a) = sweep_means(SweepVariable::Absorption, 8.0, 20.0);
    let a_ok = strictly(&by_a, |x, y| x < y);
    println!("  mean delay vs a: {by_a:.3?}");

    let mut bw_ok = true;
    let mut by_h = Vec::new();
    for h in [10.0, 20.0, 30.0] {
        let (_, m) = sweep_means(SweepVariable::TotalBandwidth, 2.0, h);
        println!("  mean delay vs B_W at H = {h} m: {m:.3?}");
        bw_ok &= strictly(&m, |x, y| x > y);
        by_h.push(m);
    }
    let h_ok = (0..by_h[0].len()).all(|i| by_h[0][i] < by_h[1][i] && by_h[1][i] < by_h[2][i]);

    let (_, by_n) = sweep_means(SweepVariable::NumUsers, 2.0, 20.0);
    let steps: Vec<f64> = by_n.windows(2).map(|w| w[1] - w[0]).collect();
    let n_ok = steps.iter().all(|&d| d > 0.0) && strictly(&steps, |x, y| x < y);
    println!("  mean delay vs N: {by_n:.3?} (increments {steps:.3?})");

    let elapsed = started.elapsed();
    let ok = a_ok && bw_ok && h_ok && n_ok && within(elapsed, 600.0);
    assert!(verdict(
        7,
        ok,
        &format!("increasing in a: {a_ok}, decreasing in B_W: {bw_ok}, increasing in H: {h_ok}, convex growth in N: {n_ok}, {elapsed:.2?}")
    ));
}

/// Smallest bandwidth meeting user `n`'s energy budget at power `p`,
/// bisected directly on the model's energy expression.
fn oracle_min_bandwidth(s: &Scenario, n: usize, p: f64, x: f64, y: f64) -> Option<f64> {
    let d = s.distance(n, x, y);
    let u = &s.users[n];
    let energy = |w: f64| {
        let k = snr_coefficient(w, d, &s.radio).unwrap();
        p * u.uplink_bits / (w * (k * p).ln_1p() / LN_2)
    };
    if energy(s.total_bandwidth) > u.energy_budget {
        return None;
    }
    if energy(1.0) <= u.energy_budget {
        return Some(1.0);
    }
    let (mut lo, mut hi) = (1.0f64, s.total_bandwidth);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if energy(mid) > u.energy_budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}

fn bandwidth_oracle_gap(s: &Scenario, p: &[f64], x: f64, y: f64) -> Option<f64> {
    let lo0 = oracle_min_bandwidth(s, 0, p[0], x, y)?;
    let lo1 = oracle_min_bandwidth(s, 1, p[1], x, y)?;
    let total = s.total_bandwidth;
    if lo0 + lo1 > total {
        return None;
    }
    let eval = |w0: f64| {
        let dec = Decision { x, y, power: p.to_vec(), bandwidth: vec![w0, total - w0] };
        total_objective(s, &dec).unwrap()
    };
    let step = 1e-5 * total;
    let hi0 = total - lo1;
    let mut best = eval(lo0).min(eval(hi0));
    let mut w0 = lo0 + step;
    while w0 < hi0 {
        best = best.min(eval(w0));
        w0 += step;
    }
    let w = solve_bandwidth(s, p, x, y).ok()?;
    let ours = total_objective(s, &Decision { x, y, power: p.to_vec(), bandwidth: w }).unwrap();
    Some((ours - best).abs() / best)
}

fn location_grid_minimum(s: &Scenario, p: &[f64], w: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..=500 {
        for j in 0..=500 {
            let dec = Decision { x: i as f64 * 0.1, y: j as f64 * 0.1, power: p.to_vec(), bandwidth: w.to_vec() };
            let links = derive_links(s, &dec).unwrap();
            let feasible = links.iter().zip(&s.users).zip(p).all(|((l, u), &pn)| l.uplink_delay * pn <= u.energy_budget);
            if feasible {
                best = best.min(links.iter().map(|l| l.uplink_delay + l.downlink_delay).sum());
            }
        }
    }
    best
}

#[test]
fn criterion_8_subproblem_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut bw_cases = 0;
    let mut bw_worst = 0.0f64;
    let mut seed = 0;
    while bw_cases < 50 {
        let s = table_one(seed, 2);
        seed += 1;
        let (x, y) = (rng.gen_range(0.0..50.0), rng.gen_range(0.0..50.0));
        let p = [rng.gen_range(1e-3..0.1), rng.gen_range(1e-3..0.1)];
        if let Some(gap) = bandwidth_oracle_gap(&s, &p, x, y) {
            bw_worst = bw_worst.max(gap);
            bw_cases += 1;
        }
    }
    let bw_ok = bw_worst <= 1e-8;
    println!("  bandwidth vs 1-D grid: worst relative gap {bw_worst:.2e} over {bw_cases} instances");

    let mut loc_worst = f64::NEG_INFINITY;
    for seed in 0..20 {
        let s = table_one(200 + seed, 5);
        let init = initial_decision(&s).unwrap();
        let p: Vec<f64> = init.power.iter().map(|&v| v * rng.gen_range(0.3..0.95)).collect();
        let sol = solve_location(&s, &p, &init.bandwidth, (init.x, init.y), &LocationOptions::default()).unwrap();
        let ours = location_objective(&s, &p, &init.bandwidth, sol.x, sol.y).unwrap();
        let grid = location_grid_minimum(&s, &p, &init.bandwidth);
        loc_worst = loc_worst.max((ours - grid) / grid);
    }
    let loc_ok = loc_worst <= 1e-6;
    println!("  location vs 0.1 m grid: worst relative excess {loc_worst:.2e} over 20 instances");
    let ok = bw_ok && loc_ok;
    assert!(verdict(8, ok, &format!("bandwidth gap {bw_worst:.2e} (<= 1e-8), location excess {loc_worst:.2e} (<= 1e-6)")));
}

fn run_cli(args: &[&str], out: &Path) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_thzuav"))
        .args(args)
        .arg("--out")
        .arg(out)
        .stderr(std::process::Stdio::null())
        .status()
        .expect("binary runs");
    status.code().unwrap_or(-1)
}

#[test]
fn criterion_9_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("scenario.json");
    let scenario_arg = scenario.to_str().unwrap().to_string();
    assert_eq!(run_cli(&["gen", "--seed", "3", "--users", "6"], &scenario), 0);
    let commands: Vec<Vec<&str>> = vec![
        vec!["gen", "--seed", "3", "--users", "6"],
        vec!["solve", "--scenario", &scenario_arg, "--format", "json"],
        vec!["solve", "--scenario", &scenario_arg, "--format", "csv"],
        vec!["compare", "--scenario", &scenario_arg, "--format", "csv", "--grid-step", "2"],
        vec!["compare", "--scenario", &scenario_arg, "--format", "json", "--grid-step", "2"],
        vec!["sweep", "--variable", "num_users", "--values", "2,4", "--trials", "3", "--format", "csv"],
        vec!["sweep", "--variable", "absorption_a", "--trials", "2", "--users", "5", "--format", "json"],
        vec!["verify", "--samples", "500"],
    ];
    let mut identical = 0;
    for (i, args) in commands.iter().enumerate() {
        let a = dir.path().join(format!("a{i}"));
        let b = dir.path().join(format!("b{i}"));
        let (ca, cb) = (run_cli(args, &a), run_cli(args, &b));
        let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let same = ca == cb && !ta.is_empty() && ta == tb;
        if !same {
            println!("  differs: {args:?}");
        }
        identical += same as usize;
    }
    let ok = identical == commands.len();
    assert!(verdict(9, ok, &format!("{identical}/{} commands byte-identical across reruns", commands.len())));
}
