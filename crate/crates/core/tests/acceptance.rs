//! End-to-end acceptance checks. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion; exits nonzero if any criterion fails.

use std::sync::Arc;
use std::time::{Duration, Instant};

use krs_core::barrier::{
    build_barrier, certification_profile, certify_barrier, find_admissible_r, BarrierSpec, Side,
    DEFAULT_CERT_S_MIN,
};
use krs_core::diagnostics::lp_quantity;
use krs_core::flow::{
    make_initial_perturbation, radial_rhs, run_comparison, run_flow, BarrierParams, BumpParams, FlowConfig,
    InitialSpec, NullSink, RadialState,
};
use krs_core::soliton::{build_profile, phi_derivs, solve_phi};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

const TOL: f64 = 1e-12;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn closed_form_n1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for i in 0..2001 {
        let s = -10.0 + 20.0 * i as f64 / 2000.0;
        let exact = s.exp().ln_1p();
        worst = worst.max((solve_phi(1, s, TOL).unwrap() - exact).abs());
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-10 && elapsed < Duration::from_secs(1),
        format!("max |phi - log(1+e^s)| = {worst:.2e}, {elapsed:.2?}"),
    )
}

fn ode_residual() -> Outcome {
    let mut worst = 0.0f64;
    for n in [2, 3] {
        let p = build_profile(n, -10.0, 60.0, 1401, TOL).unwrap();
        worst = worst.max(p.max_ode_residual());
    }
    outcome(worst <= 1e-10, format!("max relative residual = {worst:.2e} (n = 2, 3)"))
}

fn asymptotics() -> Outcome {
    let gaps = |s: f64| {
        let phi = solve_phi(2, s, TOL).unwrap();
        let (_, d2, d3) = phi_derivs(2, s, phi).unwrap();
        ((s * s * d2 - 1.0).abs(), (s.powi(3) * d3 + 2.0).abs())
    };
    let (g100, g200, g400) = (gaps(100.0), gaps(200.0), gaps(400.0));
    let pass = g200.0 <= 0.05
        && g200.1 <= 0.10
        && g100.0 > g200.0
        && g200.0 > g400.0
        && g100.1 > g200.1
        && g200.1 > g400.1;
    outcome(
        pass,
        format!(
            "|s^2 phi'' - 1| = {:.4}/{:.4}/{:.4}, |s^3 phi''' + 2| = {:.4}/{:.4}/{:.4} at s = 100/200/400",
            g100.0, g200.0, g400.0, g100.1, g200.1, g400.1
        ),
    )
}

fn barrier_certification() -> Outcome {
    let ladder = certification_profile(2, 0.5, DEFAULT_CERT_S_MIN, TOL).unwrap();
    let found = find_admissible_r(&ladder, 1.0, 0.5, Side::Upper, 1024.0).unwrap();
    let again = find_admissible_r(&ladder, 1.0, 0.5, Side::Upper, 1024.0).unwrap();
    let identical = found == again;
    let margins_ok = found.report.margins.iter().all(|m| m.min > 0.0)
        && found.report.s_min <= DEFAULT_CERT_S_MIN
        && found.report.s_max >= 8.0 * found.r;

    let soliton = Arc::new(certification_profile(2, 0.5, DEFAULT_CERT_S_MIN, TOL).unwrap());
    let spec = BarrierSpec::new(2, 0.0, 0.5, 0.5, Side::Upper).unwrap();
    let k0 = certify_barrier(&build_barrier(soliton, spec).unwrap());

    outcome(
        found.r <= 1024.0 && margins_ok && identical && k0.certified,
        format!(
            "K = 1: R = {} (min margin {:.2e}, rerun identical: {identical}); K = 0 at R = 1/2 certified: {}",
            found.r,
            found.report.min_margin(),
            k0.certified
        ),
    )
}

fn stationarity() -> Outcome {
    let start = Instant::now();
    let cfg = FlowConfig::new(2, -10.0, 60.0, 1401, 1.0, 0.01);
    let zero = RadialState::zero(cfg.build_base().unwrap()).unwrap();
    let run = run_flow(zero, &cfg, &mut NullSink).unwrap();
    let worst = run.series.samples.iter().map(|s| s.sup_abs()).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    outcome(
        run.completed() && worst <= 1e-8 && elapsed < Duration::from_secs(10),
        format!("max sup|b| = {worst:.2e} over {} samples, {elapsed:.2?}", run.series.len()),
    )
}

/// Sum of up to three smoothstep bumps with random signs, kept only when
/// parabolic.
fn random_state(rng: &mut StdRng, base: &Arc<krs_core::SolitonProfile>, lo: f64, hi: f64, amp: f64) -> RadialState {
    loop {
        let mut b = vec![0.0; base.len()];
        for _ in 0..rng.random_range(1..=3) {
            let bump = BumpParams {
                center: rng.random_range(lo..hi),
                width: rng.random_range(1.0..5.0),
                height: rng.random_range(-amp..amp),
            };
            for (v, w) in b.iter_mut().zip(bump.sample(&base.grid)) {
                *v += w;
            }
        }
        if let Ok(st) = RadialState::new(base.clone(), 0.0, b) {
            return st;
        }
    }
}

fn rhs_identity() -> Outcome {
    let base = Arc::new(build_profile(2, -10.0, 60.0, 1401, TOL).unwrap());
    let mut rng = StdRng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let st = random_state(&mut rng, &base, -8.0, 55.0, 0.2);
        let f = radial_rhs(&st).unwrap();
        let (a_r, beta) = st.linear_coefficients();
        for i in 0..st.len() - 1 {
            let lin = a_r[i] * st.d2b[i] + beta[i] * st.db[i];
            worst = worst.max((f[i] - lin).abs() / (1.0 + f[i].abs()));
        }
    }
    outcome(worst <= 1e-12, format!("max |F - linear form| / (1 + |F|) = {worst:.2e} over 100 states"))
}

fn upper_barrier_params() -> BarrierParams {
    BarrierParams {
        k: 0.1,
        alpha: 0.5,
        r: None,
        r_max: 1024.0,
    }
}

fn stability_run() -> Outcome {
    let start = Instant::now();
    let ladder = certification_profile(2, 0.5, DEFAULT_CERT_S_MIN, TOL).unwrap();
    let r = find_admissible_r(&ladder, 0.1, 0.5, Side::Upper, 1024.0).unwrap().r;
    let s_max = (8.0 * r).max(60.0);
    let points = ((s_max + 10.0) / 0.05).round() as usize + 1;
    let mut cfg = FlowConfig::new(2, -10.0, s_max, points, 50.0, 0.01);
    cfg.diag_every = 10;
    cfg.p = 8.0;
    cfg.validate_barrier_exponent(0.5).unwrap();
    let base = cfg.build_base().unwrap();
    let params = BarrierParams {
        r: Some(r),
        ..upper_barrier_params()
    };
    let init = make_initial_perturbation(&InitialSpec::BarrierUpper(params), base).unwrap();
    let run = run_flow(init.state, &cfg, &mut NullSink).unwrap();
    let series = &run.series;
    let osc_inc = series.osc_increase();
    let lp_inc = series.lp_increase();
    let first = series.first().unwrap().sup_abs();
    let last = series.last().unwrap().sup_abs();
    let monotone = series.all_monotone();
    let elapsed = start.elapsed();
    let pass = run.completed()
        && osc_inc <= 1e-10
        && lp_inc <= 1e-6
        && last <= 0.9 * first
        && monotone
        && elapsed < Duration::from_secs(300);
    outcome(
        pass,
        format!(
            "R = {r}, domain [-10, {s_max}]: osc increase {osc_inc:.2e}, I_8 increase {lp_inc:.2e}, \
             sup {first:.4} -> {last:.4}, monotone {monotone}, {} samples, {elapsed:.2?}",
            series.len()
        ),
    )
}

fn comparison() -> Outcome {
    let ladder = certification_profile(2, 0.5, DEFAULT_CERT_S_MIN, TOL).unwrap();
    let r_hi = find_admissible_r(&ladder, 0.1, 0.5, Side::Upper, 1024.0).unwrap().r;
    let r_lo = find_admissible_r(&ladder, 0.1, 0.5, Side::Lower, 1024.0).unwrap().r;
    let s_max = (8.0 * r_hi.max(r_lo)).max(60.0).ceil();
    let points = ((s_max + 10.0) / 0.05).round() as usize + 1;
    let mut cfg = FlowConfig::new(2, -10.0, s_max, points, 10.0, 0.01);
    cfg.diag_every = 5;
    let base = cfg.build_base().unwrap();
    let with_r = |r| BarrierParams {
        r: Some(r),
        ..upper_barrier_params()
    };
    let make = |spec| make_initial_perturbation(&spec, base.clone()).unwrap().state;
    let lower = make(InitialSpec::BarrierLower(with_r(r_lo)));
    let mid = make(InitialSpec::CompactBump(BumpParams {
        center: 2.0,
        width: 2.0,
        height: 0.05,
    }));
    let upper = make(InitialSpec::BarrierUpper(with_r(r_hi)));
    let out = run_comparison([lower, mid, upper], &cfg, 3).unwrap();
    let completed = out.runs.iter().all(|r| r.completed());
    outcome(
        completed && out.compared == out.runs[1].series.len() && out.max_violation <= 1e-8,
        format!(
            "R = {r_lo} (lower) / {r_hi} (upper): max ordering violation {:.2e} over {} samples",
            out.max_violation, out.compared
        ),
    )
}

fn max_principle() -> Outcome {
    let mut cfg = FlowConfig::new(2, -10.0, 30.0, 801, 2.0, 0.01);
    cfg.diag_every = 5;
    let base = cfg.build_base().unwrap();
    let mut rng = StdRng::seed_from_u64(9);
    let jobs: Vec<(RadialState, FlowConfig)> = (0..20)
        .map(|_| (random_state(&mut rng, &base, -6.0, 24.0, 0.1), cfg.clone()))
        .collect();
    let runs = krs_core::flow::run_many(&jobs, 4);
    let mut worst = 0.0f64;
    let mut completed = true;
    for r in &runs {
        let r = r.as_ref().unwrap();
        completed &= r.completed();
        worst = worst.max(r.series.sup_growth());
    }
    outcome(
        completed && worst <= 1e-8,
        format!("max sup_t|b| / sup|b(0)| - 1 = {worst:.2e} over 20 runs"),
    )
}

fn convergence() -> Outcome {
    let solve = |points: usize, dt: f64| {
        let cfg = FlowConfig::new(2, -5.0, 15.0, points, 1.0, dt);
        let base = cfg.build_base().unwrap();
        let b = BumpParams {
            center: 2.0,
            width: 2.0,
            height: 0.05,
        }
        .sample(&base.grid);
        let run = run_flow(RadialState::new(base, 0.0, b).unwrap(), &cfg, &mut NullSink).unwrap();
        run.final_state.b
    };
    let coarse = solve(201, 0.02);
    let medium = solve(401, 0.01);
    let fine = solve(801, 0.005);
    let mut d1 = 0.0f64;
    let mut d2 = 0.0f64;
    for i in 0..coarse.len() {
        d1 = d1.max((coarse[i] - medium[2 * i]).abs());
        d2 = d2.max((medium[2 * i] - fine[4 * i]).abs());
    }
    let ratio = d1 / d2;
    outcome(
        (3.2..=4.8).contains(&ratio),
        format!("successive differences {d1:.3e}, {d2:.3e}; ratio {ratio:.3}"),
    )
}

fn lp_finite_for_barrier() -> Outcome {
    let cfg = FlowConfig::new(2, -10.0, 60.0, 1401, 0.0, 0.01);
    let init = make_initial_perturbation(&InitialSpec::BarrierUpper(upper_barrier_params()), cfg.build_base().unwrap())
        .unwrap();
    let v = lp_quantity(&init.state, 8.0).unwrap();
    outcome(v.is_finite() && v > 0.0, format!("I_8 of the K = 0.1 barrier = {v:.6e}"))
}

type Check = fn() -> Outcome;

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("1 closed-form soliton (n = 1)", closed_form_n1),
        ("2 ODE residual", ode_residual),
        ("3 asymptotic leading orders", asymptotics),
        ("4 barrier certification", barrier_certification),
        ("5 stationarity", stationarity),
        ("6 RHS identity", rhs_identity),
        ("7 stability run", stability_run),
        ("8 comparison ordering", comparison),
        ("9 maximum principle", max_principle),
        ("10 scheme convergence", convergence),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let o = check();
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failures += usize::from(!o.pass);
    }
    if filter.is_empty() {
        let o = lp_finite_for_barrier();
        println!("{} supplementary I_p finiteness: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failures += usize::from(!o.pass);
    }
    if failures > 0 {
        eprintln!("{failures} acceptance check(s) failed");
        std::process::exit(1);
    }
}
