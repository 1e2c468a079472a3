use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use krs_core::barrier::{
    build_barrier, certification_profile, certify_barrier, find_admissible_r, BarrierError, BarrierSpec,
    CertificationReport, Side, DEFAULT_CERT_S_MIN,
};
use krs_core::diagnostics::{lp_tail, DiagnosticsSeries, DiagnosticsSummary, LpTail};
use krs_core::flow::{
    make_initial_perturbation, run_comparison, run_flow, DiagnosticsSink, FlowError, InitialPerturbation,
    InitialSpec, RadialState, RunConfig, Termination,
};
use krs_core::io;
use krs_core::soliton::{build_profile, SolitonProfile};

use crate::error::CliError;
use crate::manifest::{write_json, RunManifest};

const OSC_TOL: f64 = 1e-10;
const LP_TOL: f64 = 1e-6;
const SUP_TOL: f64 = 1e-8;
const ORDER_TOL: f64 = 1e-8;
const STATIONARY_TOL: f64 = 1e-8;

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn canonical_args<T: Serialize>(args: &T) -> Vec<u8> {
    serde_json::to_vec(args).expect("argument structs serialize")
}

/// Worker cap from `KRS_THREADS`, defaulting to the available parallelism.
pub fn thread_cap() -> usize {
    std::env::var("KRS_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Serialize)]
struct SolitonArgs {
    n: u32,
    s_min: f64,
    s_max: f64,
    points: usize,
    tol: f64,
}

#[derive(Serialize)]
struct SolitonReport {
    #[serde(flatten)]
    args: SolitonArgs,
    max_ode_residual: f64,
    invariants: String,
    /// `max |phi - log(1 + e^s)|`, only for `n = 1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    closed_form_max_deviation: Option<f64>,
}

pub fn soliton(n: u32, s_min: f64, s_max: f64, points: usize, tol: f64, out: &Path) -> Result<bool, CliError> {
    if n == 0 {
        return Err(CliError::Usage("--n must be >= 1".into()));
    }
    if points < 2 {
        return Err(CliError::Usage(format!("--points must be >= 2, got {points}")));
    }
    if !(s_min < s_max) || !s_min.is_finite() || !s_max.is_finite() {
        return Err(CliError::Usage(format!("need finite --s-min < --s-max, got {s_min}, {s_max}")));
    }
    if !(tol > 0.0) {
        return Err(CliError::Usage(format!("--tol must be positive, got {tol}")));
    }
    let args = SolitonArgs {
        n,
        s_min,
        s_max,
        points,
        tol,
    };
    let mut manifest = RunManifest::new("soliton", &canonical_args(&args));
    let profile = build_profile(n, s_min, s_max, points, tol).map_err(|e| CliError::Solver(e.to_string()))?;
    let invariants = match profile.check_invariants() {
        Ok(()) => "ok".to_string(),
        Err(v) => v.to_string(),
    };
    let closed_form_max_deviation = (n == 1).then(|| {
        profile
            .grid
            .iter()
            .zip(&profile.phi)
            .map(|(s, phi)| (phi - s.exp().ln_1p()).abs())
            .fold(0.0, f64::max)
    });
    let report = SolitonReport {
        args,
        max_ode_residual: profile.max_ode_residual(),
        invariants,
        closed_form_max_deviation,
    };
    ensure_dir(out)?;
    save_profile(out, &profile)?;
    write_json(&out.join("report.json"), &report)?;
    manifest.verdict("invariants", report.invariants == "ok");
    let manifest = manifest.finish(out)?;
    Ok(manifest.all_pass())
}

fn save_profile(out: &Path, profile: &SolitonProfile) -> Result<(), CliError> {
    io::save_profile(&out.join("profile.csv"), profile).map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Debug, Clone, Serialize)]
pub struct BarrierArgs {
    pub n: u32,
    #[serde(rename = "K")]
    pub k: f64,
    pub alpha: f64,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    #[serde(rename = "R_max")]
    pub r_max: f64,
    pub side: Side,
    pub tol: f64,
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct CertificationOutput<'a> {
    report: &'a CertificationReport,
    /// Candidates tried by the search, with their outcome.
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<Vec<(f64, bool)>>,
}

fn barrier_error(e: BarrierError) -> CliError {
    match e {
        BarrierError::Spec(_) | BarrierError::DimensionOne(_) | BarrierError::Grid(_) => {
            CliError::Usage(e.to_string())
        }
        BarrierError::NoAdmissibleR { .. } => CliError::Search(e.to_string()),
        _ => CliError::Solver(e.to_string()),
    }
}

pub fn barrier(args: BarrierArgs) -> Result<bool, CliError> {
    if args.n < 2 {
        return Err(barrier_error(BarrierError::DimensionOne(args.n)));
    }
    if !(args.tol > 0.0) {
        return Err(CliError::Usage(format!("--tol must be positive, got {}", args.tol)));
    }
    BarrierSpec::new(args.n, args.k, args.alpha, args.r.unwrap_or(0.5), args.side).map_err(barrier_error)?;
    let mut manifest = RunManifest::new("barrier", &canonical_args(&args));
    let out = &args.out;
    ensure_dir(out)?;

    let (r, trials) = match args.r {
        Some(r) => (r, None),
        None => {
            let ladder =
                certification_profile(args.n, 0.5, DEFAULT_CERT_S_MIN, args.tol).map_err(barrier_error)?;
            match find_admissible_r(&ladder, args.k, args.alpha, args.side, args.r_max) {
                Ok(found) => (found.r, Some(found.trials)),
                Err(BarrierError::NoAdmissibleR { r_max, last }) => {
                    let output = CertificationOutput {
                        report: &last,
                        trials: None,
                    };
                    write_json(&out.join("certification.json"), &output)?;
                    manifest.verdict("certified", false);
                    manifest.finish(out)?;
                    return Err(CliError::Search(format!(
                        "no certified R <= {r_max}; last candidate R = {}: {}",
                        last.spec.r,
                        last.failure_summary()
                    )));
                }
                Err(e) => return Err(barrier_error(e)),
            }
        }
    };

    let spec = BarrierSpec::new(args.n, args.k, args.alpha, r, args.side).map_err(barrier_error)?;
    let base = Arc::new(certification_profile(args.n, r, DEFAULT_CERT_S_MIN, args.tol).map_err(barrier_error)?);
    let profile = build_barrier(base, spec).map_err(barrier_error)?;
    let report = certify_barrier(&profile);
    io::save_barrier(&out.join("barrier.csv"), &profile).map_err(|e| CliError::Io(e.to_string()))?;
    write_json(
        &out.join("certification.json"),
        &CertificationOutput {
            report: &report,
            trials,
        },
    )?;
    manifest.verdict("certified", report.certified);
    manifest.finish(out)?;
    if report.certified {
        Ok(true)
    } else {
        Err(CliError::Search(format!("R = {r} is not certified: {}", report.failure_summary())))
    }
}

/// Writes checkpoint snapshots as they arrive.
struct CheckpointWriter {
    dir: PathBuf,
}

impl DiagnosticsSink for CheckpointWriter {
    fn on_checkpoint(&mut self, state: &RadialState) -> Result<(), FlowError> {
        io::save_state(&self.dir.join(io::state_file_name(state.t)), state)
            .map_err(|e| FlowError::Io(e.to_string()))
    }
}

fn initial_error(e: FlowError) -> CliError {
    match e {
        FlowError::NotCertified(_) => CliError::Search(e.to_string()),
        FlowError::Barrier(BarrierError::NoAdmissibleR { .. }) => CliError::Search(e.to_string()),
        FlowError::Barrier(b) => barrier_error(b),
        FlowError::Soliton(_) => CliError::Solver(e.to_string()),
        _ => CliError::Usage(format!("initial data: {e}")),
    }
}

fn run_error(e: FlowError) -> CliError {
    match e {
        FlowError::Io(msg) => CliError::Io(msg),
        FlowError::Config(_) | FlowError::GridMismatch(_) => CliError::Usage(e.to_string()),
        _ => CliError::Solver(e.to_string()),
    }
}

#[derive(Serialize)]
struct BarrierSummary {
    spec: BarrierSpec,
    certified: bool,
    min_margin: f64,
}

#[derive(Serialize)]
struct ComparisonSummary {
    compared_samples: usize,
    max_violation: f64,
    worst_t: f64,
    tolerance: f64,
}

#[derive(Serialize)]
struct FlowSummary {
    termination: Termination,
    accepted_steps: usize,
    rejected_steps: usize,
    final_t: f64,
    diagnostics: DiagnosticsSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    barrier: Option<BarrierSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lp_tail: Option<LpTail>,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<ComparisonSummary>,
    verdicts: BTreeMap<String, String>,
}

fn save_series(path: &Path, series: &DiagnosticsSeries) -> Result<(), CliError> {
    io::save_diagnostics(path, series).map_err(|e| CliError::Io(e.to_string()))
}

pub fn flow(config_path: &Path, out_dir: &Path) -> Result<bool, CliError> {
    let bytes = fs::read(config_path).map_err(|e| CliError::io(config_path, e))?;
    let cfg: RunConfig =
        serde_json::from_slice(&bytes).map_err(|e| CliError::Usage(format!("{}: {e}", config_path.display())))?;
    cfg.flow.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut manifest = RunManifest::new("flow", &bytes);
    let base = cfg.flow.build_base().map_err(|e| CliError::Solver(e.to_string()))?;

    // relative paths in from_file initial data resolve against the config
    let config_dir = config_path.parent().unwrap_or(Path::new("."));
    let resolve = |spec: &InitialSpec| match spec {
        InitialSpec::FromFile(p) if p.path.is_relative() => {
            let mut p = p.clone();
            p.path = config_dir.join(&p.path);
            InitialSpec::FromFile(p)
        }
        other => other.clone(),
    };
    let make = |spec: &InitialSpec| -> Result<InitialPerturbation, CliError> {
        make_initial_perturbation(&resolve(spec), base.clone()).map_err(initial_error)
    };
    let initial = make(&cfg.initial)?;
    let lp_tail = cfg.initial.barrier_alpha().map(|a| lp_tail(cfg.flow.n, a, cfg.flow.p));
    let barrier = initial.barrier.as_ref().map(|b| BarrierSummary {
        spec: b.spec,
        certified: b.report.certified,
        min_margin: b.report.min_margin(),
    });

    ensure_dir(out_dir)?;
    let (run, comparison) = match &cfg.comparison {
        None => {
            let mut sink = CheckpointWriter {
                dir: out_dir.to_path_buf(),
            };
            (run_flow(initial.state, &cfg.flow, &mut sink).map_err(run_error)?, None)
        }
        Some(cmp) => {
            let lower = make(&cmp.lower)?;
            let upper = make(&cmp.upper)?;
            let out = run_comparison([lower.state, initial.state, upper.state], &cfg.flow, thread_cap())
                .map_err(run_error)?;
            for st in &out.checkpoints[1] {
                io::save_state(&out_dir.join(io::state_file_name(st.t)), st)
                    .map_err(|e| CliError::Io(e.to_string()))?;
            }
            save_series(&out_dir.join("diagnostics_lower.csv"), &out.runs[0].series)?;
            save_series(&out_dir.join("diagnostics_upper.csv"), &out.runs[2].series)?;
            let summary = ComparisonSummary {
                compared_samples: out.compared,
                max_violation: out.max_violation,
                worst_t: out.worst_t,
                tolerance: ORDER_TOL,
            };
            let aborted = out.runs.iter().find(|r| !r.completed()).map(|r| r.termination.clone());
            let [_, mut mid, _] = out.runs;
            if let Some(t) = aborted {
                mid.termination = t;
            }
            (mid, Some(summary))
        }
    };

    save_series(&out_dir.join("diagnostics.csv"), &run.series)?;
    let diag = run.series.summary(OSC_TOL, LP_TOL, SUP_TOL);
    let initially_zero = diag.initial.is_some_and(|s| s.sup_abs() == 0.0);
    let initially_monotone = diag.initial.is_some_and(|s| s.monotone);
    if initially_zero {
        let worst = run.series.samples.iter().map(|s| s.sup_abs()).fold(0.0, f64::max);
        manifest.verdict("stationary", worst <= STATIONARY_TOL);
    }
    if initially_monotone {
        manifest.verdict("osc monotone", diag.osc_monotone.pass);
        manifest.verdict("monotone preserved", run.series.all_monotone());
    }
    if initial.barrier.is_some() {
        manifest.verdict("lp monotone", diag.lp_monotone.pass);
    }
    manifest.verdict("max principle", diag.max_principle.pass);
    if let Some(c) = &comparison {
        manifest.verdict("ordering preserved", c.max_violation <= ORDER_TOL);
    }
    let summary = FlowSummary {
        termination: run.termination.clone(),
        accepted_steps: run.accepted_steps,
        rejected_steps: run.rejected_steps,
        final_t: run.final_state.t,
        diagnostics: diag,
        barrier,
        lp_tail,
        comparison,
        verdicts: manifest.verdicts.clone(),
    };
    write_json(&out_dir.join("summary.json"), &summary)?;
    let manifest = manifest.finish(out_dir)?;
    for (name, v) in &manifest.verdicts {
        println!("{name}: {v}");
    }
    if let Termination::Aborted { t, reason } = &run.termination {
        return Err(CliError::FlowAbort(format!("at t = {t}: {reason}")));
    }
    Ok(manifest.all_pass())
}
