//! Time integration driver, parallel sweeps and the three-run comparison.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::stepper::{step, try_step};
use super::{FlowConfig, FlowError, RadialState};
use crate::diagnostics::{self, DiagnosticSample, DiagnosticsSeries};

/// Receives samples and checkpoint snapshots from one run, in time order.
pub trait DiagnosticsSink {
    fn on_sample(&mut self, _sample: &DiagnosticSample, _state: &RadialState) -> Result<(), FlowError> {
        Ok(())
    }

    fn on_checkpoint(&mut self, _state: &RadialState) -> Result<(), FlowError> {
        Ok(())
    }
}

pub struct NullSink;

impl DiagnosticsSink for NullSink {}

/// Keeps every sampled perturbation and every checkpoint state.
#[derive(Debug, Default, Clone)]
pub struct MemorySink {
    pub sampled: Vec<(f64, Vec<f64>)>,
    pub checkpoints: Vec<RadialState>,
}

impl DiagnosticsSink for MemorySink {
    fn on_sample(&mut self, sample: &DiagnosticSample, state: &RadialState) -> Result<(), FlowError> {
        self.sampled.push((sample.t, state.b.clone()));
        Ok(())
    }

    fn on_checkpoint(&mut self, state: &RadialState) -> Result<(), FlowError> {
        self.checkpoints.push(state.clone());
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Aborted { t: f64, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowRun {
    pub series: DiagnosticsSeries,
    pub final_state: RadialState,
    pub termination: Termination,
    pub accepted_steps: usize,
    /// Halvings and local-error rejections.
    pub rejected_steps: usize,
}

impl FlowRun {
    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }
}

fn same_grid(state: &RadialState, cfg: &FlowConfig) -> Result<(), FlowError> {
    let g = state.grid();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs());
    if g.len() != cfg.points || !close(g[0], cfg.s_min) || !close(g[g.len() - 1], cfg.s_max) {
        return Err(FlowError::GridMismatch(format!(
            "state has {} points on [{}, {}], config asks for {} on [{}, {}]",
            g.len(),
            g[0],
            g[g.len() - 1],
            cfg.points,
            cfg.s_min,
            cfg.s_max
        )));
    }
    if state.n() != cfg.n {
        return Err(FlowError::GridMismatch(format!("state has n = {}, config n = {}", state.n(), cfg.n)));
    }
    Ok(())
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Result of one adaptive attempt: the accepted state, step used and
/// rejections spent.
fn controlled_step(
    state: &RadialState,
    dt: f64,
    tol: f64,
    cfg: &FlowConfig,
) -> Result<(RadialState, f64, u32), FlowError> {
    let mut dt = dt;
    let mut rejected = 0;
    loop {
        let full = step(state, dt, cfg)?;
        rejected += full.halvings;
        dt = full.dt;
        let half = try_step(state, 0.5 * dt, cfg).and_then(|mid| try_step(&mid, 0.5 * dt, cfg));
        if let Ok(half) = half {
            let scale = state.sup_abs().max(1e-12);
            let err = max_abs_diff(&full.state.b, &half.b) / 3.0 / scale;
            if err <= tol {
                return Ok((half, dt, rejected));
            }
        }
        if rejected >= cfg.tolerances.max_halvings {
            return Err(FlowError::StepAborted {
                t: state.t,
                dt,
                halvings: rejected,
                reason: "local error tolerance not met".into(),
            });
        }
        rejected += 1;
        dt *= 0.5;
    }
}

/// Integrates from `initial` to `cfg.t_end`.
///
/// Samples diagnostics at the initial time, after every `diag_every`
/// accepted steps and at the final time. Steps are shortened to land exactly
/// on checkpoints and on `t_end`. A step that cannot be completed ends the
/// run early with `Termination::Aborted`; the series up to that point is kept.
pub fn run_flow(
    initial: RadialState,
    cfg: &FlowConfig,
    sink: &mut dyn DiagnosticsSink,
) -> Result<FlowRun, FlowError> {
    cfg.validate()?;
    same_grid(&initial, cfg)?;
    let t_end = cfg.t_end;
    let mut targets: Vec<f64> = cfg
        .checkpoints
        .iter()
        .copied()
        .filter(|&c| c > initial.t && c < t_end)
        .collect();
    targets.push(t_end);
    targets.sort_by(f64::total_cmp);
    targets.dedup();
    let is_checkpoint = |t: f64| cfg.checkpoints.contains(&t);

    let mut series = DiagnosticsSeries::new(cfg.p);
    let mut state = initial;
    let first = diagnostics::sample(&state, cfg.p)?;
    series.push(first)?;
    sink.on_sample(&first, &state)?;
    if is_checkpoint(state.t) {
        sink.on_checkpoint(&state)?;
    }

    let dt_cap = match cfg.tolerances.local_error {
        Some(_) => cfg.tolerances.dt_max.unwrap_or(f64::INFINITY),
        None => cfg.dt,
    };
    let mut dt = cfg.dt;
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut streak = 0u32;
    let mut termination = Termination::Completed;
    let mut target_idx = 0;
    // times are anchor + k * dt while dt is unchanged, avoiding drift from
    // repeated addition
    let mut anchor = (state.t, dt, 0u32);

    while target_idx < targets.len() && state.t < t_end {
        let target = targets[target_idx];
        let remaining = target - state.t;
        let landing = remaining <= dt * (1.0 + 1e-9);
        let h = if landing { remaining } else { dt };
        let attempt = match cfg.tolerances.local_error {
            Some(tol) => controlled_step(&state, h, tol, cfg),
            None => step(&state, h, cfg).map(|o| (o.state, o.dt, o.halvings)),
        };
        let (mut next, used, halvings) = match attempt {
            Ok(v) => v,
            Err(FlowError::StepAborted { t, reason, .. }) => {
                termination = Termination::Aborted { t, reason };
                break;
            }
            Err(e) => return Err(e),
        };
        let landed = landing && halvings == 0;
        if landed {
            next.t = target;
            target_idx += 1;
        } else if halvings == 0 && used == anchor.1 {
            anchor.2 += 1;
            next.t = anchor.0 + f64::from(anchor.2) * anchor.1;
        }
        state = next;
        accepted += 1;
        let dt_before = dt;
        rejected += halvings as usize;
        if halvings > 0 {
            dt = used;
            streak = 0;
        } else {
            streak += 1;
            if streak >= cfg.tolerances.grow_after {
                dt = (dt * cfg.tolerances.grow_factor).min(dt_cap);
                streak = 0;
            }
        }

        if landed || halvings > 0 || dt != dt_before || used != anchor.1 {
            anchor = (state.t, dt, 0);
        }

        let done = state.t >= t_end;
        if accepted.is_multiple_of(cfg.diag_every) || done {
            let s = diagnostics::sample(&state, cfg.p)?;
            series.push(s)?;
            sink.on_sample(&s, &state)?;
        }
        if landed && is_checkpoint(state.t) {
            sink.on_checkpoint(&state)?;
        }
    }

    if termination != Termination::Completed && series.last().map(|s| s.t) != Some(state.t) {
        let s = diagnostics::sample(&state, cfg.p)?;
        series.push(s)?;
        sink.on_sample(&s, &state)?;
    }

    Ok(FlowRun {
        series,
        final_state: state,
        termination,
        accepted_steps: accepted,
        rejected_steps: rejected,
    })
}

/// Applies `f` to every item on at most `threads` scoped worker threads,
/// returning results in input order.
pub(crate) fn parallel_map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = threads.max(1).min(items.len());
    if workers <= 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every item processed"))
        .collect()
}

/// Runs independent flows on at most `threads` worker threads.
pub fn run_many(jobs: &[(RadialState, FlowConfig)], threads: usize) -> Vec<Result<FlowRun, FlowError>> {
    parallel_map(jobs, threads, |(state, cfg)| run_flow(state.clone(), cfg, &mut NullSink))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonOutcome {
    /// Runs from the lower, middle and upper initial data.
    pub runs: [FlowRun; 3],
    /// Sample times present in all three runs.
    pub compared: usize,
    /// Largest `max(b_lower - b_mid, b_mid - b_upper, 0)` over compared
    /// samples and grid points.
    pub max_violation: f64,
    pub worst_t: f64,
    /// Checkpoint states of each run.
    pub checkpoints: [Vec<RadialState>; 3],
}

/// Runs three flows from `[lower, mid, upper]` in parallel and checks that
/// the pointwise ordering persists at every common sample time.
pub fn run_comparison(
    initials: [RadialState; 3],
    cfg: &FlowConfig,
    threads: usize,
) -> Result<ComparisonOutcome, FlowError> {
    let results = parallel_map(&initials, threads, |st| {
        let mut sink = MemorySink::default();
        run_flow(st.clone(), cfg, &mut sink).map(|run| (run, sink))
    });
    let mut runs = Vec::with_capacity(3);
    let mut traces = Vec::with_capacity(3);
    let mut checkpoints = Vec::with_capacity(3);
    for r in results {
        let (run, sink) = r?;
        runs.push(run);
        traces.push(sink.sampled);
        checkpoints.push(sink.checkpoints);
    }
    let mut compared = 0;
    let mut max_violation = 0.0f64;
    let mut worst_t = f64::NAN;
    let (lo, mid, hi) = (&traces[0], &traces[1], &traces[2]);
    let (mut j, mut k) = (0, 0);
    for (t, b_lo) in lo {
        while j < mid.len() && mid[j].0 < *t {
            j += 1;
        }
        while k < hi.len() && hi[k].0 < *t {
            k += 1;
        }
        if j < mid.len() && k < hi.len() && mid[j].0 == *t && hi[k].0 == *t {
            compared += 1;
            let b_mid = &mid[j].1;
            let b_hi = &hi[k].1;
            for i in 0..b_lo.len() {
                let v = (b_lo[i] - b_mid[i]).max(b_mid[i] - b_hi[i]);
                if v > max_violation {
                    max_violation = v;
                    worst_t = *t;
                }
            }
        }
    }
    let runs: [FlowRun; 3] = runs.try_into().expect("three runs");
    let checkpoints: [Vec<RadialState>; 3] = checkpoints.try_into().expect("three runs");
    Ok(ComparisonOutcome {
        runs,
        compared,
        max_violation,
        worst_t,
        checkpoints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{BumpParams, Stepper};

    fn small_cfg() -> FlowConfig {
        let mut cfg = FlowConfig::new(2, -4.0, 16.0, 201, 0.5, 0.02);
        cfg.checkpoints = vec![0.0, 0.25, 0.3];
        cfg.diag_every = 3;
        cfg
    }

    fn bump_state(cfg: &FlowConfig, height: f64) -> RadialState {
        let base = cfg.build_base().unwrap();
        let b = BumpParams {
            center: 3.0,
            width: 3.0,
            height,
        }
        .sample(&base.grid);
        RadialState::new(base, 0.0, b).unwrap()
    }

    #[test]
    fn lands_on_checkpoints_and_end() {
        let cfg = small_cfg();
        let mut sink = MemorySink::default();
        let run = run_flow(bump_state(&cfg, 0.05), &cfg, &mut sink).unwrap();
        assert!(run.completed());
        assert_eq!(run.final_state.t, 0.5);
        let times: Vec<f64> = sink.checkpoints.iter().map(|s| s.t).collect();
        assert_eq!(times, vec![0.0, 0.25, 0.3]);
        assert_eq!(run.series.first().unwrap().t, 0.0);
        assert_eq!(run.series.last().unwrap().t, 0.5);
        assert_eq!(sink.sampled.len(), run.series.len());
        assert!(run.series.samples.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn zero_initial_stays_zero() {
        let cfg = small_cfg();
        let base = cfg.build_base().unwrap();
        let run = run_flow(RadialState::zero(base).unwrap(), &cfg, &mut NullSink).unwrap();
        assert!(run.series.samples.iter().all(|s| s.sup_abs() <= 1e-8));
    }

    #[test]
    fn adaptive_mode_grows_dt() {
        let mut cfg = small_cfg();
        cfg.t_end = 2.0;
        cfg.checkpoints.clear();
        cfg.dt = 1e-3;
        cfg.tolerances.local_error = Some(1e-4);
        cfg.tolerances.dt_max = Some(0.1);
        let run = run_flow(bump_state(&cfg, 0.05), &cfg, &mut NullSink).unwrap();
        assert!(run.completed());
        // fixed dt would need 2000 steps
        assert!(run.accepted_steps < 1000, "{} steps", run.accepted_steps);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let cfg = small_cfg();
        let mut other = cfg.clone();
        other.points = 101;
        assert!(matches!(
            run_flow(bump_state(&other, 0.0), &cfg, &mut NullSink),
            Err(FlowError::GridMismatch(_))
        ));
    }

    #[test]
    fn abort_is_recorded_not_raised() {
        let mut cfg = small_cfg();
        cfg.stepper = Stepper::ExplicitRk4;
        cfg.dt = 1.0;
        cfg.tolerances.max_halvings = 1;
        let run = run_flow(bump_state(&cfg, 0.05), &cfg, &mut NullSink).unwrap();
        assert!(matches!(run.termination, Termination::Aborted { .. }));
        assert_eq!(run.accepted_steps, 0);
    }

    #[test]
    fn parallel_matches_sequential() {
        let cfg = small_cfg();
        let jobs: Vec<(RadialState, FlowConfig)> =
            [0.01, 0.02, 0.03].iter().map(|&h| (bump_state(&cfg, h), cfg.clone())).collect();
        let par = run_many(&jobs, 3);
        let seq = run_many(&jobs, 1);
        for (a, b) in par.iter().zip(&seq) {
            assert_eq!(a.as_ref().unwrap(), b.as_ref().unwrap());
        }
    }

    #[test]
    fn comparison_of_ordered_bumps() {
        let cfg = small_cfg();
        let out = run_comparison(
            [bump_state(&cfg, 0.01), bump_state(&cfg, 0.02), bump_state(&cfg, 0.03)],
            &cfg,
            2,
        )
        .unwrap();
        assert_eq!(out.compared, out.runs[0].series.len());
        assert!(out.max_violation <= 0.0, "{}", out.max_violation);
    }
}
