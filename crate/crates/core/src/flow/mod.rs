//! Normalized radial flow of potential perturbations.
//!
//! With `phi = u_0'` and `phi' = u_0''` from the soliton profile, a radial
//! perturbation `b(s, t)` evolves by
//!
//! ```text
//! b_t = log((phi' + b'') / phi') + (n - 1) log((phi + b') / phi) + b'
//!     = A_r b'' + ((n - 1) A_t + 1) b'
//! ```
//!
//! with `A_r = int_0^1 dtau / (phi' + tau b'')` and
//! `A_t = int_0^1 dtau / (phi + tau b')`. The zero perturbation (the
//! soliton itself) is stationary.
//!
//! Discretization: second-order central differences on the uniform soliton
//! grid, homogeneous Neumann condition at the left end, Dirichlet data frozen
//! at the initial value at the right end.

mod config;
mod initial;
mod run;
mod stepper;

use std::sync::Arc;

use thiserror::Error;

use crate::barrier::BarrierError;
use crate::soliton::{SolitonError, SolitonProfile};

pub use config::{ComparisonSpec, FlowConfig, LeftBoundary, RightBoundary, RunConfig, Stepper, Tolerances};
pub use initial::{
    make_initial_perturbation, BarrierInfo, BarrierParams, BumpParams, FileParams, InitialPerturbation,
    InitialSpec,
};
pub use run::{
    run_comparison, run_flow, run_many, ComparisonOutcome, DiagnosticsSink, FlowRun, MemorySink,
    NullSink, Termination,
};
pub use stepper::{step, StepOutcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("invalid flow configuration: {0}")]
    Config(String),
    #[error(
        "parabolicity violated at index {index} (s = {s}): phi' + b'' = {radial:e}, phi + b' = {tangential:e}"
    )]
    Parabolicity {
        index: usize,
        s: f64,
        radial: f64,
        tangential: f64,
    },
    #[error("explicit step dt = {dt:e} exceeds the stability limit {limit:e}")]
    Cfl { dt: f64, limit: f64 },
    #[error("step aborted at t = {t} after {halvings} halvings (last dt = {dt:e}): {reason}")]
    StepAborted {
        t: f64,
        dt: f64,
        halvings: u32,
        reason: String,
    },
    #[error("state grid does not match the soliton grid: {0}")]
    GridMismatch(String),
    #[error("initial barrier is not certified: {0}")]
    NotCertified(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Soliton(#[from] SolitonError),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
    #[error(transparent)]
    Diagnostics(#[from] crate::diagnostics::DiagnosticsError),
}

/// Perturbation of the soliton potential on the profile grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialState {
    pub t: f64,
    pub base: Arc<SolitonProfile>,
    pub b: Vec<f64>,
    pub db: Vec<f64>,
    pub d2b: Vec<f64>,
}

/// `b'` and `b''` under the flow discretization.
///
/// Row 0 uses the Neumann ghost point `b[-1] = b[1]`; the last row uses
/// one-sided second-order stencils.
pub fn spatial_derivatives(b: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = b.len();
    let mut db = vec![0.0; n];
    let mut d2b = vec![0.0; n];
    if n < 4 {
        return (db, d2b);
    }
    let h2 = h * h;
    d2b[0] = 2.0 * (b[1] - b[0]) / h2;
    for i in 1..n - 1 {
        db[i] = (b[i + 1] - b[i - 1]) / (2.0 * h);
        d2b[i] = (b[i + 1] - 2.0 * b[i] + b[i - 1]) / h2;
    }
    let m = n - 1;
    db[m] = (3.0 * b[m] - 4.0 * b[m - 1] + b[m - 2]) / (2.0 * h);
    d2b[m] = (2.0 * b[m] - 5.0 * b[m - 1] + 4.0 * b[m - 2] - b[m - 3]) / h2;
    (db, d2b)
}

/// `int_0^1 dtau / (x + tau y) = log1p(y/x) / y`, with the two-term Taylor
/// expansion `1/x - y/(2x^2)` once `|y| < 1e-8 x`.
pub fn tau_integral(x: f64, y: f64) -> f64 {
    if y.abs() < 1e-8 * x {
        1.0 / x - y / (2.0 * x * x)
    } else {
        (y / x).ln_1p() / y
    }
}

/// Index, location and margins of the worst parabolicity violation among the
/// evolving nodes (all but the Dirichlet node), if any.
pub(crate) fn find_violation(
    base: &SolitonProfile,
    db: &[f64],
    d2b: &[f64],
) -> Option<FlowError> {
    let mut worst: Option<(f64, usize)> = None;
    for i in 0..base.len() - 1 {
        let radial = base.dphi[i] + d2b[i];
        let tangential = base.phi[i] + db[i];
        if !(radial > 0.0 && tangential > 0.0) {
            let rel = (radial / base.dphi[i]).min(tangential / base.phi[i]);
            let rel = if rel.is_nan() { f64::NEG_INFINITY } else { rel };
            if worst.is_none_or(|(w, _)| rel < w) {
                worst = Some((rel, i));
            }
        }
    }
    worst.map(|(_, i)| FlowError::Parabolicity {
        index: i,
        s: base.grid[i],
        radial: base.dphi[i] + d2b[i],
        tangential: base.phi[i] + db[i],
    })
}

/// Linear-form coefficients `(A_r, (n-1) A_t + 1)` at every node.
pub(crate) fn coefficients_from(
    base: &SolitonProfile,
    db: &[f64],
    d2b: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let m = base.n as f64 - 1.0;
    let a_r = (0..base.len()).map(|i| tau_integral(base.dphi[i], d2b[i])).collect();
    let beta = (0..base.len())
        .map(|i| m * tau_integral(base.phi[i], db[i]) + 1.0)
        .collect();
    (a_r, beta)
}

impl RadialState {
    /// Builds a state from perturbation values, computing derivatives and
    /// checking parabolicity.
    pub fn new(base: Arc<SolitonProfile>, t: f64, b: Vec<f64>) -> Result<Self, FlowError> {
        if b.len() != base.len() {
            return Err(FlowError::GridMismatch(format!(
                "{} values for {} grid points",
                b.len(),
                base.len()
            )));
        }
        if !base.sufficient_for_flow() {
            return Err(FlowError::Config(format!(
                "grid of {} points is too coarse for the flow",
                base.len()
            )));
        }
        let (db, d2b) = spatial_derivatives(&b, base.spacing());
        if let Some(err) = find_violation(&base, &db, &d2b) {
            return Err(err);
        }
        Ok(RadialState { t, base, b, db, d2b })
    }

    pub fn zero(base: Arc<SolitonProfile>) -> Result<Self, FlowError> {
        let len = base.len();
        Self::new(base, 0.0, vec![0.0; len])
    }

    pub fn grid(&self) -> &[f64] {
        &self.base.grid
    }

    pub fn n(&self) -> u32 {
        self.base.n
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.base.spacing()
    }

    pub fn sup_abs(&self) -> f64 {
        self.b.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Smallest `phi' + b''` and `phi + b'` over the evolving nodes.
    pub fn parabolicity_margins(&self) -> (f64, f64) {
        let last = self.len() - 1;
        let radial = (0..last)
            .map(|i| self.base.dphi[i] + self.d2b[i])
            .fold(f64::INFINITY, f64::min);
        let tangential = (0..last)
            .map(|i| self.base.phi[i] + self.db[i])
            .fold(f64::INFINITY, f64::min);
        (radial, tangential)
    }

    /// `(A_r, (n-1) A_t + 1)` at every node.
    pub fn linear_coefficients(&self) -> (Vec<f64>, Vec<f64>) {
        coefficients_from(&self.base, &self.db, &self.d2b)
    }
}

/// Nonlinear right-hand side at every node; zero at the Dirichlet node.
pub(crate) fn rhs_values(base: &SolitonProfile, db: &[f64], d2b: &[f64]) -> Result<Vec<f64>, FlowError> {
    if let Some(err) = find_violation(base, db, d2b) {
        return Err(err);
    }
    let m = base.n as f64 - 1.0;
    let last = base.len() - 1;
    Ok((0..base.len())
        .map(|i| {
            if i == last {
                0.0
            } else {
                (d2b[i] / base.dphi[i]).ln_1p() + m * (db[i] / base.phi[i]).ln_1p() + db[i]
            }
        })
        .collect())
}

/// `log((phi'+b'')/phi') + (n-1) log((phi+b')/phi) + b'` at every node
/// (zero at the frozen right boundary).
pub fn radial_rhs(state: &RadialState) -> Result<Vec<f64>, FlowError> {
    rhs_values(&state.base, &state.db, &state.d2b)
}
