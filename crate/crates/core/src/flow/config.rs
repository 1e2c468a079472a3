use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{FlowError, InitialSpec};
use crate::soliton::{build_profile, SolitonProfile, MIN_FLOW_POINTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stepper {
    ExplicitRk4,
    #[default]
    CrankNicolson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeftBoundary {
    #[default]
    NeumannZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RightBoundary {
    #[default]
    DirichletFrozen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Step-doubling local error bound relative to `max(sup|b|, 1e-12)`.
    /// `None` keeps the step fixed apart from parabolicity rejections.
    pub local_error: Option<f64>,
    pub max_halvings: u32,
    /// `dt <= cfl * h^2 / max(A_r)` for the explicit stepper.
    pub cfl: f64,
    /// Relative residual for the soliton profile.
    pub soliton: f64,
    /// Consecutive accepted steps before `dt` grows.
    pub grow_after: u32,
    pub grow_factor: f64,
    /// Upper bound on `dt` in adaptive mode.
    pub dt_max: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            local_error: None,
            max_halvings: 20,
            cfl: 0.5,
            soliton: 1e-12,
            grow_after: 10,
            grow_factor: 1.25,
            dt_max: None,
        }
    }
}

fn default_diag_every() -> usize {
    1
}

fn default_p() -> f64 {
    8.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub n: u32,
    pub s_min: f64,
    pub s_max: f64,
    pub points: usize,
    pub t_end: f64,
    /// Initial (and, without local error control, nominal) time step.
    pub dt: f64,
    #[serde(default)]
    pub stepper: Stepper,
    #[serde(default)]
    pub bc_left: LeftBoundary,
    #[serde(default)]
    pub bc_right: RightBoundary,
    #[serde(default = "default_diag_every")]
    pub diag_every: usize,
    /// Exponent of the `L^p` diagnostic.
    #[serde(default = "default_p")]
    pub p: f64,
    /// Times at which state snapshots are emitted; steps land on them exactly.
    #[serde(default)]
    pub checkpoints: Vec<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl FlowConfig {
    pub fn new(n: u32, s_min: f64, s_max: f64, points: usize, t_end: f64, dt: f64) -> Self {
        FlowConfig {
            n,
            s_min,
            s_max,
            points,
            t_end,
            dt,
            stepper: Stepper::default(),
            bc_left: LeftBoundary::default(),
            bc_right: RightBoundary::default(),
            diag_every: default_diag_every(),
            p: default_p(),
            checkpoints: Vec::new(),
            tolerances: Tolerances::default(),
        }
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |msg: String| Err(FlowError::Config(msg));
        if self.n == 0 {
            return bad("n must be >= 1".into());
        }
        if !(self.s_min < self.s_max) || !self.s_min.is_finite() || !self.s_max.is_finite() {
            return bad(format!("need s_min < s_max, got [{}, {}]", self.s_min, self.s_max));
        }
        if self.points < MIN_FLOW_POINTS {
            return bad(format!("need at least {MIN_FLOW_POINTS} points, got {}", self.points));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return bad(format!("t_end must be finite and >= 0, got {}", self.t_end));
        }
        if !(self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.diag_every == 0 {
            return bad("diag_every must be >= 1".into());
        }
        if !(self.p >= 2.0) {
            return bad(format!("p must be >= 2, got {}", self.p));
        }
        if let Some(tol) = self.tolerances.local_error {
            if !(tol > 0.0) {
                return bad(format!("local_error must be positive, got {tol}"));
            }
        }
        if !(self.tolerances.grow_factor >= 1.0) {
            return bad("grow_factor must be >= 1".into());
        }
        Ok(())
    }

    /// Checks `p alpha > n + 1`, needed for the `L^p` functional of barrier
    /// data with decay exponent `alpha` to be finite.
    pub fn validate_barrier_exponent(&self, alpha: f64) -> Result<(), FlowError> {
        if self.p * alpha > self.n as f64 + 1.0 {
            Ok(())
        } else {
            Err(FlowError::Config(format!(
                "p * alpha = {} must exceed n + 1 = {}",
                self.p * alpha,
                self.n + 1
            )))
        }
    }

    pub fn spacing(&self) -> f64 {
        (self.s_max - self.s_min) / (self.points - 1) as f64
    }

    pub fn build_base(&self) -> Result<Arc<SolitonProfile>, FlowError> {
        self.validate()?;
        Ok(Arc::new(build_profile(
            self.n,
            self.s_min,
            self.s_max,
            self.points,
            self.tolerances.soliton,
        )?))
    }
}

/// Two extra initial data bracketing `initial` for the comparison harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSpec {
    pub lower: InitialSpec,
    pub upper: InitialSpec,
}

/// Flow configuration file: numerical settings plus initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub flow: FlowConfig,
    pub initial: InitialSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonSpec>,
}
