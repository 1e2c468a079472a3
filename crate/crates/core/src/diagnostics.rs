//! Convergence functionals of a radial perturbation.
//!
//! `I_p` is taken in radial form. For a radial potential `u(z) = U(log|z|^2)`
//! the complex Hessian has eigenvalue `U''/|z|^2` once (radial) and `U'/|z|^2`
//! with multiplicity `n - 1`. Averaging the inverse metrics of
//! `u_0 + tau b` over `tau` gives a metric with determinant
//! `|z|^(-2n) A_r^(-1) A_t^(-(n-1))`, and `|z|^(-2n)` cancels against Lebesgue
//! measure written in `s`, so up to a positive constant
//!
//! ```text
//! I_p = int |b|^p A_r^(-1) A_t^(-(n-1)) ds.
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{tau_integral, RadialState};
use crate::quadrature::composite_simpson;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("L^p exponent must be >= 2, got {0}")]
    Exponent(f64),
    #[error("parabolicity fails at s = {s}; the interpolated metric is undefined")]
    Parabolicity { s: f64 },
    #[error("sample times must increase strictly: {prev} then {next}")]
    Time { prev: f64, next: f64 },
}

/// `(sup b, inf b, sup b - inf b)` over the grid.
pub fn oscillation(state: &RadialState) -> (f64, f64, f64) {
    let sup = state.b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let inf = state.b.iter().copied().fold(f64::INFINITY, f64::min);
    (sup, inf, sup - inf)
}

fn lp_integrand(state: &RadialState, p: f64) -> Result<Vec<f64>, DiagnosticsError> {
    if !(p >= 2.0) {
        return Err(DiagnosticsError::Exponent(p));
    }
    let base = &state.base;
    let m = base.n as i32 - 1;
    let mut values = Vec::with_capacity(state.len());
    for i in 0..state.len() {
        let radial = base.dphi[i] + state.d2b[i];
        let tangential = base.phi[i] + state.db[i];
        if !(radial > 0.0 && tangential > 0.0) {
            return Err(DiagnosticsError::Parabolicity { s: base.grid[i] });
        }
        let b = state.b[i].abs();
        if b == 0.0 {
            values.push(0.0);
            continue;
        }
        let a_r = tau_integral(base.dphi[i], state.d2b[i]);
        let a_t = tau_integral(base.phi[i], state.db[i]);
        values.push(b.powf(p) / (a_r * a_t.powi(m)));
    }
    Ok(values)
}

/// `I_p` by composite Simpson on the state grid (normalizing constant 1).
pub fn lp_quantity(state: &RadialState, p: f64) -> Result<f64, DiagnosticsError> {
    let values = lp_integrand(state, p)?;
    Ok(composite_simpson(&values, state.spacing()))
}

/// `I_p` with a quadrature error estimate: the difference between Simpson
/// on the full grid and on every other node, divided by 15.
pub fn lp_quantity_with_error(state: &RadialState, p: f64) -> Result<(f64, f64), DiagnosticsError> {
    let values = lp_integrand(state, p)?;
    let h = state.spacing();
    let fine = composite_simpson(&values, h);
    if values.len() % 2 == 0 || values.len() < 5 {
        return Ok((fine, 0.0));
    }
    let coarse_values: Vec<f64> = values.iter().step_by(2).copied().collect();
    let coarse = composite_simpson(&coarse_values, 2.0 * h);
    Ok((fine, (fine - coarse).abs() / 15.0))
}

/// Decay of the `I_p` integrand for data behaving like `s^(-alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpTail {
    /// Integrand decays like `s^exponent` with `exponent = n - 1 - alpha p`.
    pub exponent: f64,
    /// True when the integral over `[s, inf)` diverges.
    pub divergent: bool,
}

pub fn lp_tail(n: u32, alpha: f64, p: f64) -> LpTail {
    let exponent = n as f64 - 1.0 - alpha * p;
    LpTail {
        exponent,
        divergent: exponent >= -1.0,
    }
}

/// Min/max over the grid of `(phi' + b'')/phi'` and `(phi + b')/phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceRatios {
    pub rr_min: f64,
    pub rr_max: f64,
    pub tt_min: f64,
    pub tt_max: f64,
}

pub fn equivalence_ratios(state: &RadialState) -> EquivalenceRatios {
    let base = &state.base;
    let mut out = EquivalenceRatios {
        rr_min: f64::INFINITY,
        rr_max: f64::NEG_INFINITY,
        tt_min: f64::INFINITY,
        tt_max: f64::NEG_INFINITY,
    };
    for i in 0..state.len() {
        let rr = 1.0 + state.d2b[i] / base.dphi[i];
        let tt = 1.0 + state.db[i] / base.phi[i];
        out.rr_min = out.rr_min.min(rr);
        out.rr_max = out.rr_max.max(rr);
        out.tt_min = out.tt_min.min(tt);
        out.tt_max = out.tt_max.max(tt);
    }
    out
}

/// Relative tolerance for monotonicity and the crossing dead band.
pub const MONOTONE_TOL: f64 = 1e-12;

/// Whether `b` is nonincreasing (within `1e-12 * max|b|`) and the number of
/// strict sign changes of `b - level`, ignoring values within the dead band.
pub fn monotone_and_sign_changes(b: &[f64], level: f64) -> (bool, usize) {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = MONOTONE_TOL * scale;
    let monotone = b.windows(2).all(|w| w[1] <= w[0] + tol);
    let mut crossings = 0;
    let mut last_sign = 0i8;
    for &v in b {
        let d = v - level;
        let sign = if d > tol {
            1
        } else if d < -tol {
            -1
        } else {
            0
        };
        if sign != 0 {
            if last_sign != 0 && sign != last_sign {
                crossings += 1;
            }
            last_sign = sign;
        }
    }
    (monotone, crossings)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSample {
    pub t: f64,
    pub sup: f64,
    pub inf: f64,
    pub osc: f64,
    pub lp: f64,
    pub eq_rr_min: f64,
    pub eq_rr_max: f64,
    pub eq_tt_min: f64,
    pub eq_tt_max: f64,
    pub monotone: bool,
    /// Crossings of the level `(sup + inf) / 2`.
    pub sign_changes: usize,
    /// Simpson error estimate for `lp`.
    pub lp_error: f64,
    /// `min(phi' + b'')` and `min(phi + b')` over the evolving nodes.
    pub radial_margin: f64,
    pub tangential_margin: f64,
    /// `A_r b'` at the right end: diffusive flux through the frozen boundary.
    pub boundary_flux: f64,
}

impl DiagnosticSample {
    pub fn sup_abs(&self) -> f64 {
        self.sup.abs().max(self.inf.abs())
    }
}

pub fn sample(state: &RadialState, p: f64) -> Result<DiagnosticSample, DiagnosticsError> {
    let (sup, inf, osc) = oscillation(state);
    let (lp, lp_error) = lp_quantity_with_error(state, p)?;
    let eq = equivalence_ratios(state);
    let (monotone, sign_changes) = monotone_and_sign_changes(&state.b, 0.5 * (sup + inf));
    let (radial_margin, tangential_margin) = state.parabolicity_margins();
    let last = state.len() - 1;
    let boundary_flux = tau_integral(state.base.dphi[last], state.d2b[last]) * state.db[last];
    Ok(DiagnosticSample {
        t: state.t,
        sup,
        inf,
        osc,
        lp,
        eq_rr_min: eq.rr_min,
        eq_rr_max: eq.rr_max,
        eq_tt_min: eq.tt_min,
        eq_tt_max: eq.tt_max,
        monotone,
        sign_changes,
        lp_error,
        radial_margin,
        tangential_margin,
        boundary_flux,
    })
}

pub const CSV_HEADER: &str = "t,sup,inf,osc,lp,eq_rr_min,eq_rr_max,eq_tt_min,eq_tt_max,monotone,sign_changes";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSeries {
    pub p: f64,
    pub samples: Vec<DiagnosticSample>,
}

/// Largest violation of a nonincreasing sequence, relative to `scale`.
fn worst_increase(values: impl Iterator<Item = f64>, scale: f64) -> f64 {
    let mut prev: Option<f64> = None;
    let mut worst = 0.0f64;
    for v in values {
        if let Some(p) = prev {
            worst = worst.max((v - p) / scale);
        }
        prev = Some(v);
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
}

impl Verdict {
    fn at_most(worst: f64, tolerance: f64) -> Self {
        Verdict {
            pass: worst <= tolerance,
            worst,
            tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub p: f64,
    pub samples: usize,
    pub initial: Option<DiagnosticSample>,
    pub last: Option<DiagnosticSample>,
    pub osc_monotone: Verdict,
    pub lp_monotone: Verdict,
    pub max_principle: Verdict,
    pub monotone_preserved: Option<bool>,
}

impl DiagnosticsSeries {
    pub fn new(p: f64) -> Self {
        DiagnosticsSeries {
            p,
            samples: Vec::new(),
        }
    }

    pub fn push(&mut self, s: DiagnosticSample) -> Result<(), DiagnosticsError> {
        if let Some(last) = self.samples.last() {
            if !(s.t > last.t) {
                return Err(DiagnosticsError::Time {
                    prev: last.t,
                    next: s.t,
                });
            }
        }
        self.samples.push(s);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> Option<&DiagnosticSample> {
        self.samples.first()
    }

    pub fn last(&self) -> Option<&DiagnosticSample> {
        self.samples.last()
    }

    fn sup_scale(&self) -> f64 {
        self.samples
            .iter()
            .map(DiagnosticSample::sup_abs)
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE)
    }

    /// Largest increase of `osc` between consecutive samples divided by the
    /// largest `sup|b|` of the run.
    pub fn osc_increase(&self) -> f64 {
        worst_increase(self.samples.iter().map(|s| s.osc), self.sup_scale())
    }

    /// Largest `I_p(t_{k+1}) / I_p(t_k) - 1` over consecutive samples.
    pub fn lp_increase(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| {
                if w[0].lp > 0.0 {
                    w[1].lp / w[0].lp - 1.0
                } else if w[1].lp > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }

    /// Largest `sup_t |b(t)| / sup |b(0)| - 1`.
    pub fn sup_growth(&self) -> f64 {
        let Some(first) = self.first() else { return 0.0 };
        let s0 = first.sup_abs();
        self.samples
            .iter()
            .map(|s| {
                let v = s.sup_abs();
                if s0 > 0.0 {
                    v / s0 - 1.0
                } else if v > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn all_monotone(&self) -> bool {
        self.samples.iter().all(|s| s.monotone)
    }

    pub fn summary(&self, osc_tol: f64, lp_tol: f64, sup_tol: f64) -> DiagnosticsSummary {
        let initially_monotone = self.first().map(|s| s.monotone);
        DiagnosticsSummary {
            p: self.p,
            samples: self.len(),
            initial: self.first().copied(),
            last: self.last().copied(),
            osc_monotone: Verdict::at_most(self.osc_increase(), osc_tol),
            lp_monotone: Verdict::at_most(self.lp_increase(), lp_tol),
            max_principle: Verdict::at_most(self.sup_growth(), sup_tol),
            monotone_preserved: initially_monotone.filter(|&m| m).map(|_| self.all_monotone()),
        }
    }
}
