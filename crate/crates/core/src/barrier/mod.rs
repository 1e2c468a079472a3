//! Decaying barriers around the soliton.
//!
//! A barrier replaces `phi` by
//!
//! ```text
//! phi_b(s) = phi(s) -/+ K s^(-1-alpha) alpha (2R)^alpha psi(s/R)
//! ```
//!
//! (upper barrier subtracts), which on the potential level is the
//! perturbation `+/- int_s^inf K t^(-1-alpha) alpha (2R)^alpha psi(t/R) dt`.

mod certify;
mod cutoff;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{adaptive_simpson, QuadratureError};
use crate::soliton::{SolitonError, SolitonProfile};

pub use certify::{
    certification_profile, certify_barrier, find_admissible_r, margins_at, AdmissibleR,
    CertificationReport, EquivalenceBand, MarginRecord, DEFAULT_CERT_S_MIN, FLOW_GUARD_FRACTION,
    INEQUALITY_NAMES,
};
pub use cutoff::cutoff_psi;

/// Absolute tolerance used for the potential-level perturbation integral.
pub const DEFAULT_QUAD_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Upper,
    Lower,
}

impl Side {
    /// Sign of the potential-level perturbation.
    pub fn sign(self) -> f64 {
        match self {
            Side::Upper => 1.0,
            Side::Lower => -1.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BarrierError {
    #[error("invalid barrier parameters: {0}")]
    Spec(String),
    #[error("barrier construction requires n >= 2 (the method does not apply for n = 1), got n = {0}")]
    DimensionOne(u32),
    #[error("barrier dimension n = {spec} does not match soliton dimension n = {base}")]
    DimensionMismatch { spec: u32, base: u32 },
    #[error("certification grid must start at s > 0, got {0}")]
    Grid(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Soliton(#[from] SolitonError),
    #[error("no admissible R <= {r_max}; last candidate R = {}: {}", last.spec.r, last.failure_summary())]
    NoAdmissibleR {
        r_max: f64,
        last: Box<CertificationReport>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub n: u32,
    #[serde(rename = "K")]
    pub k: f64,
    pub alpha: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub side: Side,
}

impl BarrierSpec {
    pub fn new(n: u32, k: f64, alpha: f64, r: f64, side: Side) -> Result<Self, BarrierError> {
        let spec = BarrierSpec {
            n,
            k,
            alpha,
            r,
            side,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), BarrierError> {
        if self.n < 2 {
            return Err(BarrierError::DimensionOne(self.n));
        }
        if !(self.k >= 0.0) || !self.k.is_finite() {
            return Err(BarrierError::Spec(format!("K must be >= 0, got {}", self.k)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(BarrierError::Spec(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.r >= 0.5) || !self.r.is_finite() {
            return Err(BarrierError::Spec(format!("R must be >= 1/2, got {}", self.r)));
        }
        Ok(())
    }

    /// `K alpha (2R)^alpha`.
    pub fn coefficient(&self) -> f64 {
        self.k * self.alpha * (2.0 * self.r).powf(self.alpha)
    }

    /// `q(s) = K s^(-1-alpha) alpha (2R)^alpha psi(s/R)` and its first three
    /// derivatives, so that `phi_b^(k) = phi^(k) - sign * q^(k)`.
    pub fn profile_shift(&self, s: f64) -> [f64; 4] {
        if s <= self.r {
            return [0.0; 4];
        }
        let c = self.coefficient();
        let a = self.alpha;
        let r = self.r;
        let (p0, p1, p2, p3) = cutoff_psi(s / r);
        let s1 = s.powf(-1.0 - a);
        let s2 = s1 / s;
        let s3 = s2 / s;
        let s4 = s3 / s;
        let (a1, a2, a3) = (1.0 + a, 2.0 + a, 3.0 + a);
        [
            c * s1 * p0,
            -c * a1 * s2 * p0 + c * s1 * p1 / r,
            c * a1 * a2 * s3 * p0 - 2.0 * c * a1 * s2 * p1 / r + c * s1 * p2 / (r * r),
            -c * a1 * a2 * a3 * s4 * p0 + 3.0 * c * a1 * a2 * s3 * p1 / r
                - 3.0 * c * a1 * s2 * p2 / (r * r)
                + c * s1 * p3 / (r * r * r),
        ]
    }

    /// `int_R^(2R) q`, the part of the perturbation integral inside the
    /// cutoff band.
    fn band_integral(&self, quad_tol: f64) -> Result<f64, BarrierError> {
        self.partial_band_integral(self.r, quad_tol)
    }

    fn partial_band_integral(&self, from: f64, quad_tol: f64) -> Result<f64, BarrierError> {
        let to = 2.0 * self.r;
        if from >= to || self.k == 0.0 {
            return Ok(0.0);
        }
        Ok(adaptive_simpson(|t| self.profile_shift(t)[0], from, to, quad_tol)?)
    }

    fn perturbation_with_band(&self, s: f64, band: f64, quad_tol: f64) -> Result<f64, BarrierError> {
        let two_r = 2.0 * self.r;
        let magnitude = if s <= self.r {
            self.k + band
        } else if s < two_r {
            self.k + self.partial_band_integral(s, quad_tol)?
        } else {
            self.k * (two_r / s).powf(self.alpha)
        };
        Ok(self.side.sign() * magnitude)
    }
}

/// Potential-level perturbation `b_hat(s) - u_0(s)` of the barrier.
///
/// Exact tail `K (2R)^alpha s_*^(-alpha)` from `s_* = max(s, 2R)` plus
/// adaptive quadrature across the cutoff band. Constant for `s <= R`.
pub fn barrier_perturbation(spec: &BarrierSpec, s: f64, quad_tol: f64) -> Result<f64, BarrierError> {
    spec.validate()?;
    if !s.is_finite() {
        return Err(BarrierError::Spec(format!("s must be finite, got {s}")));
    }
    let band = if s <= spec.r {
        spec.band_integral(quad_tol)?
    } else {
        0.0
    };
    spec.perturbation_with_band(s, band, quad_tol)
}

/// Barrier data sampled on the grid of a soliton profile.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierProfile {
    pub spec: BarrierSpec,
    pub base: Arc<SolitonProfile>,
    pub phib: Vec<f64>,
    pub dphib: Vec<f64>,
    pub d2phib: Vec<f64>,
    pub d3phib: Vec<f64>,
    /// `b_hat - u_0` on the grid.
    pub bhat: Vec<f64>,
}

pub fn build_barrier(
    base: Arc<SolitonProfile>,
    spec: BarrierSpec,
) -> Result<BarrierProfile, BarrierError> {
    spec.validate()?;
    if spec.n != base.n {
        return Err(BarrierError::DimensionMismatch {
            spec: spec.n,
            base: base.n,
        });
    }
    let sign = spec.side.sign();
    let len = base.len();
    let mut phib = Vec::with_capacity(len);
    let mut dphib = Vec::with_capacity(len);
    let mut d2phib = Vec::with_capacity(len);
    let mut d3phib = Vec::with_capacity(len);
    let mut bhat = Vec::with_capacity(len);
    for (i, &s) in base.grid.iter().enumerate() {
        let q = spec.profile_shift(s);
        phib.push(base.phi[i] - sign * q[0]);
        dphib.push(base.dphi[i] - sign * q[1]);
        d2phib.push(base.d2phi[i] - sign * q[2]);
        d3phib.push(base.d3phi[i] - sign * q[3]);
    }
    // Accumulate the band integral right to left over grid intervals so the
    // sampled perturbation is monotone regardless of quadrature error.
    let two_r = 2.0 * spec.r;
    let mut magnitude = vec![0.0; len];
    for i in (0..len).rev() {
        let s = base.grid[i];
        magnitude[i] = if s >= two_r {
            spec.k * (two_r / s).powf(spec.alpha)
        } else {
            let (upper, start) = if i + 1 < len && base.grid[i + 1] < two_r {
                (base.grid[i + 1], magnitude[i + 1])
            } else {
                (two_r, spec.k)
            };
            let lower = s.max(spec.r);
            let piece = if lower < upper && spec.k > 0.0 {
                adaptive_simpson(|t| spec.profile_shift(t)[0], lower, upper, DEFAULT_QUAD_TOL)?
            } else {
                0.0
            };
            start + piece
        };
        bhat.push(0.0);
    }
    for (b, m) in bhat.iter_mut().zip(&magnitude) {
        *b = sign * m;
    }
    Ok(BarrierProfile {
        spec,
        base,
        phib,
        dphib,
        d2phib,
        d3phib,
        bhat,
    })
}

impl BarrierProfile {
    pub fn grid(&self) -> &[f64] {
        &self.base.grid
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }
}

/// Whether `|u(s)| <= K min(1, s^-alpha)` at every grid point with `s > 0`
/// and `|u| <= K` elsewhere.
pub fn check_initial_decay(grid: &[f64], u: &[f64], k: f64, alpha: f64) -> bool {
    assert_eq!(grid.len(), u.len(), "perturbation must be sampled on the grid");
    grid.iter().zip(u).all(|(&s, &v)| {
        let bound = if s > 0.0 { k * s.powf(-alpha).min(1.0) } else { k };
        v.abs() <= bound
    })
}
