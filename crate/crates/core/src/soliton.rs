//! Rotationally symmetric gradient soliton profile.
//!
//! The soliton potential is described through `phi(s) = d/ds u(s)` with
//! `s = log|z|^2`. It solves
//!
//! ```text
//! phi^(n-1) * phi' * exp(phi) = exp(n s),    phi -> 0 as s -> -inf
//! ```
//!
//! which integrates to `G(phi) = exp(n s)` with
//! `G(phi) = n * int_0^phi x^(n-1) e^x dx`. Everything here works with
//! `log G` so that profiles reach far into the asymptotic regime without
//! overflowing `exp(n s)`.

use serde::Serialize;
use thiserror::Error;

/// `phi` values below this are replaced by the small-`s` limit `phi = e^s`.
pub const SMALL_PHI_FLOOR: f64 = 1e-12;

/// Points at which the alternating closed form replaces the power series of
/// `G`; below it the series avoids the cancellation of the closed form.
fn series_cutoff(n: u32) -> f64 {
    4.0 * n as f64 + 10.0
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolitonError {
    #[error("complex dimension must be at least 1, got {0}")]
    Dimension(u32),
    #[error("phi = {0} is outside the domain (phi must be positive and finite)")]
    Domain(f64),
    #[error("exp(phi) overflows for phi = {0}")]
    Range(f64),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(
        "root finder failed at n = {n}, s = {s}: bracket [{lo}, {hi}] with residuals [{f_lo}, {f_hi}]"
    )]
    Bracket {
        n: u32,
        s: f64,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("root finder stalled at n = {n}, s = {s}: phi = {phi}, relative residual {residual:e} > tol {tol:e}")]
    NoConvergence {
        n: u32,
        s: f64,
        phi: f64,
        residual: f64,
        tol: f64,
    },
    #[error("asymptotic expansion requested at s = {0}, needs s > e")]
    AsymptoticDomain(f64),
}

fn check_dim(n: u32) -> Result<(), SolitonError> {
    if n == 0 {
        Err(SolitonError::Dimension(n))
    } else {
        Ok(())
    }
}

/// Coefficients `(-1)^(n-k-1) n!/k!` for `k = 0..n`, lowest degree first.
fn alternating_coefficients(n: u32) -> Vec<f64> {
    let n = n as usize;
    let mut out = vec![0.0; n];
    // n!/k! = (k+1)(k+2)...n
    let mut falling = 1.0;
    for k in (0..n).rev() {
        falling *= (k + 1) as f64;
        let sign = if (n - k - 1).is_multiple_of(2) { 1.0 } else { -1.0 };
        out[k] = sign * falling;
    }
    out
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Left-hand side of the integrated soliton equation,
/// `sum_{k<n} (-1)^(n-k-1) n!/k! phi^k e^phi`.
///
/// The polynomial part is evaluated by Horner's rule and `e^phi` is
/// multiplied in at the end.
pub fn implicit_lhs(n: u32, phi: f64) -> Result<f64, SolitonError> {
    check_dim(n)?;
    if !(phi >= 0.0) || !phi.is_finite() {
        return Err(SolitonError::Domain(phi));
    }
    let poly = horner(&alternating_coefficients(n), phi);
    let e = phi.exp();
    let value = poly * e;
    if !e.is_finite() || !value.is_finite() {
        return Err(SolitonError::Range(phi));
    }
    Ok(value)
}

/// `log G(phi)` where `G(phi) = n int_0^phi x^(n-1) e^x dx`.
///
/// Small arguments use `G = n phi^n sum_j phi^j / (j! (n+j))`, large ones the
/// closed form `e^phi P(phi) - (-1)^(n-1) n!` whose polynomial has no
/// significant cancellation once `phi > 2n`.
pub(crate) fn log_g(n: u32, phi: f64) -> f64 {
    debug_assert!(phi > 0.0);
    let nf = n as f64;
    if phi <= series_cutoff(n) {
        let mut term = 1.0; // phi^j / j!
        let mut sum = 1.0 / nf;
        let mut j = 0u32;
        loop {
            j += 1;
            term *= phi / j as f64;
            let contrib = term / (nf + j as f64);
            sum += contrib;
            if (j as f64 > phi && contrib <= 1e-18 * sum) || j > 2000 {
                break;
            }
        }
        nf.ln() + nf * phi.ln() + sum.ln()
    } else {
        let poly = horner(&alternating_coefficients(n), phi);
        let sign = if (n - 1).is_multiple_of(2) { 1.0 } else { -1.0 };
        let correction = -sign * factorial(n) * (-phi).exp() / poly;
        phi + poly.ln() + correction.ln_1p()
    }
}

/// `d/dphi log G(phi) = n phi^(n-1) e^phi / G(phi)`.
fn dlog_g(n: u32, phi: f64, log_g_value: f64) -> f64 {
    let nf = n as f64;
    (nf.ln() + (nf - 1.0) * phi.ln() + phi - log_g_value).exp()
}

/// Relative residual `|G(phi) / e^(n s) - 1|` of the integrated equation.
pub fn implicit_residual(n: u32, s: f64, phi: f64) -> f64 {
    (log_g(n, phi) - n as f64 * s).exp_m1().abs()
}

/// Solves the integrated soliton equation for `phi(s)`.
///
/// Safeguarded Newton iteration on `log G(phi) - n s` inside a bracket that
/// is widened until it contains the root. Returns `phi > 0` whose relative
/// residual does not exceed `tol`.
pub fn solve_phi(n: u32, s: f64, tol: f64) -> Result<f64, SolitonError> {
    check_dim(n)?;
    if !s.is_finite() {
        return Err(SolitonError::Argument(format!("s must be finite, got {s}")));
    }
    if !(tol > 0.0) {
        return Err(SolitonError::Argument(format!("tol must be positive, got {tol}")));
    }
    if s < SMALL_PHI_FLOOR.ln() {
        return Ok(s.exp());
    }
    let nf = n as f64;
    let target = nf * s;
    let f = |phi: f64| log_g(n, phi) - target;

    let eps = 1e-300;
    let width = 10.0 * (1.0 + s.abs());
    let mut lo = (nf * s - width).max(eps);
    let mut hi = nf * s + width;
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    let mut widenings = 0;
    while !(f_lo <= 0.0 && f_hi >= 0.0) {
        widenings += 1;
        if widenings > 60 {
            return Err(SolitonError::Bracket {
                n,
                s,
                lo,
                hi,
                f_lo,
                f_hi,
            });
        }
        if f_lo > 0.0 {
            lo = (lo - width).max(eps);
            f_lo = f(lo);
        }
        if f_hi < 0.0 {
            hi += width;
            f_hi = f(hi);
        }
    }

    // log-residual target; relative residual is |expm1(f)| ~ |f|
    let f_tol = 0.5 * tol;
    let mut x = if s > 2.0 {
        nf * s - (nf.powi(n as i32) * s.powi(n as i32 - 1)).ln()
    } else {
        s.exp()
    };
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }
    let mut best = (f64::INFINITY, x);
    for _ in 0..500 {
        let lg = log_g(n, x);
        let fx = lg - target;
        if fx.abs() < best.0 {
            best = (fx.abs(), x);
        }
        if fx.abs() <= f_tol {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let newton = x - fx / dlog_g(n, x, lg);
        x = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else if hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
    }
    let phi = best.1;
    let residual = implicit_residual(n, s, phi);
    if residual <= tol {
        Ok(phi)
    } else {
        Err(SolitonError::NoConvergence {
            n,
            s,
            phi,
            residual,
            tol,
        })
    }
}

/// First three derivatives of `phi` from the ODE and its differentiated
/// recursions.
pub fn phi_derivs(n: u32, s: f64, phi: f64) -> Result<(f64, f64, f64), SolitonError> {
    check_dim(n)?;
    if !(phi > 0.0) || !phi.is_finite() {
        return Err(SolitonError::Domain(phi));
    }
    let nf = n as f64;
    let d1 = (nf * s - phi - (nf - 1.0) * phi.ln()).exp();
    let ratio = d1 / phi;
    let d2 = d1 * (nf - d1 - (nf - 1.0) * ratio);
    let d3 = d2 * (nf - 2.0 * d1 - 2.0 * (nf - 1.0) * ratio) + (nf - 1.0) * ratio * ratio * d1;
    Ok((d1, d2, d3))
}

/// `phi` together with its first three `s`-derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiValues {
    pub phi: f64,
    pub dphi: f64,
    pub d2phi: f64,
    pub d3phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpansionOrder {
    /// `phi ~ ns - L`, `phi' ~ n - (n-1)/s`, `phi'' ~ (n-1)/s^2`,
    /// `phi''' ~ -2(n-1)/s^3`.
    Leading,
    /// All terms through `o(s^-3)`.
    Full,
}

/// The logarithmic scale `L(s) = log(n^n s^(n-1))` of the large-`s` expansion.
pub fn log_scale(n: u32, s: f64) -> f64 {
    let nf = n as f64;
    nf * nf.ln() + (nf - 1.0) * s.ln()
}

/// Large-`s` expansion of `phi` and its derivatives.
pub fn asymptotic_phi(n: u32, s: f64, order: ExpansionOrder) -> Result<PhiValues, SolitonError> {
    check_dim(n)?;
    if !(s > std::f64::consts::E) {
        return Err(SolitonError::AsymptoticDomain(s));
    }
    let nf = n as f64;
    let m = nf - 1.0;
    let l1 = log_scale(n, s);
    let ns = nf * s;
    Ok(match order {
        ExpansionOrder::Leading => PhiValues {
            phi: ns - l1,
            dphi: nf - m / s,
            d2phi: m / (s * s),
            d3phi: -2.0 * m / (s * s * s),
        },
        ExpansionOrder::Full => {
            let l2 = l1 * l1;
            let l3 = l2 * l1;
            let s2 = s * s;
            let s3 = s2 * s;
            let n2s2 = nf * nf * s2;
            let ns3 = ns * ns * ns;
            let phi = ns - l1 + m * l1 / ns + m / ns + 0.5 * m * l2 / n2s2
                - m * (nf - 2.0) * l1 / n2s2
                - 0.5 * m * (3.0 * nf - 5.0) / n2s2
                + m * l3 / (3.0 * ns3)
                - 0.5 * m * (3.0 * nf - 5.0) * l2 / ns3
                + m * (nf * nf - 6.0 * nf + 7.0) * l1 / ns3
                + m * (11.0 * nf * nf - 46.0 * nf + 47.0) / (6.0 * ns3);
            let dphi = nf - m / s - m * l1 / (nf * s2) + m * (nf - 2.0) / (nf * s2)
                - m * l2 / (nf * nf * s3)
                + m * (3.0 * nf - 5.0) * l1 / (nf * nf * s3)
                - m * (nf * nf - 6.0 * nf + 7.0) / (nf * nf * s3);
            let d2phi = m / s2 + 2.0 * m * l1 / (nf * s3) - m * (3.0 * nf - 5.0) / (nf * s3);
            let d3phi = -2.0 * m / s3;
            PhiValues {
                phi,
                dphi,
                d2phi,
                d3phi,
            }
        }
    })
}

/// Soliton data sampled on a uniform `s`-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SolitonProfile {
    pub n: u32,
    pub grid: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub d2phi: Vec<f64>,
    pub d3phi: Vec<f64>,
    pub tol: f64,
}

/// Fewest grid points accepted by the flow solver (the right boundary
/// stencil reaches four points in).
pub const MIN_FLOW_POINTS: usize = 5;

/// Uniform grid from `s_min` to `s_max` inclusive.
pub fn uniform_grid(s_min: f64, s_max: f64, points: usize) -> Vec<f64> {
    let h = (s_max - s_min) / (points - 1) as f64;
    (0..points)
        .map(|i| {
            if i + 1 == points {
                s_max
            } else {
                s_min + i as f64 * h
            }
        })
        .collect()
}

pub fn build_profile(
    n: u32,
    s_min: f64,
    s_max: f64,
    points: usize,
    tol: f64,
) -> Result<SolitonProfile, SolitonError> {
    check_dim(n)?;
    if !(s_min < s_max) || !s_min.is_finite() || !s_max.is_finite() {
        return Err(SolitonError::Argument(format!(
            "need finite s_min < s_max, got [{s_min}, {s_max}]"
        )));
    }
    if points < 2 {
        return Err(SolitonError::Argument(format!(
            "need at least 2 grid points, got {points}"
        )));
    }
    let grid = uniform_grid(s_min, s_max, points);
    let mut phi = Vec::with_capacity(points);
    let mut dphi = Vec::with_capacity(points);
    let mut d2phi = Vec::with_capacity(points);
    let mut d3phi = Vec::with_capacity(points);
    for &s in &grid {
        let p = solve_phi(n, s, tol)?;
        let (d1, d2, d3) = phi_derivs(n, s, p)?;
        phi.push(p);
        dphi.push(d1);
        d2phi.push(d2);
        d3phi.push(d3);
    }
    Ok(SolitonProfile {
        n,
        grid,
        phi,
        dphi,
        d2phi,
        d3phi,
        tol,
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileViolation {
    #[error("grid is not strictly increasing at index {0}")]
    Grid(usize),
    #[error("phi is not positive at index {0}")]
    Phi(usize),
    #[error("phi' is not positive at index {0}")]
    Dphi(usize),
    #[error("phi decreases at index {0}")]
    Monotone(usize),
    #[error("ODE residual {residual:e} exceeds tol at index {index}")]
    Residual { index: usize, residual: f64 },
}

impl SolitonProfile {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        (self.grid[self.len() - 1] - self.grid[0]) / (self.len() - 1) as f64
    }

    pub fn s_min(&self) -> f64 {
        self.grid[0]
    }

    pub fn s_max(&self) -> f64 {
        self.grid[self.len() - 1]
    }

    /// Too coarse for the flow solver (the CLI and the flow module refuse it).
    pub fn sufficient_for_flow(&self) -> bool {
        self.len() >= MIN_FLOW_POINTS
    }

    pub fn at(&self, i: usize) -> PhiValues {
        PhiValues {
            phi: self.phi[i],
            dphi: self.dphi[i],
            d2phi: self.d2phi[i],
            d3phi: self.d3phi[i],
        }
    }

    /// `|phi^(n-1) phi' e^phi - e^(ns)| / e^(ns)` at grid point `i`, in log form.
    pub fn ode_residual(&self, i: usize) -> f64 {
        let nf = self.n as f64;
        let lhs = (nf - 1.0) * self.phi[i].ln() + self.dphi[i].ln() + self.phi[i];
        (lhs - nf * self.grid[i]).exp_m1().abs()
    }

    pub fn max_ode_residual(&self) -> f64 {
        (0..self.len()).map(|i| self.ode_residual(i)).fold(0.0, f64::max)
    }

    pub fn check_invariants(&self) -> Result<(), ProfileViolation> {
        for i in 0..self.len() {
            if i > 0 && !(self.grid[i] > self.grid[i - 1]) {
                return Err(ProfileViolation::Grid(i));
            }
            if !(self.phi[i] > 0.0) {
                return Err(ProfileViolation::Phi(i));
            }
            if !(self.dphi[i] > 0.0) {
                return Err(ProfileViolation::Dphi(i));
            }
            if i > 0 && self.phi[i] < self.phi[i - 1] {
                return Err(ProfileViolation::Monotone(i));
            }
            let residual = self.ode_residual(i);
            if !(residual <= self.tol) {
                return Err(ProfileViolation::Residual { index: i, residual });
            }
        }
        Ok(())
    }
}
