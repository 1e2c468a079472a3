//! Grid certification of the five barrier inequalities and the search for
//! an admissible cutoff radius `R`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{build_barrier, BarrierError, BarrierProfile, BarrierSpec, Side};
use crate::soliton::{build_profile, PhiValues, SolitonProfile};

pub const INEQUALITY_NAMES: [&str; 5] = [
    "phib",
    "dphib",
    "phib_minus_dphib",
    "dphib_sq_minus_phib_d2phib",
    "d2phib_sq_minus_dphib_d3phib",
];

/// Barrier data fed to the flow must keep `phi_b >= FLOW_GUARD_FRACTION * phi`
/// and `phi_b' >= FLOW_GUARD_FRACTION * phi'`.
pub const FLOW_GUARD_FRACTION: f64 = 1e-6;

/// Left end of certification grids.
pub const DEFAULT_CERT_S_MIN: f64 = 0.1;

/// The five quantities that must stay positive.
pub fn margins_at(v: PhiValues) -> [f64; 5] {
    [
        v.phi,
        v.dphi,
        v.phi - v.dphi,
        v.dphi * v.dphi - v.phi * v.d2phi,
        v.d2phi * v.d2phi - v.dphi * v.d3phi,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginRecord {
    pub name: String,
    pub min: f64,
    pub s_at_min: f64,
}

/// Ranges of `phi_b / phi` and `phi_b' / phi'` over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceBand {
    pub phi_ratio_min: f64,
    pub phi_ratio_max: f64,
    pub dphi_ratio_min: f64,
    pub dphi_ratio_max: f64,
    /// Smallest `delta` with all ratios in `[1 - delta, 1 + delta]`.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub certified: bool,
    pub margins: Vec<MarginRecord>,
    pub spec: BarrierSpec,
    pub equivalence: EquivalenceBand,
    /// Positivity guard required before the barrier is used as flow data.
    pub flow_guard: bool,
    pub s_min: f64,
    pub s_max: f64,
    pub points: usize,
}

impl CertificationReport {
    pub fn failure_summary(&self) -> String {
        let failed: Vec<String> = self
            .margins
            .iter()
            .filter(|m| !(m.min > 0.0))
            .map(|m| format!("{} = {:e} at s = {}", m.name, m.min, m.s_at_min))
            .collect();
        if failed.is_empty() {
            "all margins positive".to_string()
        } else {
            failed.join("; ")
        }
    }

    pub fn min_margin(&self) -> f64 {
        self.margins.iter().map(|m| m.min).fold(f64::INFINITY, f64::min)
    }
}

pub fn certify_barrier(bp: &BarrierProfile) -> CertificationReport {
    let base = &bp.base;
    let mut margins: Vec<MarginRecord> = INEQUALITY_NAMES
        .iter()
        .map(|name| MarginRecord {
            name: name.to_string(),
            min: f64::INFINITY,
            s_at_min: f64::NAN,
        })
        .collect();
    let mut band = EquivalenceBand {
        phi_ratio_min: f64::INFINITY,
        phi_ratio_max: f64::NEG_INFINITY,
        dphi_ratio_min: f64::INFINITY,
        dphi_ratio_max: f64::NEG_INFINITY,
        delta: 0.0,
    };
    let mut flow_guard = true;
    for (i, &s) in base.grid.iter().enumerate() {
        let v = PhiValues {
            phi: bp.phib[i],
            dphi: bp.dphib[i],
            d2phi: bp.d2phib[i],
            d3phi: bp.d3phib[i],
        };
        for (record, value) in margins.iter_mut().zip(margins_at(v)) {
            // NaN counts as a failure
            if !(value >= record.min) {
                record.min = value;
                record.s_at_min = s;
            }
        }
        let pr = v.phi / base.phi[i];
        let dr = v.dphi / base.dphi[i];
        band.phi_ratio_min = band.phi_ratio_min.min(pr);
        band.phi_ratio_max = band.phi_ratio_max.max(pr);
        band.dphi_ratio_min = band.dphi_ratio_min.min(dr);
        band.dphi_ratio_max = band.dphi_ratio_max.max(dr);
        if !(v.phi >= FLOW_GUARD_FRACTION * base.phi[i] && v.dphi >= FLOW_GUARD_FRACTION * base.dphi[i]) {
            flow_guard = false;
        }
    }
    band.delta = [
        1.0 - band.phi_ratio_min,
        band.phi_ratio_max - 1.0,
        1.0 - band.dphi_ratio_min,
        band.dphi_ratio_max - 1.0,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let certified = margins.iter().all(|m| m.min > 0.0);
    CertificationReport {
        certified,
        margins,
        spec: bp.spec,
        equivalence: band,
        flow_guard,
        s_min: base.s_min(),
        s_max: base.s_max(),
        points: base.len(),
    }
}

/// Grid spacing used to certify a barrier with cutoff radius `r`: resolves
/// the band `[R, 2R]` with at least 100 intervals and never exceeds 0.05.
fn certification_spacing(r: f64) -> f64 {
    (0.01 * r).min(0.05)
}

/// Soliton profile on `[s_lo, 8R]` with the certification spacing for `r`.
pub fn certification_profile(n: u32, r: f64, s_lo: f64, tol: f64) -> Result<SolitonProfile, BarrierError> {
    if !(s_lo > 0.0) {
        return Err(BarrierError::Grid(s_lo));
    }
    let s_hi = (8.0 * r).max(s_lo + 1.0);
    let points = ((s_hi - s_lo) / certification_spacing(r)).ceil() as usize + 1;
    Ok(build_profile(n, s_lo, s_hi, points, tol)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleR {
    pub r: f64,
    pub report: CertificationReport,
    /// Every candidate tried, with its outcome.
    pub trials: Vec<(f64, bool)>,
}

/// Smallest cutoff radius on the ladder `1/2, 1, 2, 4, ...` (refined by
/// bisection to 1% on the last bracket) whose barrier certifies.
///
/// Each candidate `R` is certified on a grid that starts at the left end of
/// `base`, reaches at least `max(8R, base.s_max())`, and is no coarser than
/// `base`. `base` is reused when it already satisfies both requirements.
pub fn find_admissible_r(
    base: &SolitonProfile,
    k: f64,
    alpha: f64,
    side: Side,
    r_max: f64,
) -> Result<AdmissibleR, BarrierError> {
    if !(r_max >= 0.5) {
        return Err(BarrierError::Spec(format!("R_max must be >= 1/2, got {r_max}")));
    }
    let s_lo = base.s_min();
    if !(s_lo > 0.0) {
        return Err(BarrierError::Grid(s_lo));
    }
    BarrierSpec::new(base.n, k, alpha, 0.5, side)?;

    let base_spacing = if base.len() > 1 { base.spacing() } else { f64::INFINITY };
    let mut trials = Vec::new();
    let attempt = |r: f64, trials: &mut Vec<(f64, bool)>| -> Result<CertificationReport, BarrierError> {
        let spec = BarrierSpec::new(base.n, k, alpha, r, side)?;
        let spacing = certification_spacing(r).min(base_spacing);
        let s_hi = (8.0 * r).max(base.s_max());
        let profile = if base.s_max() >= s_hi && base_spacing <= certification_spacing(r) {
            Arc::new(base.clone())
        } else {
            let points = ((s_hi - s_lo) / spacing).ceil() as usize + 1;
            Arc::new(build_profile(base.n, s_lo, s_hi, points, base.tol)?)
        };
        let report = certify_barrier(&build_barrier(profile, spec)?);
        trials.push((r, report.certified));
        Ok(report)
    };

    let mut r = 0.5;
    let mut last_fail: Option<f64> = None;
    let mut last_report;
    loop {
        last_report = attempt(r, &mut trials)?;
        if last_report.certified {
            break;
        }
        last_fail = Some(r);
        r *= 2.0;
        if r > r_max {
            return Err(BarrierError::NoAdmissibleR {
                r_max,
                last: Box::new(last_report),
            });
        }
    }
    let (mut lo, mut hi, mut hi_report) = match last_fail {
        None => {
            return Ok(AdmissibleR {
                r,
                report: last_report,
                trials,
            })
        }
        Some(lo) => (lo, r, last_report),
    };
    while hi - lo > 0.01 * hi {
        let mid = 0.5 * (lo + hi);
        let report = attempt(mid, &mut trials)?;
        if report.certified {
            hi = mid;
            hi_report = report;
        } else {
            lo = mid;
        }
    }
    Ok(AdmissibleR {
        r: hi,
        report: hi_report,
        trials,
    })
}
