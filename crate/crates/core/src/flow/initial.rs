//! Initial perturbations: barriers, compactly supported bumps, files.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{FlowError, RadialState};
use crate::barrier::{
    build_barrier, certification_profile, certify_barrier, find_admissible_r, BarrierSpec,
    CertificationReport, Side, DEFAULT_CERT_S_MIN,
};
use crate::io;
use crate::soliton::SolitonProfile;

fn default_r_max() -> f64 {
    1024.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierParams {
    #[serde(rename = "K")]
    pub k: f64,
    pub alpha: f64,
    /// Cutoff radius; searched for when absent.
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
}

/// `height * q(1 - |s - center| / width)` with the C^2 smoothstep
/// `q(x) = 6x^5 - 15x^4 + 10x^3` on `[0, 1]`, zero outside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpParams {
    pub center: f64,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileParams {
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum InitialSpec {
    BarrierUpper(BarrierParams),
    BarrierLower(BarrierParams),
    CompactBump(BumpParams),
    FromFile(FileParams),
}

impl InitialSpec {
    pub fn barrier_alpha(&self) -> Option<f64> {
        match self {
            InitialSpec::BarrierUpper(p) | InitialSpec::BarrierLower(p) => Some(p.alpha),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierInfo {
    pub spec: BarrierSpec,
    /// Certification on `[0.1, 8R]`.
    pub report: CertificationReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialPerturbation {
    pub state: RadialState,
    pub barrier: Option<BarrierInfo>,
}

impl BumpParams {
    pub fn sample(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter()
            .map(|&s| {
                let x = 1.0 - (s - self.center).abs() / self.width;
                if x <= 0.0 {
                    0.0
                } else {
                    self.height * x * x * x * (x * (6.0 * x - 15.0) + 10.0)
                }
            })
            .collect()
    }
}

fn barrier_state(
    params: &BarrierParams,
    side: Side,
    base: Arc<SolitonProfile>,
) -> Result<InitialPerturbation, FlowError> {
    let n = base.n;
    let tol = base.tol;
    let (r, report) = match params.r {
        Some(r) => {
            let spec = BarrierSpec::new(n, params.k, params.alpha, r, side)?;
            let cert_base = Arc::new(certification_profile(n, r, DEFAULT_CERT_S_MIN, tol)?);
            (r, certify_barrier(&build_barrier(cert_base, spec)?))
        }
        None => {
            let ladder_base = certification_profile(n, 0.5, DEFAULT_CERT_S_MIN, tol)?;
            let found = find_admissible_r(&ladder_base, params.k, params.alpha, side, params.r_max)?;
            (found.r, found.report)
        }
    };
    if !report.certified {
        return Err(FlowError::NotCertified(report.failure_summary()));
    }
    let spec = BarrierSpec::new(n, params.k, params.alpha, r, side)?;
    let on_grid = build_barrier(base.clone(), spec)?;
    let guard = certify_barrier(&on_grid);
    if !guard.flow_guard {
        return Err(FlowError::NotCertified(format!(
            "barrier leaves less than the positivity guard on the flow grid (phi_b/phi >= {}, phi_b'/phi' >= {})",
            guard.equivalence.phi_ratio_min, guard.equivalence.dphi_ratio_min
        )));
    }
    let state = RadialState::new(base, 0.0, on_grid.bhat)?;
    Ok(InitialPerturbation {
        state,
        barrier: Some(BarrierInfo { spec, report }),
    })
}

fn matches_grid(expected: &[f64], found: &[f64]) -> Result<(), FlowError> {
    if expected.len() != found.len() {
        return Err(FlowError::GridMismatch(format!(
            "file has {} rows, grid has {} points",
            found.len(),
            expected.len()
        )));
    }
    for (i, (a, b)) in expected.iter().zip(found).enumerate() {
        if (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
            return Err(FlowError::GridMismatch(format!("row {i}: s = {b}, expected {a}")));
        }
    }
    Ok(())
}

pub fn make_initial_perturbation(
    spec: &InitialSpec,
    base: Arc<SolitonProfile>,
) -> Result<InitialPerturbation, FlowError> {
    match spec {
        InitialSpec::BarrierUpper(p) => barrier_state(p, Side::Upper, base),
        InitialSpec::BarrierLower(p) => barrier_state(p, Side::Lower, base),
        InitialSpec::CompactBump(p) => {
            if !(p.width > 0.0) || !p.height.is_finite() || !p.center.is_finite() {
                return Err(FlowError::Config(format!("invalid bump parameters {p:?}")));
            }
            let b = p.sample(&base.grid);
            Ok(InitialPerturbation {
                state: RadialState::new(base, 0.0, b)?,
                barrier: None,
            })
        }
        InitialSpec::FromFile(p) => {
            let snapshot = io::read_state_csv(&p.path).map_err(|e| FlowError::Io(e.to_string()))?;
            matches_grid(&base.grid, &snapshot.s)?;
            Ok(InitialPerturbation {
                state: RadialState::new(base, 0.0, snapshot.b)?,
                barrier: None,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::build_profile;

    fn base() -> Arc<SolitonProfile> {
        Arc::new(build_profile(2, -10.0, 60.0, 1401, 1e-12).unwrap())
    }

    #[test]
    fn zero_height_bump_is_zero_state() {
        let spec = InitialSpec::CompactBump(BumpParams {
            center: 2.0,
            width: 2.0,
            height: 0.0,
        });
        let init = make_initial_perturbation(&spec, base()).unwrap();
        assert!(init.state.b.iter().all(|&v| v == 0.0));
        assert!(init.barrier.is_none());
    }

    #[test]
    fn bump_is_c2_and_compact() {
        let p = BumpParams {
            center: 0.0,
            width: 1.0,
            height: 1.0,
        };
        let h = 1e-4;
        let f = |s: f64| p.sample(&[s])[0];
        for &s in &[-1.0, 0.0, 1.0] {
            let d2_left = (f(s) - 2.0 * f(s - h) + f(s - 2.0 * h)) / (h * h);
            let d2_right = (f(s + 2.0 * h) - 2.0 * f(s + h) + f(s)) / (h * h);
            assert!((d2_left - d2_right).abs() < 1e-2, "s={s}");
        }
        assert_eq!(f(1.5), 0.0);
        assert_eq!(f(0.0), 1.0);
    }

    #[test]
    fn barrier_state_is_monotone_and_flat_on_the_left() {
        let spec = InitialSpec::BarrierUpper(BarrierParams {
            k: 0.1,
            alpha: 0.5,
            r: None,
            r_max: 1024.0,
        });
        let init = make_initial_perturbation(&spec, base()).unwrap();
        let info = init.barrier.unwrap();
        assert!(info.report.certified);
        let b = &init.state.b;
        for i in 1..b.len() {
            assert!(b[i] <= b[i - 1]);
            if init.state.grid()[i] <= info.spec.r {
                assert_eq!(b[i], b[0]);
            }
        }
    }

    #[test]
    fn uncertified_radius_is_rejected() {
        let spec = InitialSpec::BarrierUpper(BarrierParams {
            k: 1.0,
            alpha: 0.5,
            r: Some(1.0),
            r_max: 1024.0,
        });
        assert!(matches!(
            make_initial_perturbation(&spec, base()),
            Err(FlowError::NotCertified(_))
        ));
    }

    #[test]
    fn oversized_bump_rejected_at_worst_point() {
        let spec = InitialSpec::CompactBump(BumpParams {
            center: -2.0,
            width: 1.0,
            height: 1.0,
        });
        match make_initial_perturbation(&spec, base()) {
            Err(FlowError::Parabolicity { s, .. }) => assert!((s + 2.0).abs() <= 1.0),
            other => panic!("expected parabolicity error, got {other:?}"),
        }
    }
}
