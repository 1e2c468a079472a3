//! Time steppers.
//!
//! Crank-Nicolson freezes the linear-form coefficients `(A_r, beta)` at the
//! current state, solves the tridiagonal system, then repeats once with
//! coefficients taken at the midpoint of old and predicted states. The
//! explicit stepper is classical RK4 on the nonlinear right-hand side.

use super::{coefficients_from, find_violation, rhs_values, spatial_derivatives};
use super::{FlowConfig, FlowError, RadialState, Stepper};
use crate::soliton::SolitonProfile;
use crate::tridiag;

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: RadialState,
    /// Step actually taken (the requested one halved `halvings` times).
    pub dt: f64,
    pub halvings: u32,
}

/// Advances one step, halving `dt` on rejection (parabolicity loss or, for
/// the explicit stepper, the stability limit) up to
/// `cfg.tolerances.max_halvings` times.
pub fn step(state: &RadialState, dt: f64, cfg: &FlowConfig) -> Result<StepOutcome, FlowError> {
    if !(dt > 0.0) {
        return Err(FlowError::Config(format!("dt must be positive, got {dt}")));
    }
    let mut dt = dt;
    let mut halvings = 0;
    loop {
        match try_step(state, dt, cfg) {
            Ok(next) => {
                return Ok(StepOutcome {
                    state: next,
                    dt,
                    halvings,
                })
            }
            Err(reason) => {
                if halvings >= cfg.tolerances.max_halvings {
                    return Err(FlowError::StepAborted {
                        t: state.t,
                        dt,
                        halvings,
                        reason: reason.to_string(),
                    });
                }
                halvings += 1;
                dt *= 0.5;
            }
        }
    }
}

/// One attempt without retries.
pub(crate) fn try_step(state: &RadialState, dt: f64, cfg: &FlowConfig) -> Result<RadialState, FlowError> {
    let b = match cfg.stepper {
        Stepper::CrankNicolson => crank_nicolson(state, dt)?,
        Stepper::ExplicitRk4 => rk4(state, dt, cfg.tolerances.cfl)?,
    };
    let (db, d2b) = spatial_derivatives(&b, state.spacing());
    if let Some(err) = find_violation(&state.base, &db, &d2b) {
        return Err(err);
    }
    Ok(RadialState {
        t: state.t + dt,
        base: state.base.clone(),
        b,
        db,
        d2b,
    })
}

/// Solves `(I - dt/2 L) x = (I + dt/2 L) b_old` for the frozen operator
/// `L b = a b'' + beta b'` with the Neumann ghost row at the left and the
/// frozen Dirichlet row at the right.
fn frozen_cn_solve(b_old: &[f64], a: &[f64], beta: &[f64], dt: f64, h: f64) -> Vec<f64> {
    let n = b_old.len();
    let h2 = h * h;
    let half = 0.5 * dt;
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];

    // row 0: L b_0 = 2 a_0 (b_1 - b_0) / h^2
    let c0 = half * 2.0 * a[0] / h2;
    diag[0] = 1.0 + c0;
    upper[0] = -c0;
    rhs[0] = b_old[0] + c0 * (b_old[1] - b_old[0]);

    for i in 1..n - 1 {
        let lo = a[i] / h2 - beta[i] / (2.0 * h);
        let mid = -2.0 * a[i] / h2;
        let up = a[i] / h2 + beta[i] / (2.0 * h);
        lower[i] = -half * lo;
        diag[i] = 1.0 - half * mid;
        upper[i] = -half * up;
        rhs[i] = b_old[i] + half * (lo * b_old[i - 1] + mid * b_old[i] + up * b_old[i + 1]);
    }

    diag[n - 1] = 1.0;
    rhs[n - 1] = b_old[n - 1];

    let mut scratch = vec![0.0; n];
    tridiag::solve_in_place(&lower, &diag, &upper, &mut rhs, &mut scratch);
    rhs
}

fn coefficients_of(base: &SolitonProfile, b: &[f64]) -> Result<(Vec<f64>, Vec<f64>), FlowError> {
    let (db, d2b) = spatial_derivatives(b, base.spacing());
    if let Some(err) = find_violation(base, &db, &d2b) {
        return Err(err);
    }
    Ok(coefficients_from(base, &db, &d2b))
}

fn crank_nicolson(state: &RadialState, dt: f64) -> Result<Vec<f64>, FlowError> {
    let h = state.spacing();
    let (a0, beta0) = state.linear_coefficients();
    let predicted = frozen_cn_solve(&state.b, &a0, &beta0, dt, h);
    let midpoint: Vec<f64> = state
        .b
        .iter()
        .zip(&predicted)
        .map(|(x, y)| 0.5 * (x + y))
        .collect();
    let (a1, beta1) = coefficients_of(&state.base, &midpoint)?;
    Ok(frozen_cn_solve(&state.b, &a1, &beta1, dt, h))
}

/// Explicit stability limit `cfl * h^2 / max(A_r)` at the current state.
pub(crate) fn explicit_limit(state: &RadialState, cfl: f64) -> f64 {
    let (a, _) = state.linear_coefficients();
    let a_max = a[..a.len() - 1].iter().fold(0.0f64, |m, &v| m.max(v));
    cfl * state.spacing().powi(2) / a_max
}

fn rk4(state: &RadialState, dt: f64, cfl: f64) -> Result<Vec<f64>, FlowError> {
    let limit = explicit_limit(state, cfl);
    if dt > limit {
        return Err(FlowError::Cfl { dt, limit });
    }
    let base = &state.base;
    let h = state.spacing();
    let eval = |b: &[f64]| -> Result<Vec<f64>, FlowError> {
        let (db, d2b) = spatial_derivatives(b, h);
        rhs_values(base, &db, &d2b)
    };
    let axpy = |x: &[f64], k: &[f64], c: f64| -> Vec<f64> {
        x.iter().zip(k).map(|(a, b)| a + c * b).collect()
    };
    let k1 = eval(&state.b)?;
    let k2 = eval(&axpy(&state.b, &k1, 0.5 * dt))?;
    let k3 = eval(&axpy(&state.b, &k2, 0.5 * dt))?;
    let k4 = eval(&axpy(&state.b, &k3, dt))?;
    Ok((0..state.len())
        .map(|i| state.b[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::build_profile;
    use std::sync::Arc;

    fn bump(grid: &[f64], c: f64, w: f64, height: f64) -> Vec<f64> {
        grid.iter()
            .map(|&s| {
                let x = 1.0 - (s - c).abs() / w;
                if x <= 0.0 {
                    0.0
                } else {
                    height * x * x * x * (x * (6.0 * x - 15.0) + 10.0)
                }
            })
            .collect()
    }

    fn config(stepper: Stepper) -> FlowConfig {
        let mut cfg = FlowConfig::new(2, 0.0, 12.0, 121, 1.0, 0.01);
        cfg.stepper = stepper;
        cfg
    }

    #[test]
    fn zero_is_fixed_point() {
        let base = Arc::new(build_profile(2, -10.0, 20.0, 301, 1e-12).unwrap());
        let zero = RadialState::zero(base).unwrap();
        let cn = step(&zero, 0.5, &config(Stepper::CrankNicolson)).unwrap();
        assert!(cn.state.b.iter().all(|&v| v == 0.0));
        assert_eq!(cn.halvings, 0);
        let limit = explicit_limit(&zero, 0.5);
        let rk = step(&zero, limit, &config(Stepper::ExplicitRk4)).unwrap();
        assert!(rk.state.b.iter().all(|&v| v.abs() < 1e-300));
    }

    #[test]
    fn steppers_agree_on_smooth_bump() {
        let cfg = config(Stepper::CrankNicolson);
        let base = cfg.build_base().unwrap();
        let st = RadialState::new(base.clone(), 0.0, bump(&base.grid, 6.0, 3.0, 0.1)).unwrap();
        let limit = explicit_limit(&st, 0.5);
        let dt = limit;
        let cn = try_step(&st, dt, &cfg).unwrap();
        let rk = try_step(&st, dt, &config(Stepper::ExplicitRk4)).unwrap();
        let diff = cn.b.iter().zip(&rk.b).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let change = cn.b.iter().zip(&st.b).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(change > 0.0);
        // both are second-order consistent: the gap is far below the change itself
        assert!(diff < 1e-3 * change, "diff {diff:e} vs change {change:e}");
    }

    #[test]
    fn explicit_rejection_path() {
        let cfg = config(Stepper::ExplicitRk4);
        let base = cfg.build_base().unwrap();
        let st = RadialState::new(base.clone(), 0.0, bump(&base.grid, 6.0, 0.5, 0.005)).unwrap();
        let limit = explicit_limit(&st, cfg.tolerances.cfl);
        let dt = 64.0 * limit;
        assert!(matches!(try_step(&st, dt, &cfg), Err(FlowError::Cfl { .. })));
        let out = step(&st, dt, &cfg).unwrap();
        assert!(out.halvings >= 6);
        assert!(out.dt <= limit);
        let mut strict = cfg.clone();
        strict.tolerances.max_halvings = 2;
        assert!(matches!(step(&st, dt, &strict), Err(FlowError::StepAborted { halvings: 2, .. })));
    }

    #[test]
    fn crank_nicolson_is_second_order_in_time() {
        let cfg = config(Stepper::CrankNicolson);
        let base = cfg.build_base().unwrap();
        let st = RadialState::new(base.clone(), 0.0, bump(&base.grid, 6.0, 3.0, 0.1)).unwrap();
        let run = |steps: usize| {
            let dt = 0.2 / steps as f64;
            let mut s = st.clone();
            for _ in 0..steps {
                s = try_step(&s, dt, &cfg).unwrap();
            }
            s.b
        };
        let (c, m, f) = (run(4), run(8), run(16));
        let d1 = c.iter().zip(&m).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        let d2 = m.iter().zip(&f).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        let ratio = d1 / d2;
        assert!((3.2..4.8).contains(&ratio), "ratio {ratio}");
    }
}
