//! Numerical laboratory for the rotationally symmetric gradient
//! Kähler-Ricci soliton on `C^n`.
//!
//! * [`soliton`]: the soliton profile `phi(s)` and its large-`s` expansion.
//! * [`barrier`]: decaying barriers around the soliton and grid
//!   certification of the five curvature inequalities.
//! * [`flow`]: the normalized radial flow for potential perturbations.
//! * [`diagnostics`]: oscillation, the `L^p` functional, metric equivalence
//!   and monotonicity counters.
//! * [`io`]: CSV import/export of profiles, barriers, states and series.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod diagnostics;
pub mod flow;
pub mod io;
pub mod quadrature;
pub mod soliton;
pub mod tridiag;

pub use barrier::{
    build_barrier, certify_barrier, check_initial_decay, cutoff_psi, find_admissible_r,
    BarrierError, BarrierProfile, BarrierSpec, CertificationReport, Side,
};

pub use soliton::{
    asymptotic_phi, build_profile, implicit_lhs, phi_derivs, solve_phi, ExpansionOrder,
    SolitonError, SolitonProfile,
};

pub use flow::{
    make_initial_perturbation, radial_rhs, run_flow, step, FlowConfig, FlowError, RadialState, Stepper,
};

pub use diagnostics::{DiagnosticSample, DiagnosticsSeries};
