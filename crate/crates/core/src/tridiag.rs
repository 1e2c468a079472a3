//! Tridiagonal solver (Thomas algorithm).

/// Solves `A x = rhs` in place for tridiagonal `A`.
///
/// `lower[i]` multiplies `x[i-1]` in row `i` (`lower[0]` unused), `upper[i]`
/// multiplies `x[i+1]` (`upper[n-1]` unused). No pivoting, so `A` should be
/// diagonally dominant. `scratch` must have length `n`.
pub fn solve_in_place(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64], scratch: &mut [f64]) {
    let n = rhs.len();
    assert!(diag.len() == n && lower.len() == n && upper.len() == n && scratch.len() == n);
    if n == 0 {
        return;
    }
    let mut denom = diag[0];
    scratch[0] = upper[0] / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * scratch[i - 1];
        scratch[i] = upper[i] / denom;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}
