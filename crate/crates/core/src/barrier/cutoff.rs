//! Smooth monotone cutoff `psi` with `psi = 0` on `x <= 1`, `psi = 1` on
//! `x >= 2`, built from `g(t) = exp(-1/t)` as `g(x-1) / (g(x-1) + g(2-x))`.
//! Derivatives come from truncated Taylor arithmetic on the closed form.

use std::ops::{Add, Div, Mul, Neg};

/// Taylor coefficients `f^(k)/k!` for `k = 0..=3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Jet([f64; 4]);

impl Jet {
    pub fn variable(x: f64) -> Self {
        Jet([x, 1.0, 0.0, 0.0])
    }

    pub fn constant(c: f64) -> Self {
        Jet([c, 0.0, 0.0, 0.0])
    }

    pub fn exp(self) -> Self {
        let a = self.0;
        let mut e = [a[0].exp(), 0.0, 0.0, 0.0];
        for k in 1..4 {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * a[j] * e[k - j];
            }
            e[k] = acc / k as f64;
        }
        Jet(e)
    }

    /// Derivatives `(f, f', f'', f''')`.
    pub fn derivatives(self) -> (f64, f64, f64, f64) {
        let c = self.0;
        (c[0], c[1], 2.0 * c[2], 6.0 * c[3])
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|k| self.0[k] + o.0[k]))
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet(self.0.map(|c| -c))
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|k| (0..=k).map(|i| self.0[i] * o.0[k - i]).sum()))
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let (a, b) = (self.0, o.0);
        let mut q = [0.0; 4];
        for k in 0..4 {
            let mut acc = a[k];
            for i in 1..=k {
                acc -= b[i] * q[k - i];
            }
            q[k] = acc / b[0];
        }
        Jet(q)
    }
}

/// `exp(-1/t)` for `t > 0`, zero otherwise. Below `t = 1/700` the value and
/// its derivatives are under `1e-290` and are flushed to zero.
fn flat_exp(t: Jet) -> Jet {
    if t.0[0] <= 1.0 / 700.0 {
        return Jet::constant(0.0);
    }
    (-(Jet::constant(1.0) / t)).exp()
}

/// `psi(x)` and its first three derivatives.
pub fn cutoff_psi(x: f64) -> (f64, f64, f64, f64) {
    if x <= 1.0 {
        return (0.0, 0.0, 0.0, 0.0);
    }
    if x >= 2.0 {
        return (1.0, 0.0, 0.0, 0.0);
    }
    let v = Jet::variable(x);
    let rising = flat_exp(v + Jet::constant(-1.0));
    let falling = flat_exp(Jet::constant(2.0) + (-v));
    (rising / (rising + falling)).derivatives()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateaus_and_midpoint() {
        assert_eq!(cutoff_psi(0.5), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(cutoff_psi(1.0), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(cutoff_psi(3.0), (1.0, 0.0, 0.0, 0.0));
        let (p, d1, d2, _) = cutoff_psi(1.5);
        assert!((p - 0.5).abs() < 1e-15);
        assert!(d1 > 0.0);
        assert!(d2.abs() < 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        for i in 1..100 {
            let x = 1.0 + i as f64 / 100.0;
            let (p, d1, d2, d3) = cutoff_psi(x);
            let f = |y: f64| cutoff_psi(y);
            let fd1 = (f(x + h).0 - f(x - h).0) / (2.0 * h);
            let fd2 = (f(x + h).1 - f(x - h).1) / (2.0 * h);
            let fd3 = (f(x + h).2 - f(x - h).2) / (2.0 * h);
            assert!((fd1 - d1).abs() < 1e-7 * (1.0 + d1.abs()), "x={x}");
            assert!((fd2 - d2).abs() < 1e-6 * (1.0 + d2.abs()), "x={x}");
            assert!((fd3 - d3).abs() < 1e-5 * (1.0 + d3.abs()), "x={x}");
            assert!((0.0..=1.0).contains(&p));
            assert!(d1 >= 0.0);
        }
    }

    #[test]
    fn symmetric_about_midpoint() {
        for i in 1..50 {
            let t = i as f64 / 100.0;
            let (a, da, d2a, d3a) = cutoff_psi(1.5 - t);
            let (b, db, d2b, d3b) = cutoff_psi(1.5 + t);
            assert!((a + b - 1.0).abs() < 1e-14);
            assert!((da - db).abs() < 1e-12 * da.max(1.0));
            assert!((d2a + d2b).abs() < 1e-10 * d2a.abs().max(1.0));
            assert!((d3a - d3b).abs() < 1e-9 * d3a.abs().max(1.0));
        }
    }

    #[test]
    fn jet_arithmetic() {
        // (1 + x)^-1 at x = 0: 1, -1, 2, -6
        let x = Jet::variable(0.0);
        let r = Jet::constant(1.0) / (Jet::constant(1.0) + x);
        assert_eq!(r.derivatives(), (1.0, -1.0, 2.0, -6.0));
        // exp(x^2) at x = 1: e, 2e, 6e, 20e
        let x = Jet::variable(1.0);
        let (a, b, c, d) = (x * x).exp().derivatives();
        let e = std::f64::consts::E;
        assert!((a - e).abs() < 1e-14);
        assert!((b - 2.0 * e).abs() < 1e-14);
        assert!((c - 6.0 * e).abs() < 1e-13);
        assert!((d - 20.0 * e).abs() < 1e-12);
    }
}
