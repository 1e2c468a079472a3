use krs_core::soliton::{asymptotic_phi, phi_derivs, solve_phi, ExpansionOrder};

fn remainders(n: u32, s: f64) -> [f64; 4] {
    let phi = solve_phi(n, s, 1e-14).unwrap();
    let (d1, d2, d3) = phi_derivs(n, s, phi).unwrap();
    let a = asymptotic_phi(n, s, ExpansionOrder::Full).unwrap();
    [phi - a.phi, d1 - a.dphi, d2 - a.d2phi, d3 - a.d3phi].map(|r| r.abs() * s.powi(3))
}

#[test]
fn full_expansion_remainder_is_below_third_order() {
    for n in [2, 3] {
        // derivatives are clean from s = 50 on; phi needs larger s before
        // the log^4 / s^4 term stops dominating
        let schedule = [50.0, 100.0, 200.0, 400.0, 800.0];
        let table: Vec<[f64; 4]> = schedule.iter().map(|&s| remainders(n, s)).collect();
        for k in 1..4 {
            for w in table.windows(2) {
                assert!(w[1][k] < w[0][k], "n={n}, derivative {k}: {table:?}");
            }
        }
        assert!(table[3][0] < table[2][0] && table[4][0] < table[3][0], "n={n}: {table:?}");
    }
}

#[test]
fn full_expansion_beats_leading_order() {
    for n in [2, 3, 4] {
        for s in [30.0, 100.0, 300.0] {
            let phi = solve_phi(n, s, 1e-14).unwrap();
            let (d1, d2, _) = phi_derivs(n, s, phi).unwrap();
            let lead = asymptotic_phi(n, s, ExpansionOrder::Leading).unwrap();
            let full = asymptotic_phi(n, s, ExpansionOrder::Full).unwrap();
            assert!((phi - full.phi).abs() < (phi - lead.phi).abs());
            assert!((d1 - full.dphi).abs() < (d1 - lead.dphi).abs());
            assert!((d2 - full.d2phi).abs() < (d2 - lead.d2phi).abs());
        }
    }
}
