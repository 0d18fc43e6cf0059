use proptest::prelude::*;
use qct_core::criteria::{solve_l, weak_times};

/// Fixed-point iteration `l² ← D ln(ξA/l²)/(2mλ̄²)`, a contraction while the
/// logarithm exceeds one.
fn l2_by_iteration(d: f64, m: f64, lambda_bar: f64, xi: f64, area: f64) -> f64 {
    let mut l2 = 1e-3 * xi * area;
    for _ in 0..10_000 {
        l2 = d * (xi * area / l2).ln() / (2.0 * m * lambda_bar * lambda_bar);
    }
    l2
}

#[test]
fn smearing_length_matches_fixed_point() {
    for (d, m, lam, xi, a) in [
        (0.01, 1.0, 2.0, 1.0, 400.0),
        (0.01, 1.0, 0.55, 1.0, 280.0),
        (1e-4, 2.0, 0.3, 5.0, 50.0),
        (0.2, 0.5, 1.0, 1.0, 1000.0),
    ] {
        let l = solve_l(d, m, lam, xi, a).unwrap();
        let want = l2_by_iteration(d, m, lam, xi, a);
        assert!((l * l - want).abs() <= 1e-9 * want, "{} vs {want}", l * l);
    }
}

#[test]
fn structure_meets_smearing_at_t_star() {
    let s = weak_times(0.01, 1.0, 0.55, 0.1, 1.0, 280.0).unwrap();
    let rel = (s.l_cl(s.t_star) - s.delta(s.t_star)).abs() / s.delta(s.t_star);
    assert!(rel < 1e-9, "{rel}");
    assert!(s.l_cl(0.5 * s.t_star) < s.delta(0.5 * s.t_star));
    assert!((s.t_qc - 0.1 * 0.55 / 0.01).abs() < 1e-12);
}

proptest! {
    #[test]
    fn smearing_and_fringe_lengths_multiply_to_hbar(
        d in 1e-4f64..0.1,
        lam in 0.1f64..3.0,
        hbar in 0.01f64..0.5,
        t in 0.01f64..50.0,
    ) {
        let s = weak_times(d, 1.0, lam, hbar, 1.0, 400.0).unwrap();
        prop_assert!((s.l_qu(t) * s.l_cl(t) - hbar).abs() <= 1e-12 * hbar);
        let l_again = solve_l(d, 1.0, lam, 1.0, 400.0).unwrap();
        prop_assert_eq!(s.l, l_again);
    }
}
