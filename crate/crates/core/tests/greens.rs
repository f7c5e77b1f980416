mod common;

use common::*;
use rand::Rng;
use sandlab::greens::*;
use sandlab::lattice::{Domain, SparseIntField};
use std::f64::consts::PI;

#[test]
fn quadrature_oracle_reproduces_closed_forms() {
    assert!((greens_z2_quadrature(1, 0) + 0.25).abs() < 1e-12);
    assert!((greens_z2_quadrature(0, 1) + 0.25).abs() < 1e-12);
    assert!((greens_z2_quadrature(2, 0) - (2.0 / PI - 1.0)).abs() < 1e-12);
    for n in 1..6 {
        let d = greens_z2_quadrature(n, n) - greens_z2_diagonal(n as u32);
        assert!(d.abs() < 1e-12, "n={n} diff {d}");
    }
}

#[test]
fn z2_values_match_quadrature() {
    let pts = [(1, 0), (2, 0), (1, 1), (3, 4), (7, -2), (-10, 5), (0, 16)];
    let z = z2_values(&pts).unwrap();
    assert!(z.doubling_change <= DOUBLING_TOLERANCE);
    for (p, v) in pts.iter().zip(&z.values) {
        let o = greens_z2_quadrature(p.0, p.1);
        assert!((v - o).abs() < 1e-9, "{p:?}: {v} vs {o}");
    }
}

#[test]
fn z2_window_is_harmonic_off_origin() {
    let g = greens_z2(12).unwrap();
    assert_eq!(g.get(0, 0), 0.0);
    assert!((g.get(1, 0) + 0.25).abs() < 1e-9);
    // Δ G = e_0 on the interior of the window
    for i in -6i64..=6 {
        for j in -6i64..=6 {
            if i.abs() + j.abs() > 10 {
                continue;
            }
            let lap = 4.0 * g.get(i, j)
                - g.get(i + 1, j)
                - g.get(i - 1, j)
                - g.get(i, j + 1)
                - g.get(i, j - 1);
            let want = if (i, j) == (0, 0) { 1.0 } else { 0.0 };
            assert!((lap - want).abs() < 1e-8, "({i},{j}) {lap}");
        }
    }
    for (n, m) in [(3i64, 5i64), (-2, 7), (4, -4)] {
        let v = g.get(n, m);
        for (a, b) in [(m, n), (-n, m), (n, -m), (-m, -n)] {
            assert!((g.get(a, b) - v).abs() < 1e-12);
        }
    }
}

#[test]
fn torus_green_inverts_laplacian_on_mean_zero_fields() {
    let m = 64;
    let g = greens_torus(m);
    let dom = Domain::torus(m);
    let mut rng = sandlab::rng::stream(7, 0);
    for _ in 0..10 {
        let mut v = SparseIntField::zero(dom);
        for _ in 0..20 {
            let (i, j) = (rng.random_range(0..m as i64), rng.random_range(0..m as i64));
            let x = rng.random_range(-3..=3);
            v.add_at(i, j, x).unwrap();
            v.add_at(0, 0, -x).unwrap();
        }
        let u = torus_potential(&g, &v);
        let err = u.laplacian().max_diff(&v.to_field().unwrap()).unwrap();
        assert!(err < 1e-10, "err {err}");
    }
}

#[test]
fn torus_values_converge_to_plane() {
    let line = TorusLine::new(4096);
    let g0 = line.value(0, 0);
    let d = line.value(1, 0) - g0;
    assert!((d + 0.25).abs() < 1e-6);
}

#[test]
fn asymptotic_constants() {
    let g = greens_z2(128).unwrap();
    let fit = fit_asymptotics(&g).unwrap();
    assert!((fit.a - log_expansion_constant()).abs() < 1e-7, "a {}", fit.a);
    assert!((fit.b - log_expansion_angular()).abs() < 1e-4, "b {}", fit.b);
    assert!(fit.residual_exponent < -3.0, "{}", fit.residual_exponent);
}

#[test]
fn log_bound_with_constant_shift() {
    let g = greens_z2(40).unwrap();
    let c = log_bound_check(&g, log_expansion_constant(), 28.0);
    assert!(c.max_scaled < 0.0173, "{c:?}");
    let raw = log_bound_check(&g, 0.0, 28.0);
    assert!(!raw.holds);
}

#[test]
fn derivative_decay_rates() {
    for (a, b) in [(1, 0), (0, 1), (1, 1), (2, 0), (3, 0), (2, 1)] {
        let r = derivative_decay_report(256, a, b).unwrap();
        assert!(r.bounded, "({a},{b}) slope {}", r.sup_slope);
    }
    for (a, b) in [(1, 0), (0, 1)] {
        let c = derivative_decay_report(256, a, b)
            .unwrap()
            .first_derivative_constant
            .unwrap();
        let rel = (c * 2.0 * PI - 1.0).abs();
        assert!(rel < 0.05, "({a},{b}) c {c}");
    }
}

#[test]
fn derivative_convergence_in_side() {
    let vals = derivative_convergence(5, 3, 1, 1, &[64, 128, 256]).unwrap();
    let z = *vals.last().unwrap();
    let e: Vec<f64> = vals[..3].iter().map(|v| (v - z).abs()).collect();
    assert!(e[1] < e[0] && e[2] < e[1], "{e:?}");
    // plane value against the quadrature oracle
    let o = greens_z2_quadrature(6, 4) - greens_z2_quadrature(5, 4) - greens_z2_quadrature(6, 3)
        + greens_z2_quadrature(5, 3);
    assert!((z - o).abs() < 1e-8);
}

#[test]
fn lp_classification() {
    let r = lp_membership_report(3, 0, 1.0, 64).unwrap();
    assert_eq!(r.verdict, Membership::Member);
    assert!(r.cauchy);
    let r = lp_membership_report(1, 1, 2.0, 64).unwrap();
    assert_eq!(r.verdict, Membership::Member);
    assert!(r.cauchy);
    let r = lp_membership_report(1, 0, 2.0, 64).unwrap();
    assert_eq!(r.verdict, Membership::NonMember);
    // |D_1 G|^2 ~ cos^2θ/(4π^2 r^2): partial sums grow like log W / (4π)
    assert!((r.log_growth_rate * 4.0 * PI - 1.0).abs() < 0.1, "{}", r.log_growth_rate);
}

#[test]
fn local_limit_rate() {
    let e1 = llt_error(100);
    let e4 = llt_error(400);
    let ratio = e4.max_error / e1.max_error;
    assert!(ratio > 0.0625 && ratio < 0.25, "ratio {ratio}");
    let p = convolution_power(30);
    assert!((p.sum() - 1.0).abs() < 1e-12);
}
