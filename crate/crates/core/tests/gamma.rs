use proptest::prelude::*;
use sandlab::gamma::*;
use sandlab::lattice::{Domain, SparseIntField};
use sandlab::spectral::delta12_entries;
use std::f64::consts::PI;

fn phi(x: f64) -> f64 {
    1.0 - (2.0 * PI * x).cos()
}

fn field(entries: Vec<((i64, i64), i64)>) -> SparseIntField {
    SparseIntField::from_entries(Domain::plane(), entries).unwrap()
}

fn p_value(support: Vec<(i64, i64)>, v: i64) -> NLPResult {
    let n = support.len();
    solve_program(&ProgramSpec::new(ProgramKind::P, support, vec![v; n]).unwrap()).unwrap()
}

/// Golden-section minimum of a unimodal function on `[a, b]`.
fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    f(0.5 * (a + b))
}

#[test]
fn reference_value_of_the_functional() {
    let f = f_functional(&field(delta12_entries()), 64).unwrap();
    assert!((f.value - 2.868114013).abs() < 1e-9, "{}", f.value);
    assert!((f.norm_sq - 1.0 / (2.0 * PI)).abs() < 1e-9);
    assert!(f.tail_bound < 1e-8);
}

#[test]
fn parseval_norm_of_the_reference_prevector() {
    let n = parseval_norm_sq(&field(delta12_entries())).unwrap();
    assert!((n - 1.0 / (2.0 * PI)).abs() < 1e-9);
    assert!(parseval_norm_sq(&field(vec![((0, 0), 1)])).is_err());
}

#[test]
fn laplacians_have_integer_phase() {
    // v = Δ e_0 gives ξ = e_0
    let v = field(vec![((0, 0), 4), ((1, 0), -1), ((-1, 0), -1), ((0, 1), -1), ((0, -1), -1)]);
    let f = f_functional(&v, 16).unwrap();
    assert!(f.value.abs() < 1e-9, "{}", f.value);
}

#[test]
fn functional_is_stable_in_the_box_size() {
    for v in [
        delta12_entries(),
        vec![((0, 0), 1), ((1, 0), -2), ((2, 0), 1)],
        vec![((0, 0), 1), ((0, 1), -1), ((3, 0), -1), ((3, 1), 1)],
    ] {
        let v = field(v);
        let a = f_functional(&v, 16).unwrap();
        let b = f_functional(&v, 32).unwrap();
        assert!((a.value - b.value).abs() <= a.tail_bound + 1e-12, "{} {} {}", a.value, b.value, a.tail_bound);
    }
    assert!(f_functional(&field(vec![((0, 0), 1)]), 16).is_err());
    assert!(f_functional(&field(delta12_entries()), 2).is_err());
}

#[test]
fn zero_target_costs_nothing() {
    let r = p_value(vec![(0, 0)], 0);
    assert!(r.minimum.abs() < 1e-12);
}

#[test]
fn singleton_program_matches_the_symmetric_reduction() {
    // by symmetry and convexity near 0 the optimum has x_0 = a and four equal
    // neighbours b with 4a + 4b = 1
    let oracle = golden(|a| phi(a) + 4.0 * phi(0.25 - a), 0.0, 0.25);
    let r = p_value(vec![(0, 0)], 1);
    assert!((r.minimum - oracle).abs() < 1e-9, "{} vs {oracle}", r.minimum);
    assert!(r.kkt_residual < KKT_TOLERANCE);
    let spec = ProgramSpec::unit(ProgramKind::P, vec![(0, 0)]).unwrap();
    assert!((spec.objective(&r.values()) - r.minimum).abs() < 1e-12);
    assert!(spec.violation(&r.values()) <= FEASIBILITY_TOLERANCE);
}

#[test]
fn height_three_is_expensive() {
    let r = p_value(vec![(0, 0)], 3);
    assert!(r.minimum >= DEFAULT_THRESHOLD);
    // regression: centre at 1/2, one neighbour at 1/2, three at 1/6
    assert!((r.minimum - 5.5).abs() < 1e-8, "{}", r.minimum);
}

#[test]
fn minimizers_survive_perturbation() {
    for (s, v) in [(vec![(0, 0)], 1), (vec![(0, 0), (1, 0)], 1), (vec![(0, 0), (1, 1)], 1), (vec![(0, 0)], 2)] {
        let spec = ProgramSpec::new(ProgramKind::P, s.clone(), vec![v; s.len()]).unwrap();
        let r = solve_program(&spec).unwrap();
        let x = r.values();
        for k in 0..x.len() {
            for d in [-1e-4, 1e-4] {
                let mut y = x.clone();
                y[k] = (y[k] + d).clamp(0.0, 0.5);
                if spec.violation(&y) > 0.0 {
                    continue;
                }
                assert!(spec.objective(&y) >= r.minimum - 1e-9, "{s:?} coordinate {k}");
            }
        }
    }
}

#[test]
fn height_two_pair_cases() {
    let below: Vec<i64> = (-2..=2)
        .filter(|&w| {
            let spec = ProgramSpec::new(ProgramKind::Q, vec![(0, 0), (1, 0)], vec![2, w]).unwrap();
            match solve_program_below(&spec, DEFAULT_THRESHOLD) {
                Ok(b) => b.is_below(DEFAULT_THRESHOLD),
                Err(sandlab::Error::Infeasible(_)) => false,
                Err(e) => panic!("{e}"),
            }
        })
        .collect();
    assert_eq!(below, vec![-1, 0]);
}

#[test]
fn additivity_for_far_singletons() {
    let r = program_properties_check(&[(0, 0)], &[(0, 3)], 1).unwrap();
    assert_eq!(r.distance, 3);
    assert!(r.additivity_ok, "{:?}", r.additivity_error);
    assert!(r.monotone_ok);
    assert!(r.symmetry_deviation < 1e-9);
    assert!(r.restricted_start_spread < 1e-8);
}

#[test]
fn restricted_program_has_one_minimizer() {
    for s in [vec![(0, 0), (1, 0)], vec![(0, 0), (1, 1), (2, 0)]] {
        let r = program_properties_check(&s, &[(10, 10)], 1).unwrap();
        assert!(r.restricted_start_spread < 1e-8, "{s:?} {}", r.restricted_start_spread);
        assert!(r.symmetry_deviation < 1e-9);
    }
}

#[test]
fn enumeration_matches_unpruned_search_in_a_small_ball() {
    let e = enumerate_supports(DEFAULT_THRESHOLD).unwrap();
    assert!(e.max_size <= 6);
    assert!(e.survivors.iter().all(|s| s.value < DEFAULT_THRESHOLD));
    assert_eq!(e.survivors.len(), 101);
    let shapes = brute_force_supports(2, DEFAULT_THRESHOLD, 7).unwrap();
    let mut brute: Vec<Vec<(i64, i64)>> = shapes
        .into_iter()
        .filter(|s| p_value(s.clone(), 1).minimum < DEFAULT_THRESHOLD)
        .collect();
    brute.sort();
    let fits: Vec<Vec<(i64, i64)>> = {
        let all = brute_force_supports(2, f64::INFINITY, 7).unwrap();
        let mut v: Vec<Vec<(i64, i64)>> = e
            .survivors
            .iter()
            .map(|s| s.support.clone())
            .filter(|s| all.contains(s))
            .collect();
        v.sort();
        v
    };
    assert_eq!(brute, fits);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn programs_grow_with_the_support(extra in prop::collection::vec((-2i64..=2, -2i64..=2), 1..3)) {
        let s = vec![(0, 0)];
        let mut t = s.clone();
        for x in extra {
            if !t.contains(&x) {
                t.push(x);
            }
        }
        let a = p_value(s, 1).minimum;
        let b = p_value(t, 1).minimum;
        prop_assert!(a <= b + 1e-10);
    }
}
