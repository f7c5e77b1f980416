use proptest::prelude::*;
use sandlab::lattice::SparseIntField;
use sandlab::spectral::*;
use sandlab::Domain;

fn sparse(m: usize, entries: &[((i64, i64), i64)]) -> SparseIntField {
    SparseIntField::from_entries(Domain::torus(m), entries.iter().copied()).unwrap()
}

#[test]
fn prevector_frequency_is_harmonic_mod_one() {
    let v = sparse(12, &delta12_entries());
    let xi = frequency_from_prevector(&v).unwrap();
    assert!(harmonic_defect(xi.values()) < 1e-10);
    assert_eq!(xi.get(0, 0), 0.0);
    assert!(!xi.is_zero());
    let back = distinguished_prevector(&xi).unwrap();
    let again = frequency_from_prevector(&back).unwrap();
    assert!(xi.sub(&again).unwrap().is_zero());
}

#[test]
fn laplacian_of_integer_function_has_zero_frequency() {
    let w = sparse(10, &[((0, 0), 1), ((3, 4), -2), ((7, 1), 5)]);
    let v = w.laplacian().unwrap();
    assert!(frequency_from_prevector(&v).unwrap().is_zero());
    let xi = frequency_from_prevector(&sparse(10, &delta12_entries())).unwrap();
    let shifted = frequency_from_prevector(&sparse(10, &delta12_entries()).add(&v).unwrap()).unwrap();
    assert!(xi.sub(&shifted).unwrap().is_zero());
}

#[test]
fn non_harmonic_field_is_rejected() {
    let f = sandlab::Field::from_fn(Domain::torus(5), |i, _| if i == 1 { 0.3 } else { 0.0 });
    assert!(Frequency::new(f).is_err());
    let f = sandlab::Field::from_fn(Domain::torus(5), |_, _| 0.25);
    assert!(Frequency::new(f).is_err());
}

#[test]
fn total_savings_matches_eigenvalue() {
    let m = 16;
    let xi = frequency_from_prevector(&sparse(m, &delta12_entries())).unwrap();
    let rep = savings(&xi, &[(0, 0), (1, 1)]);
    let mu = mu_hat(&xi).norm();
    assert!((rep.total_savings - (m * m) as f64 * (1.0 - mu)).abs() < 1e-10);
    assert!((rep.eigenvalue_modulus - mu).abs() < 1e-14);
    assert!((mu_hat(&xi.neg()) - mu_hat(&xi).conj()).norm() < 1e-14);
}

#[test]
fn savings_are_superadditive_over_disjoint_sets() {
    let xi = frequency_from_prevector(&sparse(14, &delta12_entries())).unwrap();
    let a: Vec<(i64, i64)> = (-2..=2).flat_map(|i| (-2..=0).map(move |j| (i, j))).collect();
    let b: Vec<(i64, i64)> = (-2..=2).flat_map(|i| (1..=3).map(move |j| (i, j))).collect();
    let union: Vec<(i64, i64)> = a.iter().chain(&b).copied().collect();
    let (sa, sb, su) = (
        set_savings(xi.values(), &a),
        set_savings(xi.values(), &b),
        set_savings(xi.values(), &union),
    );
    assert!(sa >= 0.0 && sb >= 0.0);
    assert!(su >= sa + sb - 1e-12);
    assert!(total_savings(xi.values()) >= su - 1e-12);
}

#[test]
fn dual_oracle_order_is_the_determinant() {
    for m in 2..=3 {
        let o = dual_group_oracle(m).unwrap();
        assert_eq!(o.order as i64, o.denominator);
        assert_eq!(recurrent_states(m).len(), o.order);
        let det = sandlab::sandpile::determinant_reduced_laplacian(m);
        assert_eq!(det.to_string(), o.denominator.to_string());
        assert!((o.l2_distance_sq(0) - (o.order - 1) as f64).abs() < 1e-9);
        let zero = o.frequencies.iter().filter(|f| f.is_zero()).count();
        assert_eq!(zero, 1);
    }
    assert!(dual_group_oracle(4).is_err());
}

#[test]
fn gap_search_matches_dual_oracle_on_small_tori() {
    for m in 2..=3 {
        let o = dual_group_oracle(m).unwrap();
        let s = gap_search(m, 8, 4).unwrap();
        assert!((s.gap - o.gap).abs() < 1e-12, "m={m}: {} vs {}", s.gap, o.gap);
    }
}

#[test]
fn oracle_moduli_agree_with_prevector_frequencies() {
    let m = 3;
    let o = dual_group_oracle(m).unwrap();
    let mut oracle: Vec<f64> = o.frequencies.iter().map(|f| f.modulus()).collect();
    oracle.sort_by(f64::total_cmp);
    let g = sandlab::greens::greens_torus(m);
    let mut seen: Vec<f64> = Vec::new();
    for a in -12..12 {
        for b in -12..12 {
            let v = sparse(m, &[((1, 0), a), ((0, 1), b), ((0, 0), -a - b)]);
            seen.push(mu_hat(&frequency_from_prevector_with(&g, &v).unwrap()).norm());
        }
    }
    for x in &seen {
        assert!(oracle.iter().any(|y| (x - y).abs() < 1e-10));
    }
}

#[test]
fn sampled_distance_is_below_half_the_l2_bound() {
    let o = dual_group_oracle(3).unwrap();
    for steps in [2u64, 6, 12] {
        let tv = sampled_tv_distance(3, steps, 40_000, 7).unwrap();
        // sampling adds roughly sqrt(|G| / samples) to the estimate
        let noise = (o.order as f64 / 40_000.0).sqrt();
        assert!(tv <= 0.5 * o.l2_distance(steps) + noise, "N={steps}: {tv}");
    }
    assert_eq!(
        sampled_tv_distance(2, 5, 5000, 3).unwrap(),
        sampled_tv_distance(2, 5, 5000, 3).unwrap()
    );
}

#[test]
fn l2_distance_decreases() {
    let o = dual_group_oracle(3).unwrap();
    let d: Vec<f64> = (0..20).map(|n| o.l2_distance(n)).collect();
    assert!(d.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn clusters_split_by_distance() {
    let m = 40;
    let mut e = delta12_entries();
    e.extend(delta12_entries().iter().map(|&((i, j), c)| ((i + 10, j), -c)));
    let v = sparse(m, &e);
    assert_eq!(r_cluster(&v, 2).len(), 2);
    assert_eq!(r_cluster(&v, 5).len(), 1);
    // on the torus the quotient distance wraps around
    let w = sparse(m, &[((0, 0), 1), ((m as i64 - 1, 0), -1)]);
    assert_eq!(r_cluster(&w, 1).len(), 1);
}

#[test]
fn reduction_removes_laplacian_clusters_only() {
    let m = 40;
    let lap = sparse(m, &[((15, 15), 1)]).laplacian().unwrap();
    let v = sparse(m, &delta12_entries()).add(&lap).unwrap();
    let reduced = r_reduce(&v, 2).unwrap();
    assert_eq!(reduced, sparse(m, &delta12_entries()));
    let fixed = sparse(m, &delta12_entries());
    assert_eq!(r_reduce(&fixed, 2).unwrap(), fixed);
}

#[test]
fn laplacian_descent_finds_short_representative() {
    let mut v = delta12_entries();
    v.extend([((5, 5), 4), ((6, 5), -1), ((4, 5), -1), ((5, 6), -1), ((5, 4), -1)]);
    let mut out = laplacian_descent(&v);
    out.sort();
    let mut want = delta12_entries();
    want.sort();
    assert_eq!(out, want);
}

#[test]
fn cutoff_lower_bound_is_monotone() {
    let p = cutoff_profile(12, 4, 2, &[]).unwrap();
    assert_eq!(p.rows.len(), 11);
    assert!(p.rows.windows(2).all(|w| w[0].n <= w[1].n && w[1].lower_bound <= w[0].lower_bound));
    assert!(p.rows.iter().all(|r| r.upper_proxy >= r.lower_bound * (1.0 - 1e-12)));
    assert!(p.lower_crossing.is_some());
    assert!(cutoff_profile(4, 4, 2, &[]).is_err());
}

#[test]
fn separated_dipoles_are_nearly_additive() {
    let near = separated_additivity(64, 4).unwrap();
    let far = separated_additivity(64, 16).unwrap();
    assert!(far.error.abs() < near.error.abs());
    assert!(near.single > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn frequency_is_linear(a in -3i64..=3, b in -3i64..=3, x in 1i64..6, y in 1i64..6) {
        let m = 8;
        let p = sparse(m, &[((x, y), 1), ((0, 0), -1)]);
        let q = sparse(m, &[((y, x), 1), ((1, 1), -1)]);
        let combined = p.scale(a).add(&q.scale(b)).unwrap();
        let lhs = frequency_from_prevector(&combined).unwrap();
        let fp = frequency_from_prevector(&p.scale(a)).unwrap();
        let fq = frequency_from_prevector(&q.scale(b)).unwrap();
        prop_assert!(lhs.sub(&fp).unwrap().sub(&fq).unwrap().is_zero());
    }

    #[test]
    fn eigenvalue_is_translation_invariant(dx in 0i64..10, dy in 0i64..10) {
        let m = 10;
        let v = sparse(m, &delta12_entries());
        let w = v.translate((dx, dy)).unwrap();
        let a = mu_hat(&frequency_from_prevector(&v).unwrap()).norm();
        let b = mu_hat(&frequency_from_prevector(&w).unwrap()).norm();
        prop_assert!((a - b).abs() < 1e-12);
    }
}
