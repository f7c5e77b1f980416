mod common;

use common::*;
use num_bigint::{BigInt, BigUint};
use proptest::prelude::*;
use rand::Rng;
use sandlab::rng::stream;
use sandlab::sandpile::*;
use std::collections::{BTreeSet, HashSet, VecDeque};

fn random_pile(m: usize, max: u64, seed: u64) -> Sandpile {
    let mut rng = stream(seed, 0);
    Sandpile::from_fn(m, |_, _| rng.random_range(0..=max))
}

#[test]
fn stable_input_is_unchanged() {
    let s = random_pile(5, 3, 1);
    let (t, odo) = stabilize(&s);
    assert_eq!(s, t);
    assert_eq!(odo.total(), 0);
}

#[test]
fn single_toppling_on_small_torus() {
    let mut s = Sandpile::zeros(3);
    s.set(1, 1, 4);
    let (t, odo) = stabilize(&s);
    assert_eq!(t.get(1, 1), 0);
    assert_eq!(odo.counts[4], 1);
    for (i, j) in [(0, 1), (2, 1), (1, 0), (1, 2)] {
        assert_eq!(t.get(i, j), 1);
    }
    assert_eq!(t.total(), 4);
}

#[test]
fn fifo_and_lifo_agree() {
    for seed in 0..50 {
        let s = random_pile(8, 9, seed);
        let a = stabilize_with(&s, Policy::Fifo);
        let b = stabilize_with(&s, Policy::Lifo);
        assert_eq!(a.state, b.state);
        assert_eq!(a.odometer, b.odometer);
        assert_eq!(a.lost, b.lost);
        assert_eq!(s.total(), a.state.total() + a.lost);
        assert!(a.odometer.explains(&s, &a.state));
        assert!(a.state.is_stable());
        assert_eq!(stabilize(&a.state).0, a.state);
    }
}

#[test]
fn parallel_toppling_invariants() {
    let mut rng = stream(3, 0);
    let pile = WindowPile::from_fn(12, |_, _| rng.random_range(0..8));
    let mut cur = pile.clone();
    for _ in 0..40 {
        let next = parallel_topple(&cur, 1).state;
        for ((i, j), h) in next.iter() {
            assert!(h <= cur.get(i, j).max(7));
        }
        cur = next;
    }
    for n in [1usize, 5, 20, 200] {
        let run = parallel_topple(&pile, n);
        assert!(run.explains(&pile));
        assert!(run.odometer.iter().all(|&u| u as usize <= n));
    }
    let threes = WindowPile::from_fn(6, |_, _| 3);
    let run = parallel_topple(&threes, 1);
    assert!(run.odometer.iter().all(|&u| u == 0));
    assert!(run.stable);
}

#[test]
fn chain_step_regression_on_two_torus() {
    let s = Sandpile::max_stable(2);
    let t = markov_step_at(&s, 1, 0);
    // By hand: (1,0) topples, then (1,1), then (0,1).
    assert_eq!((t.get(0, 1), t.get(1, 0), t.get(1, 1)), (1, 2, 3));
    assert_eq!(markov_step_at(&s, 0, 0), s);
}

/// All states reachable from `σ ≡ 3` by adding grains and stabilizing.
fn reachable_recurrent(m: usize) -> HashSet<Sandpile> {
    let start = Sandpile::max_stable(m);
    let mut seen = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        for x in 1..m * m {
            let t = markov_step_at(&s, (x / m) as i64, (x % m) as i64);
            if seen.insert(t.clone()) {
                queue.push_back(t);
            }
        }
    }
    seen
}

fn all_stable(m: usize) -> Vec<Sandpile> {
    let n = m * m - 1;
    (0..4u64.pow(n as u32))
        .map(|code| {
            let mut c = code;
            let mut h = vec![0u64; m * m];
            for slot in h.iter_mut().skip(1) {
                *slot = c % 4;
                c /= 4;
            }
            Sandpile::from_heights(m, h).unwrap()
        })
        .collect()
}

#[test]
fn burning_test_matches_reachability() {
    for m in [2usize, 3] {
        let reach = reachable_recurrent(m);
        let det = bareiss_det(dense_reduced_laplacian(m));
        assert_eq!(BigInt::from(reach.len()), det);
        let burned: HashSet<Sandpile> = all_stable(m).into_iter().filter(is_recurrent).collect();
        assert_eq!(burned, reach);
    }
    assert!(is_recurrent(&Sandpile::max_stable(5)));
    assert!(!is_recurrent(&Sandpile::zeros(2)));
}

#[test]
fn chain_is_uniform_on_two_torus() {
    let recurrent: Vec<Sandpile> = reachable_recurrent(2).into_iter().collect();
    let k = recurrent.len();
    let mut counts = vec![0u64; k];
    let mut rng = stream(11, 0);
    let mut s = Sandpile::max_stable(2);
    let steps = 200_000;
    for _ in 0..steps {
        s = markov_step(&s, &mut rng);
        counts[recurrent.iter().position(|r| *r == s).unwrap()] += 1;
    }
    let e = steps as f64 / k as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    // 31 degrees of freedom; the 0.999 quantile is about 61.1
    assert!(chi2 < 61.1, "chi2 {chi2}");
}

#[test]
fn group_laws_on_three_torus() {
    let rec: Vec<Sandpile> = reachable_recurrent(3).into_iter().collect();
    let e = identity(3);
    assert!(is_recurrent(&e));
    let mut rng = stream(5, 0);
    for _ in 0..30 {
        let a = &rec[rng.random_range(0..rec.len())];
        let b = &rec[rng.random_range(0..rec.len())];
        let c = &rec[rng.random_range(0..rec.len())];
        assert_eq!(group_add(a, b).unwrap(), group_add(b, a).unwrap());
        assert_eq!(group_add(a, &e).unwrap(), *a);
        let l = group_add(&group_add(a, b).unwrap(), c).unwrap();
        let r = group_add(a, &group_add(b, c).unwrap()).unwrap();
        assert_eq!(l, r);
    }
    assert!(group_add(&Sandpile::zeros(3), &e).is_err());
}

#[test]
fn group_structure_small_tori() {
    for m in 2..=6 {
        let g = group_structure(m).unwrap();
        let det = bareiss_det(dense_reduced_laplacian(m));
        assert_eq!(BigInt::from(g.order.clone()), det, "m={m}");
        for w in g.invariant_factors.windows(2) {
            assert_eq!(&w[1] % &w[0], BigUint::from(0u32));
        }
        assert_eq!(g.unit_factors + g.invariant_factors.len(), m * m - 1);
    }
    // The largest invariant factor is the exponent of the group.
    let rec: BTreeSet<Vec<u64>> = reachable_recurrent(3)
        .into_iter()
        .map(|s| s.heights().to_vec())
        .collect();
    let e = identity(3);
    let mut exponent = 1u64;
    for h in &rec {
        let a = Sandpile::from_heights(3, h.clone()).unwrap();
        let (mut x, mut k) = (a.clone(), 1u64);
        while x != e {
            x = group_add(&x, &a).unwrap();
            k += 1;
        }
        exponent = num_integer::lcm(exponent, k);
    }
    let g = group_structure(3).unwrap();
    assert_eq!(g.invariant_factors.last().unwrap(), &BigUint::from(exponent));
}

#[test]
fn hitting_times() {
    let mut rng = stream(9, 0);
    let h = hitting_time_trial(&Sandpile::max_stable(8), &mut rng, 10);
    assert_eq!(h.steps, Some(0));
    let cap = HittingTime::default_cap(8);
    for t in 0..5 {
        let mut rng = stream(9, t);
        let h = hitting_time_trial(&Sandpile::zeros(8), &mut rng, cap);
        let n = h.steps.expect("below cap");
        // at least the grains needed to fill the minimal recurrent level
        assert!(n >= 64);
    }
}

#[test]
fn hitting_time_is_first_entry() {
    // replay the same stream step by step
    let m = 4;
    let mut rng = stream(21, 0);
    let h = hitting_time_trial(&Sandpile::zeros(m), &mut rng, 10_000);
    let n = h.steps.unwrap();
    let mut rng = stream(21, 0);
    let mut s = Sandpile::zeros(m);
    for k in 1..=n {
        s = markov_step(&s, &mut rng);
        assert_eq!(is_recurrent(&s), k == n, "step {k}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn recurrent_class_is_closed(seed in 0u64..1000, x in 1usize..16) {
        let m = 4;
        let mut s = Sandpile::max_stable(m);
        let mut rng = stream(seed, 1);
        for _ in 0..20 {
            s = markov_step(&s, &mut rng);
        }
        let t = markov_step_at(&s, (x / m) as i64, (x % m) as i64);
        prop_assert!(is_recurrent(&t));
    }

    #[test]
    fn stabilization_conserves_grains(seed in 0u64..10_000) {
        let s = random_pile(6, 12, seed);
        let r = stabilize_with(&s, Policy::Lifo);
        prop_assert_eq!(s.total(), r.state.total() + r.lost);
        prop_assert!(r.odometer.explains(&s, &r.state));
    }
}
