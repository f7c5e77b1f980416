use super::state::{neighbor_table, stabilize, Sandpile};
use crate::error::{Error, Result};
use rand::Rng;
use serde::Serialize;

/// Single-grain additions with a reusable neighbour table.
pub(crate) struct Dropper {
    nb: Vec<[usize; 4]>,
    stack: Vec<usize>,
}

impl Dropper {
    pub(crate) fn new(m: usize) -> Self {
        Dropper {
            nb: neighbor_table(m),
            stack: Vec::new(),
        }
    }

    pub(crate) fn drop_grain(&mut self, h: &mut [u64], x: usize) {
        if x == 0 {
            return;
        }
        h[x] += 1;
        if h[x] < 4 {
            return;
        }
        self.stack.push(x);
        while let Some(y) = self.stack.pop() {
            let t = h[y] / 4;
            if t == 0 {
                continue;
            }
            h[y] -= 4 * t;
            for &z in &self.nb[y] {
                if z != 0 {
                    h[z] += t;
                    if h[z] >= 4 && h[z] - t < 4 {
                        self.stack.push(z);
                    }
                }
            }
        }
    }
}

/// One step of the sandpile chain with the grain dropped at `(i, j)`.
pub fn markov_step_at(s: &Sandpile, i: i64, j: i64) -> Sandpile {
    let mut t = s.clone();
    t.add_at(i, j, 1);
    stabilize(&t).0
}

/// One step of the sandpile chain: drop a grain at a uniform site of `T_m`
/// (the sink included, in which case nothing changes) and stabilize.
pub fn markov_step<R: Rng + ?Sized>(s: &Sandpile, rng: &mut R) -> Sandpile {
    let m = s.m();
    let x = rng.random_range(0..m * m);
    if x == 0 {
        return s.clone();
    }
    markov_step_at(s, (x / m) as i64, (x % m) as i64)
}

/// Burning test: a stable `σ` is recurrent iff adding one grain per edge to the
/// sink makes every site topple exactly once and returns `σ`.
pub fn is_recurrent(s: &Sandpile) -> bool {
    if !s.is_stable() {
        return false;
    }
    let m = s.m();
    let nb = neighbor_table(m);
    let mut burn = s.clone();
    for x in 1..m * m {
        let edges = nb[x].iter().filter(|&&y| y == 0).count() as u64;
        burn.add_at((x / m) as i64, (x % m) as i64, edges);
    }
    let (fin, odo) = stabilize(&burn);
    fin == *s && odo.counts[1..].iter().all(|&c| c == 1)
}

/// `stab(σ1 + σ2)` for recurrent `σ1, σ2`.
pub fn group_add(a: &Sandpile, b: &Sandpile) -> Result<Sandpile> {
    if !is_recurrent(a) || !is_recurrent(b) {
        return Err(Error::NotRecurrent);
    }
    Ok(stabilize(&a.add(b)?).0)
}

/// Identity of the sandpile group: `stab(6 - stab(6))`.
pub fn identity(m: usize) -> Sandpile {
    let six = Sandpile::constant(m, 6);
    let s6 = stabilize(&six).0;
    stabilize(&six.checked_sub(&s6).expect("stable heights are at most 3")).0
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HittingTime {
    /// Steps until the chain first entered the recurrent class, if within the cap.
    pub steps: Option<u64>,
    pub cap: u64,
}

impl HittingTime {
    /// `100 m^2 sqrt(log m)`, rounded up.
    pub fn default_cap(m: usize) -> u64 {
        let mf = m as f64;
        (100.0 * mf * mf * mf.ln().sqrt()).ceil() as u64
    }
}

/// Run the chain from `start` until it is recurrent or `cap` steps have passed.
///
/// Recurrence is tested once per block of `m^2` steps; since the recurrent class
/// is closed, the first successful block is replayed step by step.
pub fn hitting_time_trial<R: Rng + Clone>(start: &Sandpile, rng: &mut R, cap: u64) -> HittingTime {
    if is_recurrent(start) {
        return HittingTime {
            steps: Some(0),
            cap,
        };
    }
    let m = start.m();
    let n = (m * m) as u64;
    let mut dropper = Dropper::new(m);
    let mut s = start.clone();
    let mut done = 0u64;
    while done < cap {
        let block = n.min(cap - done);
        let saved = (s.clone(), rng.clone());
        let mut h = s.heights().to_vec();
        for _ in 0..block {
            let x = rng.random_range(0..m * m);
            dropper.drop_grain(&mut h, x);
        }
        let end = Sandpile::from_heights(m, h).expect("sink stays empty");
        if is_recurrent(&end) {
            let (mut t, mut r) = saved;
            let mut h = t.heights().to_vec();
            for k in 1..=block {
                let x = r.random_range(0..m * m);
                dropper.drop_grain(&mut h, x);
                t = Sandpile::from_heights(m, h.clone()).expect("sink stays empty");
                if is_recurrent(&t) {
                    *rng = r;
                    return HittingTime {
                        steps: Some(done + k),
                        cap,
                    };
                }
            }
            unreachable!("block ended recurrent");
        }
        s = end;
        done += block;
    }
    HittingTime { steps: None, cap }
}
