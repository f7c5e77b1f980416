use crate::error::{Error, Result};
use crate::lattice::domain::NEIGHBORS;
use crate::lattice::Domain;
use serde::Serialize;

/// A sandpile on the l1 window of radius `R` in `Z^2`; grains leaving the
/// window are lost.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowPile {
    domain: Domain,
    heights: Vec<u64>,
}

impl WindowPile {
    pub fn zeros(radius: usize) -> Self {
        let domain = Domain::window(radius);
        WindowPile {
            domain,
            heights: vec![0; domain.storage_len()],
        }
    }

    pub fn from_fn(radius: usize, mut f: impl FnMut(i64, i64) -> u64) -> Self {
        let mut p = WindowPile::zeros(radius);
        for (i, j) in p.domain.sites().collect::<Vec<_>>() {
            p.set(i, j, f(i, j)).expect("site in window");
        }
        p
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn radius(&self) -> usize {
        match self.domain {
            Domain::Window { radius } => radius,
            Domain::Torus { .. } => unreachable!(),
        }
    }

    /// Height at `(i, j)`; zero outside the window.
    pub fn get(&self, i: i64, j: i64) -> u64 {
        self.domain.index(i, j).map_or(0, |k| self.heights[k])
    }

    pub fn set(&mut self, i: i64, j: i64, h: u64) -> Result<()> {
        let k = self
            .domain
            .index(i, j)
            .ok_or_else(|| Error::InvalidArgument(format!("({i},{j}) outside {}", self.domain)))?;
        self.heights[k] = h;
        Ok(())
    }

    pub fn add_at(&mut self, i: i64, j: i64, k: u64) -> Result<()> {
        let h = self.get(i, j);
        self.set(i, j, h + k)
    }

    pub fn total(&self) -> u64 {
        self.heights.iter().sum()
    }

    pub fn max_height(&self) -> u64 {
        self.heights.iter().copied().max().unwrap_or(0)
    }

    pub fn is_stable(&self) -> bool {
        self.max_height() <= 3
    }

    pub fn iter(&self) -> impl Iterator<Item = ((i64, i64), u64)> + '_ {
        self.domain
            .sites()
            .map(move |(i, j)| ((i, j), self.get(i, j)))
    }
}

/// Outcome of synchronous toppling on a window.
#[derive(Clone, Debug)]
pub struct ParallelRun {
    pub state: WindowPile,
    /// Per-site toppling counts `u^n`, in window storage order.
    pub odometer: Vec<u64>,
    pub steps: usize,
    /// Number of sites toppling at each step.
    pub activity: Vec<u64>,
    pub stable: bool,
}

impl ParallelRun {
    pub fn odometer_at(&self, i: i64, j: i64) -> u64 {
        self.state.domain.index(i, j).map_or(0, |k| self.odometer[k])
    }

    /// Checks `σ^n = σ - Δ u^n` at every window site (zero extension of `u`).
    pub fn explains(&self, initial: &WindowPile) -> bool {
        initial.domain.sites().all(|(i, j)| {
            let lap = 4 * self.odometer_at(i, j) as i64
                - NEIGHBORS
                    .iter()
                    .map(|&(a, b)| self.odometer_at(i + a, j + b) as i64)
                    .sum::<i64>();
            self.state.get(i, j) as i64 == initial.get(i, j) as i64 - lap
        })
    }
}

/// `n` steps of simultaneous toppling: every site with height at least 4
/// topples once per step. Stops early once stable.
pub fn parallel_topple(pile: &WindowPile, n: usize) -> ParallelRun {
    let d = pile.domain;
    let sites: Vec<(usize, [Option<usize>; 4])> = d
        .sites()
        .map(|(i, j)| {
            (
                d.index(i, j).expect("site"),
                NEIGHBORS.map(|(a, b)| d.index(i + a, j + b)),
            )
        })
        .collect();
    let mut h = pile.heights.clone();
    let mut odo = vec![0u64; h.len()];
    let mut activity = Vec::new();
    let mut toppling = Vec::new();
    let mut steps = 0;
    while steps < n {
        toppling.clear();
        toppling.extend(sites.iter().filter(|(k, _)| h[*k] >= 4));
        if toppling.is_empty() {
            break;
        }
        for &&(k, nbs) in &toppling {
            h[k] -= 4;
            odo[k] += 1;
            for y in nbs.into_iter().flatten() {
                h[y] += 1;
            }
        }
        activity.push(toppling.len() as u64);
        steps += 1;
    }
    let state = WindowPile {
        domain: d,
        heights: h,
    };
    let stable = state.is_stable();
    ParallelRun {
        state,
        odometer: odo,
        steps,
        activity,
        stable,
    }
}

/// Synchronous toppling until stable or `cap` steps.
pub fn parallel_stabilize(pile: &WindowPile, cap: usize) -> ParallelRun {
    parallel_topple(pile, cap)
}

impl Serialize for WindowPile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("WindowPile", 2)?;
        st.serialize_field("R", &self.radius())?;
        let sites: Vec<(i64, i64, u64)> = self
            .iter()
            .filter(|&(_, h)| h != 0)
            .map(|((i, j), h)| (i, j, h))
            .collect();
        st.serialize_field("heights", &sites)?;
        st.end()
    }
}
