use crate::error::{Error, Result};
use crate::lattice::domain::NEIGHBORS;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// A height function on `T_m` minus the sink `(0, 0)`.
///
/// Heights are stored row-major (`i * m + j`); the sink entry is kept at zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SandpileRepr", into = "SandpileRepr")]
pub struct Sandpile {
    m: usize,
    heights: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct SandpileRepr {
    m: usize,
    /// `m` rows of `m` heights; the sink entry must be zero.
    heights: Vec<Vec<u64>>,
}

impl TryFrom<SandpileRepr> for Sandpile {
    type Error = Error;
    fn try_from(r: SandpileRepr) -> Result<Self> {
        if r.heights.len() != r.m || r.heights.iter().any(|row| row.len() != r.m) {
            return Err(Error::InvalidArgument(format!(
                "heights must be {0} rows of {0} entries",
                r.m
            )));
        }
        Sandpile::from_heights(r.m, r.heights.concat())
    }
}

impl From<Sandpile> for SandpileRepr {
    fn from(s: Sandpile) -> Self {
        SandpileRepr {
            m: s.m,
            heights: s.heights.chunks(s.m).map(|c| c.to_vec()).collect(),
        }
    }
}

/// Neighbour indices of every site of `T_m` (row-major).
pub(crate) fn neighbor_table(m: usize) -> Vec<[usize; 4]> {
    let mi = m as i64;
    (0..m * m)
        .map(|idx| {
            let (i, j) = ((idx / m) as i64, (idx % m) as i64);
            NEIGHBORS.map(|(di, dj)| {
                ((i + di).rem_euclid(mi) * mi + (j + dj).rem_euclid(mi)) as usize
            })
        })
        .collect()
}

impl Sandpile {
    pub fn zeros(m: usize) -> Self {
        assert!(m >= 2, "torus side must be at least 2");
        Sandpile {
            m,
            heights: vec![0; m * m],
        }
    }

    /// Height `h` at every non-sink site.
    pub fn constant(m: usize, h: u64) -> Self {
        let mut s = Sandpile::zeros(m);
        s.heights[1..].fill(h);
        s
    }

    /// The maximal stable state `σ ≡ 3`.
    pub fn max_stable(m: usize) -> Self {
        Sandpile::constant(m, 3)
    }

    pub fn from_heights(m: usize, heights: Vec<u64>) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidArgument("torus side must be at least 2".into()));
        }
        if heights.len() != m * m {
            return Err(Error::InvalidArgument(format!(
                "expected {} heights, got {}",
                m * m,
                heights.len()
            )));
        }
        if heights[0] != 0 {
            return Err(Error::InvalidArgument("the sink must have height 0".into()));
        }
        Ok(Sandpile { m, heights })
    }

    pub fn from_fn(m: usize, mut f: impl FnMut(i64, i64) -> u64) -> Self {
        let mut s = Sandpile::zeros(m);
        for idx in 1..m * m {
            s.heights[idx] = f((idx / m) as i64, (idx % m) as i64);
        }
        s
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn heights(&self) -> &[u64] {
        &self.heights
    }

    fn index(&self, i: i64, j: i64) -> usize {
        let m = self.m as i64;
        (i.rem_euclid(m) * m + j.rem_euclid(m)) as usize
    }

    pub fn get(&self, i: i64, j: i64) -> u64 {
        self.heights[self.index(i, j)]
    }

    /// Add `k` grains at `(i, j)`; grains dropped on the sink vanish.
    pub fn add_at(&mut self, i: i64, j: i64, k: u64) {
        let idx = self.index(i, j);
        if idx != 0 {
            self.heights[idx] += k;
        }
    }

    pub fn set(&mut self, i: i64, j: i64, h: u64) {
        let idx = self.index(i, j);
        if idx != 0 {
            self.heights[idx] = h;
        }
    }

    pub fn is_stable(&self) -> bool {
        self.heights.iter().all(|&h| h <= 3)
    }

    pub fn total(&self) -> u64 {
        self.heights.iter().sum()
    }

    /// Pointwise sum.
    pub fn add(&self, other: &Sandpile) -> Result<Sandpile> {
        if self.m != other.m {
            return Err(Error::DomainMismatch(
                format!("m={}", self.m),
                format!("m={}", other.m),
            ));
        }
        Ok(Sandpile {
            m: self.m,
            heights: self
                .heights
                .iter()
                .zip(&other.heights)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// Pointwise difference; fails if a height would become negative.
    pub fn checked_sub(&self, other: &Sandpile) -> Result<Sandpile> {
        let mut heights = Vec::with_capacity(self.heights.len());
        for (a, b) in self.heights.iter().zip(&other.heights) {
            heights.push(
                a.checked_sub(*b)
                    .ok_or_else(|| Error::InvalidArgument("negative height".into()))?,
            );
        }
        Ok(Sandpile { m: self.m, heights })
    }
}

/// Per-site toppling counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Odometer {
    pub m: usize,
    pub counts: Vec<u64>,
}

impl Odometer {
    pub fn zeros(m: usize) -> Self {
        Odometer {
            m,
            counts: vec![0; m * m],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `(Δ u)(x)` at every site, sink included.
    pub fn laplacian(&self) -> Vec<i64> {
        let nb = neighbor_table(self.m);
        (0..self.counts.len())
            .map(|x| {
                4 * self.counts[x] as i64 - nb[x].iter().map(|&y| self.counts[y] as i64).sum::<i64>()
            })
            .collect()
    }

    /// Checks `final = initial - Δ u` at every non-sink site.
    pub fn explains(&self, initial: &Sandpile, fin: &Sandpile) -> bool {
        let lap = self.laplacian();
        (1..self.counts.len())
            .all(|x| fin.heights[x] as i64 == initial.heights[x] as i64 - lap[x])
    }
}

/// Order in which unstable sites are processed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    #[default]
    Fifo,
    Lifo,
}

/// Result of a stabilization.
#[derive(Clone, Debug)]
pub struct Stabilized {
    pub state: Sandpile,
    pub odometer: Odometer,
    /// Grains absorbed by the sink.
    pub lost: u64,
}

/// Stabilize with the default FIFO policy.
pub fn stabilize(s: &Sandpile) -> (Sandpile, Odometer) {
    let r = stabilize_with(s, Policy::Fifo);
    (r.state, r.odometer)
}

/// Stabilize, toppling each unstable site `⌊h/4⌋` times at once.
pub fn stabilize_with(s: &Sandpile, policy: Policy) -> Stabilized {
    let m = s.m;
    let nb = neighbor_table(m);
    let mut h = s.heights.clone();
    let mut odo = vec![0u64; m * m];
    let mut queued = vec![false; m * m];
    let mut work: VecDeque<usize> = VecDeque::new();
    for x in 1..m * m {
        if h[x] >= 4 {
            queued[x] = true;
            work.push_back(x);
        }
    }
    let mut lost = 0u64;
    loop {
        let next = match policy {
            Policy::Fifo => work.pop_front(),
            Policy::Lifo => work.pop_back(),
        };
        let Some(x) = next else { break };
        queued[x] = false;
        let t = h[x] / 4;
        if t == 0 {
            continue;
        }
        h[x] -= 4 * t;
        odo[x] += t;
        for &y in &nb[x] {
            if y == 0 {
                lost += t;
                continue;
            }
            h[y] += t;
            if h[y] >= 4 && !queued[y] {
                queued[y] = true;
                work.push_back(y);
            }
        }
    }
    Stabilized {
        state: Sandpile { m, heights: h },
        odometer: Odometer { m, counts: odo },
        lost,
    }
}
