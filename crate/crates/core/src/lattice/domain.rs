use serde::{Deserialize, Serialize};
use std::fmt;

/// A finite lattice domain: a discrete torus or an l1-ball window of `Z^2`.
///
/// Torus sites are pairs `(i, j)` with `0 <= i, j < m`. Window sites are pairs
/// with `|i| + |j| <= R`; dense storage uses the enclosing `(2R+1)^2` box in
/// row-major order and keeps the corners at zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    Torus { m: usize },
    Window {
        #[serde(rename = "R")]
        radius: usize,
    },
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Torus { m } => write!(f, "torus(m={m})"),
            Domain::Window { radius } => write!(f, "window(R={radius})"),
        }
    }
}

/// Radius used for sparse fields that stand for functions on all of `Z^2`.
pub const PLANE_RADIUS: usize = 1 << 40;

impl Domain {
    pub fn torus(m: usize) -> Self {
        assert!(m >= 2, "torus side must be at least 2");
        Domain::Torus { m }
    }

    pub fn window(radius: usize) -> Self {
        Domain::Window { radius }
    }

    /// A window large enough to stand in for the whole plane (sparse use only).
    pub fn plane() -> Self {
        Domain::Window {
            radius: PLANE_RADIUS,
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, Domain::Torus { .. })
    }

    /// Side length of the dense storage box.
    pub fn side(&self) -> usize {
        match *self {
            Domain::Torus { m } => m,
            Domain::Window { radius } => 2 * radius + 1,
        }
    }

    /// Length of dense storage.
    pub fn storage_len(&self) -> usize {
        self.side() * self.side()
    }

    /// Number of lattice sites in the domain.
    pub fn site_count(&self) -> usize {
        match *self {
            Domain::Torus { m } => m * m,
            Domain::Window { radius } => 2 * radius * radius + 2 * radius + 1,
        }
    }

    pub fn contains(&self, i: i64, j: i64) -> bool {
        match *self {
            Domain::Torus { .. } => true,
            Domain::Window { radius } => i.unsigned_abs() + j.unsigned_abs() <= radius as u64,
        }
    }

    /// Canonical coordinates: reduced mod `m` on tori, unchanged on windows.
    pub fn normalize(&self, i: i64, j: i64) -> (i64, i64) {
        match *self {
            Domain::Torus { m } => {
                let m = m as i64;
                (i.rem_euclid(m), j.rem_euclid(m))
            }
            Domain::Window { .. } => (i, j),
        }
    }

    /// Storage index of a site, or `None` outside a window.
    #[inline]
    pub fn index(&self, i: i64, j: i64) -> Option<usize> {
        match *self {
            Domain::Torus { m } => {
                let mi = m as i64;
                Some(i.rem_euclid(mi) as usize * m + j.rem_euclid(mi) as usize)
            }
            Domain::Window { radius } => {
                if i.unsigned_abs() + j.unsigned_abs() > radius as u64 {
                    return None;
                }
                let r = radius as i64;
                let side = 2 * r + 1;
                Some(((i + r) * side + (j + r)) as usize)
            }
        }
    }

    /// Coordinates of a storage index.
    #[inline]
    pub fn coords(&self, idx: usize) -> (i64, i64) {
        let side = self.side();
        let (a, b) = ((idx / side) as i64, (idx % side) as i64);
        match *self {
            Domain::Torus { .. } => (a, b),
            Domain::Window { radius } => (a - radius as i64, b - radius as i64),
        }
    }

    /// All sites in storage order.
    pub fn sites(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        let d = *self;
        (0..self.storage_len())
            .map(move |idx| d.coords(idx))
            .filter(move |&(i, j)| d.contains(i, j))
    }

    /// Lattice distance: l1 on windows, quotient l1 on tori.
    pub fn distance(&self, a: (i64, i64), b: (i64, i64)) -> u64 {
        match *self {
            Domain::Torus { m } => {
                let m = m as i64;
                let di = (a.0 - b.0).rem_euclid(m);
                let dj = (a.1 - b.1).rem_euclid(m);
                (di.min(m - di) + dj.min(m - dj)) as u64
            }
            Domain::Window { .. } => (a.0 - b.0).unsigned_abs() + (a.1 - b.1).unsigned_abs(),
        }
    }

    /// Representative of `x - base` with the smallest l1 norm (the lift of a
    /// torus difference to `Z^2`). On windows this is just the difference.
    pub fn lift_difference(&self, x: (i64, i64), base: (i64, i64)) -> (i64, i64) {
        match *self {
            Domain::Torus { m } => {
                let m = m as i64;
                let half = |d: i64| {
                    let r = d.rem_euclid(m);
                    if r > m / 2 {
                        r - m
                    } else {
                        r
                    }
                };
                (half(x.0 - base.0), half(x.1 - base.1))
            }
            Domain::Window { .. } => (x.0 - base.0, x.1 - base.1),
        }
    }
}

/// The four nearest-neighbour offsets.
pub const NEIGHBORS: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_counts() {
        let d = Domain::window(3);
        assert_eq!(d.sites().count(), d.site_count());
        assert_eq!(d.site_count(), 25);
        for (idx, _) in (0..d.storage_len()).enumerate() {
            let (i, j) = d.coords(idx);
            if d.contains(i, j) {
                assert_eq!(d.index(i, j), Some(idx));
            }
        }
    }

    #[test]
    fn torus_distance_wraps() {
        let d = Domain::torus(8);
        assert_eq!(d.distance((0, 0), (7, 7)), 2);
        assert_eq!(d.distance((1, 2), (5, 2)), 4);
        assert_eq!(d.lift_difference((7, 1), (0, 0)), (-1, 1));
    }

    #[test]
    fn sidecar_json() {
        let s = serde_json::to_string(&Domain::window(5)).unwrap();
        assert_eq!(s, r#"{"kind":"window","R":5}"#);
        let t: Domain = serde_json::from_str(r#"{"kind":"torus","m":4}"#).unwrap();
        assert_eq!(t, Domain::torus(4));
    }
}
