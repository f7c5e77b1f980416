use super::frequency::{set_savings, total_savings};
use crate::error::{Error, Result};
use crate::greens::greens_torus;
use crate::lattice::sparse::normal_form_of;
use crate::lattice::{Dihedral, Domain, Field, SparseIntField};
use crate::numeric::{e, ComplexSum};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Default search bounds: `‖v‖_1 <= 8`, support in the l1 ball of radius 4.
pub const DEFAULT_B: usize = 8;
pub const DEFAULT_R: usize = 4;

/// Savings below this are treated as the zero frequency.
const ZERO_SAVINGS: f64 = 1e-9;

/// Relative tolerance for ties between minimizers.
const TIE_TOLERANCE: f64 = 1e-9;

/// A prevector class up to translation, the dihedral group and sign, stored as
/// its canonical representative inside the ball.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CandidateClass {
    pub entries: Vec<((i64, i64), i64)>,
    /// Number of distinct frequencies per translate: images under the dihedral
    /// group and sign that are not translates of each other.
    pub orbit: u32,
}

impl CandidateClass {
    pub fn norm1(&self) -> i64 {
        self.entries.iter().map(|e| e.1.abs()).sum()
    }
}

fn ball_sites(r: usize) -> Vec<(i64, i64)> {
    let r = r as i64;
    let mut out = Vec::new();
    for i in -r..=r {
        for j in -(r - i.abs())..=(r - i.abs()) {
            out.push((i, j));
        }
    }
    out
}

fn multisets(n: usize, k: usize) -> Vec<Vec<u16>> {
    let mut out = Vec::new();
    let mut cur = vec![0u16; k];
    fn rec(n: usize, pos: usize, start: usize, cur: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
        if pos == cur.len() {
            out.push(cur.clone());
            return;
        }
        for s in start..n {
            cur[pos] = s as u16;
            rec(n, pos + 1, s, cur, out);
        }
    }
    rec(n, 0, 0, &mut cur, &mut out);
    out
}

fn disjoint(a: &[u16], b: &[u16]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return false,
        }
    }
    true
}

fn combine(sites: &[(i64, i64)], p: &[u16], n: &[u16]) -> Vec<((i64, i64), i64)> {
    let mut map: std::collections::BTreeMap<(i64, i64), i64> = Default::default();
    for &s in p {
        *map.entry(sites[s as usize]).or_default() += 1;
    }
    for &s in n {
        *map.entry(sites[s as usize]).or_default() -= 1;
    }
    map.into_iter().filter(|e| e.1 != 0).collect()
}

/// Bounds of a support in the rotated coordinates `u = i + j`, `w = i - j`.
#[derive(Clone, Copy)]
struct Rot {
    umin: i64,
    umax: i64,
    wmin: i64,
    wmax: i64,
}

impl Rot {
    const EMPTY: Rot = Rot {
        umin: i64::MAX,
        umax: i64::MIN,
        wmin: i64::MAX,
        wmax: i64::MIN,
    };

    fn add(self, (i, j): (i64, i64)) -> Rot {
        let (u, w) = (i + j, i - j);
        Rot {
            umin: self.umin.min(u),
            umax: self.umax.max(u),
            wmin: self.wmin.min(w),
            wmax: self.wmax.max(w),
        }
    }

    fn join(self, o: Rot) -> Rot {
        Rot {
            umin: self.umin.min(o.umin),
            umax: self.umax.max(o.umax),
            wmin: self.wmin.min(o.wmin),
            wmax: self.wmax.max(o.wmax),
        }
    }

    /// The shift `(a, b)` taking the support to its canonical position in the
    /// ball of radius `r`: smallest shift of `u`, then of `w`, with matching parity.
    fn shift(self, r: i64) -> (i64, i64) {
        let (lu, lw, hw) = (-r - self.umin, -r - self.wmin, r - self.wmax);
        let du = if hw > lw || (lw - lu).rem_euclid(2) == 0 {
            lu
        } else {
            lu + 1
        };
        let dw = if (lw - du).rem_euclid(2) == 0 { lw } else { lw + 1 };
        ((du + dw) / 2, (du - dw) / 2)
    }
}

/// Number of distinct canonical images under the dihedral group and sign, or
/// `None` unless `v` (in canonical position, sorted) is the smallest.
fn canonical_orbit(v: &[((i64, i64), i64)], r: i64) -> Option<u32> {
    const MAX: usize = 16;
    let n = v.len();
    assert!(n <= MAX, "support too large");
    let first = v[0].0;
    let mut shifts = [(0i64, 0i64); 8];
    for (k, g) in Dihedral::ALL.into_iter().enumerate() {
        let rot = v.iter().fold(Rot::EMPTY, |acc, &((i, j), _)| acc.add(g.apply(i, j)));
        let (a, b) = rot.shift(r);
        let lead = v
            .iter()
            .map(|&((i, j), _)| {
                let (x, y) = g.apply(i, j);
                (x + a, y + b)
            })
            .min()
            .expect("nonempty");
        if lead < first {
            return None;
        }
        shifts[k] = (a, b);
    }
    let mut images: Vec<[((i64, i64), i64); MAX]> = Vec::with_capacity(16);
    for (k, g) in Dihedral::ALL.into_iter().enumerate() {
        let (a, b) = shifts[k];
        for s in [1i64, -1] {
            let mut img = [((i64::MAX, i64::MAX), 0i64); MAX];
            for (slot, &((i, j), c)) in img.iter_mut().zip(v) {
                let (x, y) = g.apply(i, j);
                *slot = ((x + a, y + b), s * c);
            }
            img[..n].sort_unstable();
            if &img[..n] < v {
                return None;
            }
            if !images.contains(&img) {
                images.push(img);
            }
        }
    }
    Some(images.len() as u32)
}

struct Multiset {
    sites: Vec<u16>,
    mask: u128,
    rot: Rot,
}

/// Entries of `P - N` for disjoint multisets of sorted site indices (sites are
/// sorted by coordinates, so the merge comes out sorted).
fn merge(sites: &[(i64, i64)], p: &[u16], n: &[u16]) -> Vec<((i64, i64), i64)> {
    let mut out: Vec<((i64, i64), i64)> = Vec::with_capacity(p.len() + n.len());
    let (mut a, mut b) = (0, 0);
    while a < p.len() || b < n.len() {
        let take_p = b >= n.len() || (a < p.len() && p[a] < n[b]);
        let (idx, sign) = if take_p {
            a += 1;
            (p[a - 1], 1)
        } else {
            b += 1;
            (n[b - 1], -1)
        };
        let x = sites[idx as usize];
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 += sign,
            _ => out.push((x, sign)),
        }
    }
    out
}

/// All classes `v ∈ C^2` with `‖v‖_1 <= B` having a translate supported in the
/// l1 ball of radius `R`, one canonical representative per class.
pub fn candidate_classes(b: usize, r: usize) -> Vec<CandidateClass> {
    let sites = ball_sites(r);
    assert!(sites.len() <= 128, "ball too large for site masks");
    let ri = r as i64;
    let mut out = Vec::new();
    for k in 2..=b / 2 {
        let sets: Vec<Multiset> = multisets(sites.len(), k)
            .into_iter()
            .map(|s| Multiset {
                mask: s.iter().fold(0u128, |m, &x| m | (1u128 << x)),
                rot: s.iter().fold(Rot::EMPTY, |r, &x| r.add(sites[x as usize])),
                sites: s,
            })
            .collect();
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (idx, s) in sets.iter().enumerate() {
            let key = s.sites.iter().fold((0, 0), |acc, &x| {
                (acc.0 + sites[x as usize].0, acc.1 + sites[x as usize].1)
            });
            buckets.entry(key).or_default().push(idx);
        }
        let mut keys: Vec<&(i64, i64)> = buckets.keys().collect();
        keys.sort();
        let found: Vec<Vec<CandidateClass>> = keys
            .par_iter()
            .map(|key| {
                let members = &buckets[*key];
                let mut local = Vec::new();
                for &p in members {
                    let sp = &sets[p];
                    for &q in members {
                        let sq = &sets[q];
                        if sp.mask & sq.mask != 0 || sp.rot.join(sq.rot).shift(ri) != (0, 0) {
                            continue;
                        }
                        let v = merge(&sites, &sp.sites, &sq.sites);
                        if let Some(orbit) = canonical_orbit(&v, ri) {
                            local.push(CandidateClass { entries: v, orbit });
                        }
                    }
                }
                local
            })
            .collect();
        out.extend(found.into_iter().flatten());
    }
    out.sort_by(|a, b| a.entries.cmp(&b.entries));
    out
}

/// Savings of one candidate on `T_m`, exact unless a local lower bound already
/// exceeds `threshold` (savings are monotone in the set).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ClassEval {
    pub savings: f64,
    pub exact: bool,
}

pub(crate) struct Evaluator {
    m: usize,
    /// `G_{T_m}` in row-major order.
    g: Vec<f64>,
    /// The box of half-side `R + 2`, or all of `T_m` when that box wraps.
    local: Vec<(i64, i64)>,
}

impl Evaluator {
    pub(crate) fn new(m: usize, r: usize) -> Self {
        let h = r as i64 + 2;
        let local = if 2 * h + 1 >= m as i64 {
            Domain::torus(m).sites().collect()
        } else {
            (-h..=h).flat_map(|i| (-h..=h).map(move |j| (i, j))).collect()
        };
        let table = greens_torus(m);
        let g = Domain::torus(m)
            .sites()
            .map(|(i, j)| table.get(i, j))
            .collect();
        Evaluator { m, g, local }
    }

    #[inline]
    fn potential_at(&self, v: &[((i64, i64), i64)], i: i64, j: i64) -> f64 {
        let m = self.m as i64;
        v.iter()
            .map(|&((a, b), c)| {
                let x = (i - a).rem_euclid(m) as usize;
                let y = (j - b).rem_euclid(m) as usize;
                c as f64 * self.g[x * self.m + y]
            })
            .sum()
    }

    fn partial(&self, v: &[((i64, i64), i64)], sites: &[(i64, i64)]) -> f64 {
        let mut s = ComplexSum::new();
        for &(i, j) in sites {
            s.add(e(self.potential_at(v, i, j)));
        }
        sites.len() as f64 - s.value().norm()
    }

    /// Savings of `v`, stopping at the first of the growing sets (support and
    /// its neighbours, a box, the torus) whose savings exceed `threshold`.
    pub(crate) fn evaluate(&self, v: &[((i64, i64), i64)], threshold: f64) -> ClassEval {
        let full = self.m * self.m;
        let m = self.m as i64;
        let mut near: Vec<(i64, i64)> = Vec::with_capacity(5 * v.len());
        for &((i, j), _) in v {
            for (di, dj) in [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)] {
                near.push(((i + di).rem_euclid(m), (j + dj).rem_euclid(m)));
            }
        }
        near.sort_unstable();
        near.dedup();
        let partial = self.partial(v, &near);
        if partial > threshold {
            return ClassEval {
                savings: partial,
                exact: near.len() == full,
            };
        }
        let partial = self.partial(v, &self.local);
        if partial > threshold || self.local.len() == full {
            return ClassEval {
                savings: partial,
                exact: self.local.len() == full,
            };
        }
        ClassEval {
            savings: total_savings(&self.frequency_field(v)),
            exact: true,
        }
    }

    pub(crate) fn frequency_field(&self, v: &[((i64, i64), i64)]) -> Field<f64> {
        Field::from_fn(Domain::torus(self.m), |i, j| self.potential_at(v, i, j))
    }
}

/// Lower `‖v‖_1` by subtracting `±Δ e_x` while that helps; the frequency is unchanged.
pub fn laplacian_descent(v: &[((i64, i64), i64)]) -> Vec<((i64, i64), i64)> {
    let mut cur: BTreeMap<(i64, i64), i64> = v.iter().copied().filter(|e| e.1 != 0).collect();
    let norm = |f: &BTreeMap<(i64, i64), i64>| f.values().map(|c| c.abs()).sum::<i64>();
    let star = [(0, 0, 4), (1, 0, -1), (-1, 0, -1), (0, 1, -1), (0, -1, -1)];
    loop {
        let base = norm(&cur);
        let mut centres: Vec<(i64, i64)> = cur
            .keys()
            .flat_map(|&(i, j)| star.iter().map(move |&(di, dj, _)| (i + di, j + dj)))
            .collect();
        centres.sort_unstable();
        centres.dedup();
        let mut best: Option<(i64, BTreeMap<(i64, i64), i64>)> = None;
        for &(ci, cj) in &centres {
            for s in [1i64, -1] {
                let mut next = cur.clone();
                for &(di, dj, c) in &star {
                    let slot = next.entry((ci + di, cj + dj)).or_insert(0);
                    *slot -= s * c;
                    if *slot == 0 {
                        next.remove(&(ci + di, cj + dj));
                    }
                }
                let n = norm(&next);
                if n < base && best.as_ref().map_or(true, |b| n < b.0) {
                    best = Some((n, next));
                }
            }
        }
        match best {
            Some((_, next)) => cur = next,
            None => return cur.into_iter().collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GapSearch {
    pub m: usize,
    #[serde(rename = "B")]
    pub b: usize,
    #[serde(rename = "R")]
    pub r: usize,
    /// `min (1 - |μ̂(ξ(v))|)` over the candidates.
    pub gap: f64,
    /// `m^2 · gap`.
    pub scaled_gap: f64,
    /// Normal forms (translation, dihedral group, sign) of all minimizers.
    pub minimizers: Vec<Vec<((i64, i64), i64)>>,
    pub candidates: usize,
    pub fully_evaluated: usize,
}

/// `δ_1 * δ_2 = e_0 - e_{(-1,0)} - e_{(0,-1)} + e_{(-1,-1)}`.
pub fn delta12_entries() -> Vec<((i64, i64), i64)> {
    vec![((-1, -1), 1), ((-1, 0), -1), ((0, -1), -1), ((0, 0), 1)]
}

/// Spectral gap of the sandpile chain on `T_m` over prevectors `v ∈ C^2` with
/// `‖v‖_1 <= B` supported (up to translation) in the l1 ball of radius `R`.
///
/// When the ball does not embed in the torus (`m <= 2R`) the search runs over
/// all mean-zero `v` on `T_m` with `‖v‖_1 <= B` instead.
pub fn gap_search(m: usize, b: usize, r: usize) -> Result<GapSearch> {
    if m < 2 || b < 2 || r < 1 {
        return Err(Error::InvalidArgument("need m >= 2, B >= 2, R >= 1".into()));
    }
    if m <= 2 * r {
        return small_torus_search(m, b, r);
    }
    let classes = candidate_classes(b, r);
    gap_search_classes(m, b, r, &classes)
}

/// [`gap_search`] over a precomputed class list (reusable across `m`).
pub fn gap_search_classes(
    m: usize,
    b: usize,
    r: usize,
    classes: &[CandidateClass],
) -> Result<GapSearch> {
    if m <= 2 * r {
        return small_torus_search(m, b, r);
    }
    let ev = Evaluator::new(m, r);
    let incumbent = ev.evaluate(&delta12_entries(), f64::INFINITY).savings;
    let threshold = if incumbent > ZERO_SAVINGS {
        incumbent * (1.0 + TIE_TOLERANCE) + ZERO_SAVINGS
    } else {
        f64::INFINITY
    };
    let evals: Vec<ClassEval> = classes
        .par_iter()
        .map(|c| ev.evaluate(&c.entries, threshold))
        .collect();
    let fully = evals.iter().filter(|x| x.exact).count();
    let best = evals
        .iter()
        .filter(|x| x.exact && x.savings > ZERO_SAVINGS)
        .map(|x| x.savings)
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::NumericalGuard("no nonzero frequency among candidates".into()));
    }
    let tie = best * (1.0 + TIE_TOLERANCE) + ZERO_SAVINGS;
    let minimizers = classes
        .iter()
        .zip(&evals)
        .filter(|(_, x)| x.exact && x.savings > ZERO_SAVINGS && x.savings <= tie)
        .map(|(c, _)| normal_form_of(&laplacian_descent(&c.entries), true, true))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let m2 = (m * m) as f64;
    Ok(GapSearch {
        m,
        b,
        r,
        gap: best / m2,
        scaled_gap: best,
        minimizers,
        candidates: classes.len(),
        fully_evaluated: fully,
    })
}

/// All mean-zero `v` on a small torus with `‖v‖_1 <= B`, evaluated exactly.
fn small_torus_search(m: usize, b: usize, r: usize) -> Result<GapSearch> {
    let domain = Domain::torus(m);
    let sites: Vec<(i64, i64)> = domain.sites().collect();
    let g = greens_torus(m);
    let mut results: Vec<(f64, Vec<((i64, i64), i64)>)> = Vec::new();
    let mut count = 0;
    for k in 1..=b / 2 {
        let sets = multisets(sites.len(), k);
        let evals: Vec<Vec<(f64, Vec<((i64, i64), i64)>)>> = sets
            .par_iter()
            .enumerate()
            .map(|(pi, p)| {
                let mut local = Vec::new();
                for (qi, q) in sets.iter().enumerate() {
                    if pi == qi || !disjoint(p, q) {
                        continue;
                    }
                    let v = combine(&sites, p, q);
                    let field = Field::from_fn(domain, |i, j| {
                        v.iter()
                            .map(|&((a, bb), c)| c as f64 * g.get(i - a, j - bb))
                            .sum()
                    });
                    local.push((total_savings(&field), v));
                }
                local
            })
            .collect();
        for e in evals {
            count += e.len();
            results.extend(e);
        }
    }
    let best = results
        .iter()
        .map(|x| x.0)
        .filter(|&s| s > ZERO_SAVINGS)
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::NumericalGuard("no nonzero frequency among candidates".into()));
    }
    let tie = best * (1.0 + TIE_TOLERANCE) + ZERO_SAVINGS;
    let minimizers: Vec<Vec<((i64, i64), i64)>> = results
        .iter()
        .filter(|x| x.0 > ZERO_SAVINGS && x.0 <= tie)
        .map(|x| {
            SparseIntField::from_entries(domain, x.1.iter().copied())
                .expect("torus sites")
                .normal_form(true, true)
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let m2 = (m * m) as f64;
    Ok(GapSearch {
        m,
        b,
        r,
        gap: best / m2,
        scaled_gap: best,
        minimizers,
        candidates: count,
        fully_evaluated: count,
    })
}

/// Savings of `v` on a set, with `ξ̄ = G_{T_m} * v`; used by tests and reports.
pub fn prevector_set_savings(m: usize, v: &[((i64, i64), i64)], set: &[(i64, i64)]) -> f64 {
    let ev = Evaluator::new(m, 1);
    set_savings(&ev.frequency_field(v), set)
}
