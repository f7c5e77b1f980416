use super::functional::{f_functional, FEvaluator, FValue};
use super::program::{solve_program, solve_program_below, solve_restricted_from, Bounded, NLPResult};
use super::program::{ProgramKind, ProgramSpec, MAX_SUPPORT};
use crate::error::{Error, Result};
use crate::lattice::sparse::normal_form_of;
use crate::lattice::{Dihedral, Domain, SparseIntField};
use crate::spectral::delta12_entries;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeSet;
use std::f64::consts::PI;

/// Cutoff of the pipeline: a little above the gap constant.
pub const DEFAULT_THRESHOLD: f64 = 2.869;

type Site = (i64, i64);

fn l1(a: Site, b: Site) -> i64 {
    (a.0 - b.0).abs() + (a.1 - b.1).abs()
}

fn set_distance(s: &[Site], t: &[Site]) -> i64 {
    s.iter()
        .flat_map(|&a| t.iter().map(move |&b| l1(a, b)))
        .min()
        .unwrap_or(i64::MAX)
}

/// Smallest sorted image of `s` under the dihedral group, translated so that
/// its first site is the origin.
fn canonical_set(s: &[Site]) -> Vec<Site> {
    Dihedral::ALL
        .iter()
        .map(|g| {
            let mut img: Vec<Site> = s.iter().map(|&(i, j)| g.apply(i, j)).collect();
            img.sort_unstable();
            let (a, b) = img[0];
            img.iter().map(|&(i, j)| (i - a, j - b)).collect::<Vec<_>>()
        })
        .min()
        .expect("eight images")
}

#[derive(Clone, Debug, Serialize)]
pub struct SupportSurvivor {
    pub support: Vec<Site>,
    /// `P(S, 1)`.
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SupportEnumeration {
    pub threshold: f64,
    pub survivors: Vec<SupportSurvivor>,
    /// Number of supports whose program was solved.
    pub evaluated: usize,
    pub max_size: usize,
}

/// All supports `S` (up to translation and the dihedral group) with `N(S)`
/// connected and `P(S, 1) < threshold`, grown one site at a time from a
/// singleton; supersets of a rejected support are never visited since `P`
/// increases with the support.
pub fn enumerate_supports(threshold: f64) -> Result<SupportEnumeration> {
    let mut level: Vec<Vec<Site>> = vec![vec![(0, 0)]];
    let mut survivors = Vec::new();
    let mut evaluated = 0;
    while !level.is_empty() {
        if level[0].len() > MAX_SUPPORT {
            return Err(Error::NumericalGuard(format!(
                "supports below {threshold} keep growing past {MAX_SUPPORT} sites"
            )));
        }
        evaluated += level.len();
        let solved: Vec<Result<Option<f64>>> = level
            .par_iter()
            .map(|s| {
                let spec = ProgramSpec::unit(ProgramKind::P, s.clone())?;
                Ok(match solve_program_below(&spec, threshold)? {
                    Bounded::Solved(r) if r.minimum < threshold => Some(r.minimum),
                    _ => None,
                })
            })
            .collect();
        let mut next = BTreeSet::new();
        for (s, r) in level.iter().zip(solved) {
            let Some(value) = r? else { continue };
            // N(S + x) stays connected exactly when d(x, S) <= 3
            for &(i, j) in s {
                for a in -3i64..=3 {
                    for b in -(3 - a.abs())..=(3 - a.abs()) {
                        let x = (i + a, j + b);
                        if !s.contains(&x) {
                            let mut child = s.clone();
                            child.push(x);
                            next.insert(canonical_set(&child));
                        }
                    }
                }
            }
            survivors.push(SupportSurvivor {
                support: s.clone(),
                value,
            });
        }
        level = next.into_iter().collect();
    }
    let max_size = survivors.iter().map(|s| s.support.len()).max().unwrap_or(0);
    Ok(SupportEnumeration {
        threshold,
        survivors,
        evaluated,
        max_size,
    })
}

/// Unpruned count of the supports inside the l1 ball of radius `r` (up to the
/// symmetries) with `N(S)` connected and `P(S, 1) < threshold`, for checking
/// [`enumerate_supports`].
pub fn brute_force_supports(r: i64, threshold: f64, max_size: usize) -> Result<Vec<Vec<Site>>> {
    let ball: Vec<Site> = (-r..=r)
        .flat_map(|i| (-r..=r).map(move |j| (i, j)))
        .filter(|&(i, j)| i.abs() + j.abs() <= r)
        .collect();
    let mut sets = BTreeSet::new();
    let n = ball.len();
    for size in 1..=max_size {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            let s: Vec<Site> = idx.iter().map(|&k| ball[k]).collect();
            if connected(&s) {
                sets.insert(canonical_set(&s));
            }
            // next combination
            let mut k = size;
            while k > 0 && idx[k - 1] == n - size + k - 1 {
                k -= 1;
            }
            if k == 0 {
                break;
            }
            idx[k - 1] += 1;
            for l in k..size {
                idx[l] = idx[l - 1] + 1;
            }
        }
    }
    let sets: Vec<Vec<Site>> = sets.into_iter().collect();
    let keep: Vec<Result<bool>> = sets
        .par_iter()
        .map(|s| {
            let spec = ProgramSpec::unit(ProgramKind::P, s.clone())?;
            Ok(solve_program_below(&spec, threshold)?.is_below(threshold))
        })
        .collect();
    let mut out = Vec::new();
    for (s, k) in sets.into_iter().zip(keep) {
        if k? {
            out.push(s);
        }
    }
    Ok(out)
}

/// `N(S)` connected, i.e. the graph joining sites at l1 distance <= 3 is connected.
fn connected(s: &[Site]) -> bool {
    let mut seen = vec![false; s.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(k) = stack.pop() {
        for l in 0..s.len() {
            if !seen[l] && l1(s[k], s[l]) <= 3 {
                seen[l] = true;
                stack.push(l);
            }
        }
    }
    seen.into_iter().all(|x| x)
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertiesReport {
    pub distance: i64,
    pub p_s: f64,
    pub p_t: f64,
    pub p_union: f64,
    /// `|P(S ∪ T) - P(S) - P(T)|`, checked when `d(S, T) >= 3`.
    pub additivity_error: Option<f64>,
    pub additivity_ok: bool,
    /// `max(P(S), P(T)) <= P(S ∪ T)`.
    pub monotone_ok: bool,
    /// Largest `|P(gS, gv) - P(S, v)|` over the dihedral group.
    pub symmetry_deviation: f64,
    /// Distance between the `P'(S, v)` minimizers from two different starts.
    pub restricted_start_spread: f64,
}

/// Additivity, monotonicity, symmetry and uniqueness checks for the programs
/// with the constant target `v` on `S` and `T`.
pub fn program_properties_check(s: &[Site], t: &[Site], v: i64) -> Result<PropertiesReport> {
    let solve = |set: &[Site]| -> Result<NLPResult> {
        solve_program(&ProgramSpec::new(ProgramKind::P, set.to_vec(), vec![v; set.len()])?)
    };
    let p_s = solve(s)?.minimum;
    let p_t = solve(t)?.minimum;
    let mut union: Vec<Site> = s.to_vec();
    for &x in t {
        if !union.contains(&x) {
            union.push(x);
        }
    }
    let p_union = solve(&union)?.minimum;
    let distance = set_distance(s, t);
    let additivity_error = (distance >= 3).then(|| (p_union - p_s - p_t).abs());
    let mut symmetry_deviation: f64 = 0.0;
    for g in Dihedral::ALL {
        let img: Vec<Site> = s.iter().map(|&(i, j)| g.apply(i, j)).collect();
        symmetry_deviation = symmetry_deviation.max((solve(&img)?.minimum - p_s).abs());
    }
    let restricted = ProgramSpec::new(ProgramKind::PRestricted, s.to_vec(), vec![v; s.len()])?;
    let n = restricted.neighborhood.len();
    let x1 = solve_restricted_from(&restricted, &vec![0.249; n])?;
    let start2: Vec<f64> = (0..n).map(|k| 0.2 + 0.045 * ((k * 7 % 11) as f64 / 10.0)).collect();
    let x2 = solve_restricted_from(&restricted, &start2)?;
    let spread = x1.iter().zip(&x2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(PropertiesReport {
        distance,
        p_s,
        p_t,
        p_union,
        additivity_ok: additivity_error.map_or(true, |e| e <= 1e-8),
        additivity_error,
        monotone_ok: p_s <= p_union + 1e-10 && p_t <= p_union + 1e-10,
        symmetry_deviation,
        restricted_start_spread: spread,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ProgramCase {
    pub support: Vec<Site>,
    pub targets: Vec<i64>,
    /// The minimum, or the certified lower bound when it is not below the threshold.
    pub value: f64,
    pub below_threshold: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Evaluation {
    pub prevector: Vec<(Site, i64)>,
    pub f: f64,
    pub tail_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaAudit {
    pub threshold: f64,
    #[serde(rename = "M")]
    pub radius: usize,
    /// Step 1: `f(ξ*)` for `v = δ_1 * δ_2`.
    pub reference: FValue,
    pub reference_norm_error: f64,
    /// Step 2: `P({0}, 3)`.
    pub height_three: NLPResult,
    /// Step 3: `Q` on a pair, then on the plus shape.
    pub height_two_pairs: Vec<ProgramCase>,
    pub height_two_plus: Vec<ProgramCase>,
    /// Step 4.
    pub supports: SupportEnumeration,
    /// Step 5: pairs of survivors considered as disconnected supports.
    pub disconnected_pairs_checked: usize,
    pub disconnected: Vec<SeparatedBound>,
    pub evaluations: Vec<Evaluation>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaReport {
    pub gamma: f64,
    pub c0: f64,
    /// Normal form of the minimizing prevector class.
    pub minimizer: Vec<(Site, i64)>,
    pub minimizer_is_delta12: bool,
    /// Smallest `f` among the other evaluated classes, minus `gamma`.
    pub margin: f64,
    pub error_bound: f64,
    pub audit: GammaAudit,
}

fn guard(step: usize, ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::NumericalGuard(format!("step {step}: {}", msg())))
    }
}

fn case(kind: ProgramKind, support: Vec<Site>, targets: Vec<i64>, threshold: f64) -> Result<ProgramCase> {
    let spec = ProgramSpec::new(kind, support.clone(), targets.clone())?;
    let r = match solve_program_below(&spec, threshold) {
        Ok(r) => r,
        Err(Error::Infeasible(_)) => Bounded::AtLeast {
            lower_bound: f64::INFINITY,
            nodes: 0,
        },
        Err(e) => return Err(e),
    };
    Ok(ProgramCase {
        support,
        targets,
        value: r.value(),
        below_threshold: r.is_below(threshold),
    })
}

/// Sign patterns `±1` on `s` (first sign fixed) lying in `C^2`.
fn c2_patterns(s: &[Site]) -> Vec<Vec<(Site, i64)>> {
    let n = s.len();
    if n % 2 == 1 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for mask in 0u32..(1 << (n - 1)) {
        let v: Vec<(Site, i64)> = s
            .iter()
            .enumerate()
            .map(|(k, &x)| (x, if k > 0 && mask >> (k - 1) & 1 == 1 { -1 } else { 1 }))
            .collect();
        let total: i64 = v.iter().map(|p| p.1).sum();
        let mi: i64 = v.iter().map(|p| p.1 * p.0 .0).sum();
        let mj: i64 = v.iter().map(|p| p.1 * p.0 .1).sum();
        if total == 0 && mi == 0 && mj == 0 {
            out.push(v);
        }
    }
    out
}

/// Two `±1` patterns on surviving supports combining into an element of `C^2`
/// with disconnected support. `offset` is the translation of the second one,
/// or `None` when both carry zero total and any far enough offset works.
#[derive(Clone, Debug, Serialize)]
pub struct Separated {
    pub first: Vec<(Site, i64)>,
    pub second: Vec<(Site, i64)>,
    pub offset: Option<Site>,
}

/// Arrangements of two survivors with `d >= 4` between them (so that `N` is
/// disconnected) whose `±1` patterns combine into an element of `C^2`.
fn admissible_pairs(s: &[Site], t: &[Site]) -> Vec<Separated> {
    let mut out = Vec::new();
    let patterns = |set: &[Site], fix_first: bool| -> Vec<(Vec<(Site, i64)>, i64, i64, i64)> {
        let n = set.len();
        let free = if fix_first { n - 1 } else { n };
        (0u32..(1 << free))
            .map(|mask| {
                let v: Vec<(Site, i64)> = set
                    .iter()
                    .enumerate()
                    .map(|(k, &x)| {
                        let bit = if fix_first {
                            k > 0 && mask >> (k - 1) & 1 == 1
                        } else {
                            mask >> k & 1 == 1
                        };
                        (x, if bit { -1 } else { 1 })
                    })
                    .collect();
                let total = v.iter().map(|p| p.1).sum();
                let mi = v.iter().map(|p| p.1 * p.0 .0).sum();
                let mj = v.iter().map(|p| p.1 * p.0 .1).sum();
                (v, total, mi, mj)
            })
            .collect()
    };
    let ps = patterns(s, true);
    for g in Dihedral::ALL {
        let img: Vec<Site> = t.iter().map(|&(i, j)| g.apply(i, j)).collect();
        for (vs, ss, si, sj) in &ps {
            for (vt, st, ti, tj) in patterns(&img, false) {
                if ss + st != 0 {
                    continue;
                }
                let (mi, mj) = (si + ti, sj + tj);
                if st == 0 {
                    if mi == 0 && mj == 0 {
                        out.push(Separated {
                            first: vs.clone(),
                            second: vt,
                            offset: None,
                        });
                    }
                    continue;
                }
                if mi % st != 0 || mj % st != 0 {
                    continue;
                }
                let off = (-mi / st, -mj / st);
                let moved: Vec<Site> = img.iter().map(|&(i, j)| (i + off.0, j + off.1)).collect();
                if set_distance(s, &moved) >= 4 {
                    out.push(Separated {
                        first: vs.clone(),
                        second: vt,
                        offset: Some(off),
                    });
                }
            }
        }
    }
    out
}

/// Sites within sup-distance 1 of a pattern's support.
fn halo(v: &[(Site, i64)]) -> BTreeSet<Site> {
    v.iter()
        .flat_map(|&((i, j), _)| (-1..=1).flat_map(move |a| (-1..=1).map(move |b| (i + a, j + b))))
        .collect()
}

fn local_sum(ev: &FEvaluator, v: &[(Site, i64)], sites: &BTreeSet<Site>) -> f64 {
    sites
        .iter()
        .map(|&(i, j)| 1.0 - (2.0 * PI * ev.xi(v, i, j)).cos())
        .sum()
}

/// Outcome of the lower bound on a separated family.
#[derive(Clone, Debug, Serialize)]
pub struct SeparatedBound {
    pub case: Separated,
    /// Smallest local lower bound `Σ_{halos} (1 - cos 2πξ)` over scanned offsets.
    pub scanned_minimum: f64,
    /// Sup-norm radius of the scanned offsets (0 for a forced offset).
    pub scan_radius: i64,
    /// Lower bound for every offset beyond the scan.
    pub far_bound: Option<f64>,
    /// Offsets whose local bound fell below the threshold, handed to the full
    /// evaluation.
    pub unresolved: Vec<Site>,
}

/// Bound `f` from below on a separated configuration by the halo sums, which
/// omit only nonnegative terms. Far offsets use
/// `|1 - cos 2π(a + e) - (1 - cos 2πa)| <= 2π|e|` with `|ξ_B(z)| <= κ_B / dist(z, B)`,
/// `κ` measured over the table.
fn separated_bound(ev: &FEvaluator, case: &Separated, threshold: f64, table_half: i64) -> SeparatedBound {
    let shift = |v: &[(Site, i64)], o: Site| -> Vec<(Site, i64)> {
        v.iter().map(|&((i, j), c)| ((i + o.0, j + o.1), c)).collect()
    };
    let sites_a: Vec<Site> = case.first.iter().map(|p| p.0).collect();
    let sites_b: Vec<Site> = case.second.iter().map(|p| p.0).collect();
    let mut scanned_minimum = f64::INFINITY;
    let mut unresolved = Vec::new();
    let mut check = |o: Site| {
        let moved: Vec<Site> = sites_b.iter().map(|&(i, j)| (i + o.0, j + o.1)).collect();
        if set_distance(&sites_a, &moved) < 4 {
            return;
        }
        let second = shift(&case.second, o);
        let mut v = case.first.clone();
        v.extend(second.iter().cloned());
        let mut sites = halo(&case.first);
        sites.extend(halo(&second));
        let lb = local_sum(ev, &v, &sites);
        scanned_minimum = scanned_minimum.min(lb);
        if lb < threshold {
            unresolved.push(o);
        }
    };
    let Some(off) = case.offset else {
        let reach = |v: &[(Site, i64)]| v.iter().map(|&((i, j), _)| i.abs().max(j.abs())).max().unwrap_or(0);
        let (ra, rb) = (reach(&case.first), reach(&case.second));
        let kappa = |v: &[(Site, i64)]| -> f64 {
            let lim = table_half - reach(v);
            let mut k: f64 = 0.0;
            for i in -lim..=lim {
                for j in -lim..=lim {
                    let d = v.iter().map(|&((a, b), _)| (i - a).abs().max((j - b).abs())).min().unwrap_or(0);
                    if d >= 2 {
                        k = k.max(ev.xi(v, i, j).abs() * d as f64);
                    }
                }
            }
            k
        };
        let (ha, hb) = (halo(&case.first), halo(&case.second));
        let fa = local_sum(ev, &case.first, &ha);
        let fb = local_sum(ev, &case.second, &hb);
        let (ka, kb) = (kappa(&case.first), kappa(&case.second));
        let mut radius = 8;
        let far = loop {
            // halo points of one part sit at sup-distance >= rho from the other
            let rho = (radius + 1 - ra - rb - 1) as f64;
            let bound = fa + fb - 2.0 * PI * (ha.len() as f64 * kb + hb.len() as f64 * ka) / rho;
            if bound >= threshold || 2 * radius + ra + rb + 2 > table_half {
                break bound;
            }
            radius *= 2;
        };
        for i in -radius..=radius {
            for j in -radius..=radius {
                check((i, j));
            }
        }
        return SeparatedBound {
            case: case.clone(),
            scanned_minimum,
            scan_radius: radius,
            far_bound: Some(far),
            unresolved,
        };
    };
    check(off);
    SeparatedBound {
        case: case.clone(),
        scanned_minimum,
        scan_radius: 0,
        far_bound: None,
        unresolved,
    }
}

fn merge_shifted(a: &[(Site, i64)], b: &[(Site, i64)], off: Site) -> Vec<(Site, i64)> {
    let mut v: Vec<(Site, i64)> = a.to_vec();
    v.extend(b.iter().map(|&((i, j), c)| ((i + off.0, j + off.1), c)));
    v.sort_unstable();
    v
}

/// The gap constant by the five-step pipeline: evaluate `f(ξ*)`, exclude
/// heights 3 and 2 through `P` and `Q`, enumerate the supports with
/// `P(S, 1)` below the threshold, and evaluate `f` on every `C^2` prevector
/// carried by a surviving support.
pub fn compute_gamma(threshold: f64, precision: f64) -> Result<GammaReport> {
    if !(precision > 0.0) {
        return Err(Error::InvalidArgument("precision must be positive".into()));
    }
    // Step 1, with the box grown until the tail bound is well inside the precision.
    let d12 = SparseIntField::from_entries(Domain::plane(), delta12_entries())?;
    let mut radius = 32;
    let (evaluator, reference) = loop {
        let ev = FEvaluator::new(radius, 8)?;
        let r = ev.evaluate(&d12)?;
        if r.tail_bound <= 0.1 * precision || radius >= 512 {
            break (ev, r);
        }
        radius *= 2;
    };
    guard(1, reference.tail_bound <= 0.1 * precision, || {
        format!("tail bound {:.3e} above the precision", reference.tail_bound)
    })?;
    let reference_norm_error = (reference.norm_sq - 1.0 / (2.0 * PI)).abs();
    guard(1, reference_norm_error <= 1e-9, || {
        format!("‖ξ*‖² off 1/2π by {reference_norm_error:.3e}")
    })?;
    // Pruning at the threshold only certifies the minimum if the incumbent is below it.
    guard(1, reference.value + reference.tail_bound < threshold, || {
        format!(
            "f(ξ*) = {:.9} is not below the threshold {threshold}",
            reference.value
        )
    })?;

    // Step 2.
    let height_three = solve_program(&ProgramSpec::new(ProgramKind::P, vec![(0, 0)], vec![3])?)?;
    guard(2, height_three.minimum >= threshold, || {
        format!("P({{0}}, 3) = {} below the threshold", height_three.minimum)
    })?;

    // Step 3.
    let height_two_pairs = (-2..=2)
        .map(|w| case(ProgramKind::Q, vec![(0, 0), (1, 0)], vec![2, w], threshold))
        .collect::<Result<Vec<_>>>()?;
    let below: Vec<i64> = height_two_pairs
        .iter()
        .filter(|c| c.below_threshold)
        .map(|c| c.targets[1])
        .collect();
    guard(3, below.iter().all(|w| [-1, 0].contains(w)), || {
        format!("neighbour heights {below:?} of a height 2 stay below the threshold")
    })?;
    let plus = vec![(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)];
    let height_two_plus = (0u32..16)
        .into_par_iter()
        .map(|mask| {
            let mut targets = vec![2];
            targets.extend((0..4).map(|k| -((mask >> k & 1) as i64)));
            case(ProgramKind::Q, plus.clone(), targets, threshold)
        })
        .collect::<Result<Vec<_>>>()?;
    guard(3, height_two_plus.iter().all(|c| !c.below_threshold), || {
        "a height 2 with neighbours in {-1, 0} stays below the threshold".into()
    })?;

    // Step 4.
    let supports = enumerate_supports(threshold)?;

    // Step 5: disconnected supports.
    let surv = &supports.survivors;
    let mut disconnected_pairs_checked = 0;
    let mut separated = Vec::new();
    for (a, sa) in surv.iter().enumerate() {
        for sb in &surv[a..] {
            if sa.value + sb.value >= threshold {
                continue;
            }
            disconnected_pairs_checked += 1;
            separated.extend(admissible_pairs(&sa.support, &sb.support));
        }
    }
    let smallest = surv.iter().map(|s| s.value).fold(f64::INFINITY, f64::min);
    // Three components need an even total size for the heights to cancel.
    let mut triples = 0;
    for (a, sa) in surv.iter().enumerate() {
        for (b, sb) in surv.iter().enumerate().skip(a) {
            if sa.value + sb.value + smallest >= threshold {
                continue;
            }
            for sc in &surv[b..] {
                let sizes = sa.support.len() + sb.support.len() + sc.support.len();
                if sa.value + sb.value + sc.value < threshold && sizes % 2 == 0 {
                    triples += 1;
                }
            }
        }
    }
    guard(5, triples == 0 && 4.0 * smallest >= threshold, || {
        "supports with three or more components are not excluded".into()
    })?;
    let table_half = (radius + 8) as i64;
    let disconnected: Vec<SeparatedBound> = separated
        .par_iter()
        .map(|c| separated_bound(&evaluator, c, threshold, table_half))
        .collect();
    guard(5, disconnected.iter().all(|b| b.far_bound.is_none_or(|f| f >= threshold)), || {
        "far separated configurations are not bounded above the threshold".into()
    })?;

    // Step 5: evaluate every C^2 pattern on the connected survivors.
    let mut classes = BTreeSet::new();
    for s in surv {
        for v in c2_patterns(&s.support) {
            classes.insert(normal_form_of(&v, true, true));
        }
    }
    for b in &disconnected {
        for &(oi, oj) in &b.unresolved {
            let v = merge_shifted(&b.case.first, &b.case.second, (oi, oj));
            classes.insert(normal_form_of(&v, true, true));
        }
    }
    let classes: Vec<Vec<(Site, i64)>> = classes.into_iter().collect();
    let evaluations = classes
        .par_iter()
        .map(|v| {
            let field = SparseIntField::from_entries(Domain::plane(), v.clone())?;
            let reach = v.iter().map(|&((i, j), _)| i.abs().max(j.abs())).max().unwrap_or(0);
            let r = if reach <= 8 {
                evaluator.evaluate(&field)?
            } else {
                f_functional(&field, radius)?
            };
            Ok(Evaluation {
                prevector: v.clone(),
                f: r.value,
                tail_bound: r.tail_bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let nonzero: Vec<&Evaluation> = evaluations.iter().filter(|e| e.f > 1e-6).collect();
    let best = nonzero
        .iter()
        .min_by(|a, b| a.f.total_cmp(&b.f))
        .ok_or_else(|| Error::NumericalGuard("step 5: no C^2 prevector survives".into()))?;
    let gamma = best.f;
    let margin = nonzero
        .iter()
        .filter(|e| e.prevector != best.prevector)
        .map(|e| e.f - gamma)
        .fold(f64::INFINITY, f64::min);
    let minimizer = best.prevector.clone();
    let minimizer_is_delta12 = minimizer == normal_form_of(&delta12_entries(), true, true);
    let error_bound = best.tail_bound + 8.0 * PI * PI * reference.greens_doubling_change;
    Ok(GammaReport {
        gamma,
        c0: 1.0 / gamma,
        minimizer,
        minimizer_is_delta12,
        margin,
        error_bound,
        audit: GammaAudit {
            threshold,
            radius,
            reference,
            reference_norm_error,
            height_three,
            height_two_pairs,
            height_two_plus,
            supports,
            disconnected_pairs_checked,
            disconnected,
            evaluations,
        },
    })
}
