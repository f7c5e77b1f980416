use super::frequency::total_savings;
use super::search::{candidate_classes, delta12_entries, CandidateClass, Evaluator};
use crate::error::{Error, Result};
use crate::numeric::KahanSum;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct CutoffRow {
    pub n: u64,
    /// `m^2 (1 - gap)^{2N}`.
    pub lower_bound: f64,
    /// Sum over candidate classes of `m^2 · orbit · |μ̂|^{2N}` (heuristic bound).
    pub upper_proxy: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CutoffProfile {
    pub m: usize,
    #[serde(rename = "B")]
    pub b: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub gap: f64,
    pub scaled_gap: f64,
    /// `log m / gap`, where `m^2 (1 - gap)^{2N}` crosses one.
    pub n_star: f64,
    pub upper_kind: &'static str,
    pub rows: Vec<CutoffRow>,
    /// First `N` of the grid with lower bound at most one.
    pub lower_crossing: Option<u64>,
}

/// `N = round(f · log m / gap)` for each fraction `f` (floor below one, ceiling above).
pub fn cutoff_grid(m: usize, gap: f64, fractions: &[f64]) -> Vec<u64> {
    let star = (m as f64).ln() / gap;
    fractions
        .iter()
        .map(|&f| {
            let x = f * star;
            if f < 1.0 {
                x.floor() as u64
            } else {
                x.ceil() as u64
            }
        })
        .collect()
}

/// Classes whose local savings already exceed this multiple of the gap savings
/// enter the proxy through that lower bound instead of an exact value.
const PROXY_PRUNE_FACTOR: f64 = 4.0;

/// Lower bound and heuristic upper proxy for the mixing distance on `T_m`.
///
/// An empty `n_list` uses the grid `0.5, 0.6, ..., 1.5` times `N*`.
pub fn cutoff_profile(m: usize, b: usize, r: usize, n_list: &[u64]) -> Result<CutoffProfile> {
    if m <= 2 * r {
        return Err(Error::InvalidArgument("cutoff profile needs m > 2R".into()));
    }
    let classes = candidate_classes(b, r);
    cutoff_profile_classes(m, b, r, &classes, n_list)
}

pub fn cutoff_profile_classes(
    m: usize,
    b: usize,
    r: usize,
    classes: &[CandidateClass],
    n_list: &[u64],
) -> Result<CutoffProfile> {
    let ev = Evaluator::new(m, r);
    let m2 = (m * m) as f64;
    let incumbent = ev.evaluate(&delta12_entries(), f64::INFINITY).savings;
    let evals: Vec<f64> = classes
        .par_iter()
        .map(|c| ev.evaluate(&c.entries, PROXY_PRUNE_FACTOR * incumbent).savings)
        .collect();
    let best = evals
        .iter()
        .copied()
        .filter(|&s| s > 1e-9)
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::NumericalGuard("no nonzero frequency among candidates".into()));
    }
    let gap = best / m2;
    let n_star = (m as f64).ln() / gap;
    let grid: Vec<u64> = if n_list.is_empty() {
        let fr: Vec<f64> = (5..=15).map(|k| k as f64 / 10.0).collect();
        cutoff_grid(m, gap, &fr)
    } else {
        n_list.to_vec()
    };
    let rows: Vec<CutoffRow> = grid
        .iter()
        .map(|&n| {
            let pow = 2.0 * n as f64;
            let mut s = KahanSum::new();
            for (c, &sav) in classes.iter().zip(&evals) {
                if sav > 1e-9 {
                    s.add(m2 * c.orbit as f64 * (1.0 - sav / m2).max(0.0).powf(pow));
                }
            }
            CutoffRow {
                n,
                lower_bound: m2 * (1.0 - gap).powf(pow),
                upper_proxy: s.value(),
            }
        })
        .collect();
    let lower_crossing = rows.iter().find(|r| r.lower_bound <= 1.0).map(|r| r.n);
    Ok(CutoffProfile {
        m,
        b,
        r,
        gap,
        scaled_gap: best,
        n_star,
        upper_kind: "heuristic bound",
        rows,
        lower_crossing,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SeparatedAdditivity {
    pub m: usize,
    pub d: i64,
    /// `m^2 (1 - |μ̂(ξ_1)|)`.
    pub single: f64,
    /// `m^2 (1 - |μ̂(ξ_1 - ξ_2)|)`.
    pub combined: f64,
    /// `combined - 2 single` (savings units, i.e. scaled by `m^2`).
    pub error: f64,
}

/// Additivity of savings for `δ_1 * δ_2` and its translate by `(d, 0)`.
pub fn separated_additivity(m: usize, d: i64) -> Result<SeparatedAdditivity> {
    if d < 1 || 2 * d + 4 > m as i64 {
        return Err(Error::InvalidArgument("need 1 <= d and 2d + 4 <= m".into()));
    }
    let ev = Evaluator::new(m, 1);
    let v1 = delta12_entries();
    let mut pair = v1.clone();
    pair.extend(v1.iter().map(|&((i, j), c)| ((i + d, j), -c)));
    let single = total_savings(&ev.frequency_field(&v1));
    let combined = total_savings(&ev.frequency_field(&pair));
    Ok(SeparatedAdditivity {
        m,
        d,
        single,
        combined,
        error: combined - 2.0 * single,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AdditivityFit {
    pub points: Vec<SeparatedAdditivity>,
    /// Mean of `|error| d^2 / log d`.
    pub constant: f64,
    /// `max |(|error| d^2 / log d) / constant - 1|`.
    pub max_relative_deviation: f64,
}

/// Fit `|error| ≈ C log d / d^2` over the given separations.
pub fn additivity_fit(m: usize, ds: &[i64]) -> Result<AdditivityFit> {
    let points: Vec<SeparatedAdditivity> = ds
        .iter()
        .map(|&d| separated_additivity(m, d))
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = points
        .iter()
        .map(|p| p.error.abs() * (p.d * p.d) as f64 / (p.d as f64).ln())
        .collect();
    let constant = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let max_relative_deviation = ratios
        .iter()
        .map(|x| (x / constant - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(AdditivityFit {
        points,
        constant,
        max_relative_deviation,
    })
}
