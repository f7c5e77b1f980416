use super::law::HeightDistribution;
use crate::error::{Error, Result};
use crate::greens::greens_z2_box;
use crate::lattice::{Domain, Field, NEIGHBORS};
use crate::numeric::{dist_to_int, fit_line, wrap_unit, KahanSum};
use crate::rng::stream;
use crate::sandpile::{parallel_stabilize, ParallelRun, WindowPile};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

/// `ξ = D_1^3 G_{Z^2}` (forward differences) on the square box of half-side
/// `half`, stored on the l1 window of radius `2 * half`.
pub fn xi_d1_cubed(half: usize) -> Result<Field<f64>> {
    let g = greens_z2_box(half + 3)?;
    let h = half as i64;
    let mut xi = Field::zeros(Domain::window(2 * half));
    for i in -h..=h {
        for j in -h..=h {
            let v = g.get(i + 3, j) - 3.0 * g.get(i + 2, j) + 3.0 * g.get(i + 1, j) - g.get(i, j);
            xi.set(i, j, v)?;
        }
    }
    Ok(xi)
}

/// `Σ σ(x) ξ(x)` over the pile's window, reduced to `[-1/2, 1/2)`.
pub fn pairing(pile: &WindowPile, xi: &Field<f64>) -> f64 {
    let mut s = KahanSum::new();
    for ((i, j), h) in pile.iter() {
        if h != 0 {
            s.add(h as f64 * xi.get(i, j));
        }
    }
    wrap_unit(s.value())
}

/// Grains sent out of the window by a toppling run: for each exterior site,
/// the sum of the odometer over its window neighbours.
pub fn boundary_losses(run: &ParallelRun) -> BTreeMap<(i64, i64), u64> {
    let d = run.state.domain();
    let mut lost = BTreeMap::new();
    for (i, j) in d.sites() {
        let u = run.odometer_at(i, j);
        if u == 0 {
            continue;
        }
        for (a, b) in NEIGHBORS {
            if !d.contains(i + a, j + b) {
                *lost.entry((i + a, j + b)).or_insert(0) += u;
            }
        }
    }
    lost
}

/// Pairing of the final state together with the grains parked outside the
/// window, which equals the initial pairing modulo 1.
pub fn pairing_with_losses(run: &ParallelRun, xi: &Field<f64>) -> f64 {
    let mut s = KahanSum::new();
    for ((i, j), h) in run.state.iter() {
        if h != 0 {
            s.add(h as f64 * xi.get(i, j));
        }
    }
    for ((i, j), k) in boundary_losses(run) {
        s.add(k as f64 * xi.get(i, j));
    }
    wrap_unit(s.value())
}

#[derive(Clone, Debug, Serialize)]
pub struct PairingInvariance {
    #[serde(rename = "R")]
    pub radius: usize,
    pub trials: usize,
    pub law: String,
    /// Largest `|⟨σ^∞, ξ⟩ + losses - ⟨σ, ξ⟩|` mod 1 over the trials.
    pub max_drift: f64,
    pub mean_topplings: f64,
    pub max_topplings: u64,
    /// Largest change of the bare window pairing, boundary losses ignored.
    pub max_window_drift: f64,
}

/// Stabilize `trials` random piles on a window and compare pairings with
/// `ξ = D_1^3 G` before and after.
pub fn pairing_invariance(
    radius: usize,
    trials: usize,
    law: &HeightDistribution,
    seed: u64,
) -> Result<PairingInvariance> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let xi = xi_d1_cubed(radius + 1)?;
    let sampler = law.sampler();
    let runs: Vec<(f64, f64, u64)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, t);
            let pile = WindowPile::from_fn(radius, |_, _| sampler.sample(&mut rng));
            let before = pairing(&pile, &xi);
            let run = parallel_stabilize(&pile, usize::MAX);
            let after = pairing_with_losses(&run, &xi);
            let bare = pairing(&run.state, &xi);
            let topplings: u64 = run.odometer.iter().sum();
            (dist_to_int(after - before), dist_to_int(bare - before), topplings)
        })
        .collect();
    Ok(PairingInvariance {
        radius,
        trials,
        law: law.to_string(),
        max_drift: runs.iter().map(|r| r.0).fold(0.0, f64::max),
        mean_topplings: runs.iter().map(|r| r.2 as f64).sum::<f64>() / trials as f64,
        max_topplings: runs.iter().map(|r| r.2).max().unwrap_or(0),
        max_window_drift: runs.iter().map(|r| r.1).fold(0.0, f64::max),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TailScan {
    /// Half-side of the box carrying `ξ`.
    pub half: usize,
    #[serde(rename = "R")]
    pub radii: Vec<f64>,
    /// `Σ_{0 < |ξ_x| < 1/(2R)} ξ_x^2` per `R`.
    pub sums: Vec<f64>,
    /// Number of sites in each bucket.
    pub counts: Vec<usize>,
    pub slope: f64,
    pub intercept: f64,
}

/// Small-value tail sums of `ξ = D_1^3 G` and their log-log slope in `R`.
pub fn xi_tail_scan(radii: &[f64], half: usize) -> Result<TailScan> {
    if radii.len() < 2 || radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidArgument("need at least two positive radii".into()));
    }
    let xi = xi_d1_cubed(half)?;
    let h = half as i64;
    let mut values: Vec<f64> = Vec::with_capacity((2 * half + 1).pow(2));
    for i in -h..=h {
        for j in -h..=h {
            values.push(xi.get(i, j).abs());
        }
    }
    let mut sums = Vec::with_capacity(radii.len());
    let mut counts = Vec::with_capacity(radii.len());
    for &r in radii {
        let cut = 1.0 / (2.0 * r);
        let mut s = KahanSum::new();
        let mut n = 0;
        for &v in &values {
            if v > 0.0 && v < cut {
                s.add(v * v);
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::InvalidArgument(format!(
                "no site with 0 < |ξ| < 1/(2R) for R = {r}; enlarge the window"
            )));
        }
        sums.push(s.value());
        counts.push(n);
    }
    let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = sums.iter().map(|s| s.ln()).collect();
    let fit = fit_line(&lx, &ly).ok_or_else(|| Error::NumericalGuard("degenerate tail fit".into()))?;
    Ok(TailScan {
        half,
        radii: radii.to_vec(),
        sums,
        counts,
        slope: fit.slope,
        intercept: fit.intercept,
    })
}
