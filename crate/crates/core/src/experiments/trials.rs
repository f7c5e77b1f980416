use super::law::HeightDistribution;
use super::pairing::{boundary_losses, pairing, pairing_with_losses, xi_d1_cubed};
use crate::error::{Error, Result};
use crate::lattice::Field;
use crate::numeric::{dist_to_int, e, fit_line, ComplexSum, KahanSum};
use crate::rng::stream;
use crate::sandpile::{parallel_topple, WindowPile};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CharMode {
    /// `Π_x E[e(-ξ_x σ_0)]` over the listed sites.
    Product,
    /// Average of `e(-⟨σ, ξ⟩)` over i.i.d. samples, one stream per trial.
    MonteCarlo { trials: usize, seed: u64 },
}

/// `χ(σ; ξ) = E[e(-⟨σ, ξ⟩)]` for i.i.d. heights with law `dist` on the sites
/// carrying the values `xi`.
pub fn characteristic_function(dist: &HeightDistribution, xi: &[f64], mode: CharMode) -> Result<Complex64> {
    match mode {
        CharMode::Product => {
            let mut factors: Vec<Complex64> = xi.iter().map(|&x| dist.characteristic(x)).collect();
            // a fixed multiplication order makes the product independent of
            // the traversal order of the sites
            factors.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
            Ok(factors.into_iter().fold(Complex64::new(1.0, 0.0), |acc, z| acc * z))
        }
        CharMode::MonteCarlo { trials, seed } => {
            if trials == 0 {
                return Err(Error::InvalidArgument("trials must be positive".into()));
            }
            let sampler = dist.sampler();
            let draws: Vec<Complex64> = (0..trials as u64)
                .into_par_iter()
                .map(|t| {
                    let mut rng = stream(seed, t);
                    let mut s = KahanSum::new();
                    for &x in xi {
                        s.add(x * sampler.sample(&mut rng) as f64);
                    }
                    e(-s.value())
                })
                .collect();
            let mut total = ComplexSum::new();
            for z in draws {
                total.add(z);
            }
            Ok(total.value() / trials as f64)
        }
    }
}

/// Values of `ξ = D_1^3 G` on the l1 window of radius `radius`, in storage order.
pub fn xi_window_values(radius: usize) -> Result<Vec<f64>> {
    let xi = xi_d1_cubed(radius)?;
    let r = radius as i64;
    Ok(xi
        .iter()
        .filter(|&((i, j), _)| i.abs() + j.abs() <= r)
        .map(|(_, v)| v)
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct IidTrial {
    #[serde(rename = "R")]
    pub radius: usize,
    pub stabilized: bool,
    pub steps: usize,
    pub topplings: u64,
    /// Heights summed over the window before and after, and grains lost.
    pub initial_total: u64,
    pub final_total: u64,
    pub lost: u64,
    pub area: usize,
    pub initial_density: f64,
    pub final_density: f64,
    /// `mean(σ) - mean(σ^n) - lost/area`, zero when grains are accounted for.
    pub density_drift: f64,
    /// Pairing with `D_1^3 G` before against after plus losses, mod 1.
    pub invariant_drift: f64,
    /// Unstable sites when the run stopped.
    pub final_activity: u64,
    /// Regression slope of the number of toppling sites over the last quarter
    /// of the steps.
    pub activity_slope: f64,
    /// Cap reached with activity still present and not declining.
    pub activity_persists: bool,
}

/// Slope of the activity over the last quarter of a run.
fn tail_slope(activity: &[u64]) -> f64 {
    let n = activity.len();
    let start = n - n / 4;
    if n - start < 2 {
        return 0.0;
    }
    let xs: Vec<f64> = (start..n).map(|k| k as f64).collect();
    let ys: Vec<f64> = activity[start..].iter().map(|&a| a as f64).collect();
    fit_line(&xs, &ys).map_or(0.0, |f| f.slope)
}

/// Sample i.i.d. heights on a window and topple in parallel until stable or
/// `max_steps` steps, with absorbing boundary.
pub fn iid_trial(dist: &HeightDistribution, radius: usize, max_steps: usize, seed: u64, index: u64) -> Result<IidTrial> {
    let xi = xi_d1_cubed(radius + 1)?;
    iid_trial_with(dist, radius, max_steps, seed, index, &xi)
}

pub(crate) fn iid_trial_with(
    dist: &HeightDistribution,
    radius: usize,
    max_steps: usize,
    seed: u64,
    index: u64,
    xi: &Field<f64>,
) -> Result<IidTrial> {
    let sampler = dist.sampler();
    let mut rng = stream(seed, index);
    let pile = WindowPile::from_fn(radius, |_, _| sampler.sample(&mut rng));
    let run = parallel_topple(&pile, max_steps);
    let lost: u64 = boundary_losses(&run).values().sum();
    let area = pile.domain().site_count();
    let (initial_total, final_total) = (pile.total(), run.state.total());
    if initial_total != final_total + lost {
        return Err(Error::NumericalGuard("grain count not conserved".into()));
    }
    let a = area as f64;
    let final_activity = run.state.iter().filter(|&(_, h)| h >= 4).count() as u64;
    let activity_slope = tail_slope(&run.activity);
    Ok(IidTrial {
        radius,
        stabilized: run.stable,
        steps: run.steps,
        topplings: run.odometer.iter().sum(),
        initial_total,
        final_total,
        lost,
        area,
        initial_density: initial_total as f64 / a,
        final_density: final_total as f64 / a,
        density_drift: (initial_total as f64 - final_total as f64 - lost as f64) / a,
        invariant_drift: dist_to_int(pairing_with_losses(&run, xi) - pairing(&pile, xi)),
        final_activity,
        activity_slope,
        activity_persists: !run.stable && final_activity > 0 && activity_slope >= 0.0,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct IidSummary {
    pub law: String,
    pub mean: f64,
    #[serde(rename = "R")]
    pub radius: usize,
    pub max_steps: usize,
    pub seed: u64,
    pub trials: Vec<IidTrial>,
    pub stabilized: usize,
    pub cap_reached: usize,
    pub persistent: usize,
    pub max_invariant_drift: f64,
}

/// `trials` independent runs of [`iid_trial`], trial `k` on stream `k`.
pub fn iid_trials(dist: &HeightDistribution, radius: usize, max_steps: usize, trials: usize, seed: u64) -> Result<IidSummary> {
    let xi = xi_d1_cubed(radius + 1)?;
    let runs = (0..trials as u64)
        .into_par_iter()
        .map(|k| iid_trial_with(dist, radius, max_steps, seed, k, &xi))
        .collect::<Result<Vec<_>>>()?;
    let stabilized = runs.iter().filter(|t| t.stabilized).count();
    Ok(IidSummary {
        law: dist.to_string(),
        mean: dist.mean(),
        radius,
        max_steps,
        seed,
        stabilized,
        cap_reached: trials - stabilized,
        persistent: runs.iter().filter(|t| t.activity_persists).count(),
        max_invariant_drift: runs.iter().map(|t| t.invariant_drift).fold(0.0, f64::max),
        trials: runs,
    })
}
