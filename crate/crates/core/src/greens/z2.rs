use super::torus::TorusLine;
use super::{GreensMeta, GreensMethod, GreensTable};
use crate::error::{Error, Result};
use crate::lattice::{Domain, Field};
use rayon::prelude::*;

/// Tolerance of the doubling test on Richardson-extrapolated values.
pub const DOUBLING_TOLERANCE: f64 = 1e-9;

/// Largest torus side tried before giving up.
const MAX_SIDE: usize = 1 << 17;

/// Estimate of `G_{Z^2}(x)` from the torus of side `m`:
/// `G_{T_m}(x) - G_{T_m}(0) - |x|^2/(4 m^2)`.
///
/// The quadratic term is the potential of the uniform background `-1/m^2` in
/// `Δ G_{T_m} = e_0 - 1/m^2`; what remains differs from `G_{Z^2}` by
/// `O(|x|^4/m^4)`.
fn torus_estimate(line: &TorusLine, g0: f64, i: i64, j: i64) -> f64 {
    let m = line.side() as f64;
    line.value(i, j) - g0 - (i * i + j * j) as f64 / (4.0 * m * m)
}

/// Richardson combination removing the `m^{-4}` term.
fn richardson(coarse: f64, fine: f64) -> f64 {
    (16.0 * fine - coarse) / 15.0
}

/// Values of `G_{Z^2}` at the given sites (first-octant representatives are
/// taken internally), with the doubling change actually observed.
pub struct Z2Values {
    pub values: Vec<f64>,
    pub sides: Vec<usize>,
    pub doubling_change: f64,
}

/// Evaluate `G_{Z^2}` at `points` by large-torus restriction with Richardson
/// extrapolation, doubling the torus until two successive extrapolations agree
/// to [`DOUBLING_TOLERANCE`].
pub fn z2_values(points: &[(i64, i64)]) -> Result<Z2Values> {
    let reach = points
        .iter()
        .map(|&(i, j)| i.unsigned_abs().max(j.unsigned_abs()) as usize)
        .max()
        .unwrap_or(0);
    let mut m = (8 * reach.max(1)).next_power_of_two().max(256);
    let octant = |&(i, j): &(i64, i64)| {
        let (a, b) = (i.abs(), j.abs());
        if a >= b {
            (a, b)
        } else {
            (b, a)
        }
    };
    let mut keys: Vec<(i64, i64)> = points.iter().map(octant).collect();
    keys.sort_unstable();
    keys.dedup();

    let level = |m: usize| -> Vec<f64> {
        let line = TorusLine::new(m);
        let g0 = line.value(0, 0);
        keys.par_iter()
            .map(|&(i, j)| torus_estimate(&line, g0, i, j))
            .collect()
    };
    let mut e1 = level(m);
    let mut e2 = level(2 * m);
    let mut sides = vec![m, 2 * m];
    loop {
        let e3 = level(4 * m);
        sides.push(4 * m);
        let (mut change, mut out) = (0.0f64, Vec::with_capacity(keys.len()));
        for k in 0..keys.len() {
            let r1 = richardson(e1[k], e2[k]);
            let r2 = richardson(e2[k], e3[k]);
            change = change.max((r2 - r1).abs());
            out.push(r2);
        }
        if change <= DOUBLING_TOLERANCE {
            let values = points
                .iter()
                .map(|p| {
                    let key = octant(p);
                    let k = keys.binary_search(&key).expect("key present");
                    if key == (0, 0) {
                        0.0
                    } else {
                        out[k]
                    }
                })
                .collect();
            return Ok(Z2Values {
                values,
                sides,
                doubling_change: change,
            });
        }
        m *= 2;
        if 4 * m > MAX_SIDE {
            return Err(Error::NonConvergence(format!(
                "G_Z2 doubling change {change:.3e} above {DOUBLING_TOLERANCE:e} at torus side {}",
                2 * m
            )));
        }
        e1 = e2;
        e2 = e3;
    }
}

/// `G_{Z^2}` on the l1 window of radius `radius`, normalized by `G(0,0) = 0`.
pub fn greens_z2(radius: usize) -> Result<GreensTable> {
    if radius < 1 {
        return Err(Error::InvalidArgument("window radius must be at least 1".into()));
    }
    let domain = Domain::window(radius);
    let sites: Vec<(i64, i64)> = domain.sites().collect();
    let z = z2_values(&sites)?;
    let mut values = Field::zeros(domain);
    for (&(i, j), &v) in sites.iter().zip(&z.values) {
        values.set(i, j, v)?;
    }
    Ok(GreensTable {
        values,
        meta: GreensMeta {
            method: GreensMethod::TorusRestriction,
            torus_sides: z.sides,
            doubling_change: Some(z.doubling_change),
        },
    })
}

/// `G_{Z^2}` on the square box `|i|, |j| <= half_side`, stored on the l1 window
/// of radius `2 * half_side` (sites outside the box are left at zero).
pub fn greens_z2_box(half_side: usize) -> Result<GreensTable> {
    let domain = Domain::window(2 * half_side);
    let h = half_side as i64;
    let sites: Vec<(i64, i64)> = (-h..=h).flat_map(|i| (-h..=h).map(move |j| (i, j))).collect();
    let z = z2_values(&sites)?;
    let mut values = Field::zeros(domain);
    for (&(i, j), &v) in sites.iter().zip(&z.values) {
        values.set(i, j, v)?;
    }
    Ok(GreensTable {
        values,
        meta: GreensMeta {
            method: GreensMethod::TorusRestriction,
            torus_sides: z.sides,
            doubling_change: Some(z.doubling_change),
        },
    })
}
