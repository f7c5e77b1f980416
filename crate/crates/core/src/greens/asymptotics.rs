use super::GreensTable;
use crate::error::{Error, Result};
use crate::lattice::Domain;
use crate::numeric::loglog_slope;
use serde::Serialize;
use std::f64::consts::PI;

/// Fitted expansion `G(x) = -log|x|/2π - a - b (8 x1^2 x2^2/|x|^4 - 1)/|x|^2 + ...`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AsymptoticFit {
    pub a: f64,
    pub b: f64,
    /// Log-log slope of the maximal residual over sub-annuli of the fit annulus.
    pub residual_exponent: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
}

fn angular(i: i64, j: i64) -> (f64, f64) {
    let (x, y) = (i as f64, j as f64);
    let r2 = x * x + y * y;
    let r = r2.sqrt();
    (r, (8.0 * x * x * y * y / (r2 * r2) - 1.0) / r2)
}

/// Fit over the annulus `M/4 <= |x| <= M/2` of a `Z^2` window table of radius `M >= 64`.
pub fn fit_asymptotics(table: &GreensTable) -> Result<AsymptoticFit> {
    let radius = match table.domain() {
        Domain::Window { radius } => radius,
        Domain::Torus { .. } => {
            return Err(Error::InvalidArgument("asymptotic fit needs a Z^2 table".into()))
        }
    };
    if radius < 64 {
        return Err(Error::InvalidArgument("asymptotic fit needs window radius >= 64".into()));
    }
    let m = radius as f64;
    fit_asymptotics_on(table, m / 4.0, m / 2.0)
}

/// Least-squares fit on the annulus `r_min <= |x| <= r_max`.
pub fn fit_asymptotics_on(table: &GreensTable, r_min: f64, r_max: f64) -> Result<AsymptoticFit> {
    let mut rows: Vec<(f64, f64, f64)> = Vec::new(); // (r, h, y)
    for ((i, j), g) in table.values.iter() {
        let (r, h) = if (i, j) == (0, 0) { continue } else { angular(i, j) };
        if r >= r_min && r <= r_max {
            rows.push((r, h, g + r.ln() / (2.0 * PI)));
        }
    }
    if rows.len() < 16 {
        return Err(Error::InvalidArgument("fit annulus has too few sites".into()));
    }
    // y = -a - b h: normal equations in (a, b).
    let n = rows.len() as f64;
    let (sh, shh, sy, shy) = rows.iter().fold((0.0, 0.0, 0.0, 0.0), |acc, &(_, h, y)| {
        (acc.0 + h, acc.1 + h * h, acc.2 + y, acc.3 + h * y)
    });
    let det = n * shh - sh * sh;
    if det.abs() <= 1e-12 * n * shh.max(1e-300) {
        return Err(Error::NumericalGuard("ill-conditioned asymptotic fit".into()));
    }
    let a = -(shh * sy - sh * shy) / det;
    let b = -(n * shy - sh * sy) / det;

    let edges: Vec<f64> = (0..=4)
        .map(|k| r_min * (r_max / r_min).powf(k as f64 / 4.0))
        .collect();
    let mut mids = Vec::new();
    let mut maxima = Vec::new();
    for k in 0..4 {
        let worst = rows
            .iter()
            .filter(|&&(r, _, _)| r >= edges[k] && r < edges[k + 1])
            .map(|&(_, h, y)| (y + a + b * h).abs())
            .fold(0.0, f64::max);
        if worst > 0.0 {
            mids.push((edges[k] * edges[k + 1]).sqrt());
            maxima.push(worst);
        }
    }
    let residual_exponent = loglog_slope(&mids, &maxima)
        .ok_or_else(|| Error::NumericalGuard("residual exponent undefined".into()))?;
    Ok(AsymptoticFit {
        a,
        b,
        residual_exponent,
        r_min,
        r_max,
        points: rows.len(),
    })
}

/// The explicit bound `|G(x) + log|x|/2π + shift| <= C |x|^{-2}` checked on `1 <= |x| <= r_max`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LogBoundCheck {
    pub constant: f64,
    pub shift: f64,
    /// `max |x|^2 |G(x) + log|x|/2π + shift|`.
    pub max_scaled: f64,
    pub argmax: (i64, i64),
    pub holds: bool,
}

/// Constant in the explicit error bound for the logarithmic expansion.
pub const LOG_BOUND_CONSTANT: f64 = 0.01721;

pub fn log_bound_check(table: &GreensTable, shift: f64, r_max: f64) -> LogBoundCheck {
    let mut best = (0.0f64, (0, 0));
    for ((i, j), g) in table.values.iter() {
        if (i, j) == (0, 0) {
            continue;
        }
        let r2 = (i * i + j * j) as f64;
        let r = r2.sqrt();
        if r > r_max {
            continue;
        }
        let s = r2 * (g + r.ln() / (2.0 * PI) + shift).abs();
        if s > best.0 {
            best = (s, (i, j));
        }
    }
    LogBoundCheck {
        constant: LOG_BOUND_CONSTANT,
        shift,
        max_scaled: best.0,
        argmax: best.1,
        holds: best.0 <= LOG_BOUND_CONSTANT,
    }
}
