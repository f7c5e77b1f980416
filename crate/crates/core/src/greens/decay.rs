use super::torus::{greens_torus, TorusLine};
use super::z2::{greens_z2_box, z2_values};
use crate::error::{Error, Result};
use crate::lattice::{Domain, Field};
use crate::numeric::{fit_line, loglog_slope, KahanSum};
use serde::Serialize;

/// `D_1^a D_2^b` of a table, as exact finite differences of the stored values.
pub fn derivative_table(values: &Field<f64>, a: usize, b: usize) -> Field<f64> {
    values.mixed_derivative(a, b)
}

#[derive(Clone, Debug, Serialize)]
pub struct AnnulusSup {
    pub r_min: f64,
    pub r_max: f64,
    /// `sup r^{a+b} |D_1^a D_2^b G|` over the annulus.
    pub scaled_sup: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub m: usize,
    pub a: usize,
    pub b: usize,
    pub annuli: Vec<AnnulusSup>,
    /// Log-log slope of the annulus sups; near zero when `r^{a+b}|D G|` is bounded.
    pub sup_slope: f64,
    pub bounded: bool,
    /// For first derivatives: `c` in `D G ≈ -c x_axis/|x|^2 + e x_axis`, the
    /// linear term absorbing the uniform background of the torus.
    pub first_derivative_constant: Option<f64>,
}

/// Decay of `D_1^a D_2^b G_{T_m}` over dyadic annuli `4 <= r <= m/4`.
pub fn derivative_decay_report(m: usize, a: usize, b: usize) -> Result<DecayReport> {
    let k = a + b;
    if !(1..=3).contains(&k) {
        return Err(Error::InvalidArgument("a + b must be 1, 2 or 3".into()));
    }
    if m < 64 {
        return Err(Error::InvalidArgument("decay report needs m >= 64".into()));
    }
    let g = greens_torus(m);
    let d = derivative_table(&g.values, a, b);
    let domain = Domain::torus(m);
    let lifted: Vec<((i64, i64), f64, f64)> = d
        .iter()
        .map(|(x, v)| {
            let y = domain.lift_difference(x, (0, 0));
            // distance from the centre of the forward-difference stencil
            let (ci, cj) = (y.0 as f64 + a as f64 / 2.0, y.1 as f64 + b as f64 / 2.0);
            (y, ci.hypot(cj), v)
        })
        .collect();

    let mut annuli = Vec::new();
    let mut lo = 4.0;
    let top = m as f64 / 4.0;
    while lo < top {
        let hi = (2.0 * lo).min(top);
        let sup = lifted
            .iter()
            .filter(|&&(_, r, _)| r >= lo && r < hi)
            .map(|&(_, r, v)| r.powi(k as i32) * v.abs())
            .fold(0.0, f64::max);
        annuli.push(AnnulusSup {
            r_min: lo,
            r_max: hi,
            scaled_sup: sup,
        });
        lo = hi;
    }
    let mids: Vec<f64> = annuli.iter().map(|s| (s.r_min * s.r_max).sqrt()).collect();
    let sups: Vec<f64> = annuli.iter().map(|s| s.scaled_sup).collect();
    let sup_slope = loglog_slope(&mids, &sups).unwrap_or(0.0);

    let first_derivative_constant = if k == 1 {
        // Least squares on (u, x) with u = x/|x|^2 and x the axis coordinate.
        let (mut suu, mut sux, mut sxx, mut suy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &((i, j), r, v) in &lifted {
            if r < 4.0 || r > top {
                continue;
            }
            let x = if a == 1 { i as f64 } else { j as f64 };
            let u = x / (r * r);
            suu += u * u;
            sux += u * x;
            sxx += x * x;
            suy += u * v;
            sxy += x * v;
        }
        let det = suu * sxx - sux * sux;
        let coef_u = (suy * sxx - sxy * sux) / det;
        Some(-coef_u)
    } else {
        None
    };
    Ok(DecayReport {
        m,
        a,
        b,
        annuli,
        sup_slope,
        bounded: sup_slope.abs() < 0.25,
        first_derivative_constant,
    })
}

/// `D_1^a D_2^b G_{T_m}(i, j)` for each side in `sides`, followed by the `Z^2` value.
pub fn derivative_convergence(
    i: i64,
    j: i64,
    a: usize,
    b: usize,
    sides: &[usize],
) -> Result<Vec<f64>> {
    let stencil = crate::lattice::difference_kernel(Domain::plane(), a, b);
    // (δ * G)(x) = sum_y δ(y) G(x - y)
    let pts: Vec<((i64, i64), i64)> = stencil
        .entries()
        .map(|((p, q), c)| ((i - p, j - q), c))
        .collect();
    let mut out = Vec::new();
    for &m in sides {
        let line = TorusLine::new(m);
        let mut s = KahanSum::new();
        for &((x, y), c) in &pts {
            s.add(c as f64 * line.value(x, y));
        }
        out.push(s.value());
    }
    let z = z2_values(&pts.iter().map(|p| p.0).collect::<Vec<_>>())?;
    let mut s = KahanSum::new();
    for (k, &(_, c)) in pts.iter().enumerate() {
        s.add(c as f64 * z.values[k]);
    }
    out.push(s.value());
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Membership {
    Member,
    NonMember,
}

#[derive(Clone, Debug, Serialize)]
pub struct LpReport {
    pub a: usize,
    pub b: usize,
    pub p: f64,
    /// Box half-sides `W` of the growing windows.
    pub radii: Vec<usize>,
    /// `sum_{|x|_inf <= W} |D_1^a D_2^b G(x)|^p`.
    pub partial_sums: Vec<f64>,
    /// Contributions of the shells `W/2 < |x|_inf <= W` (first window excluded).
    pub shell_sums: Vec<f64>,
    /// Log-log slope of the shell sums against `W`.
    pub tail_exponent: f64,
    /// Slope of the partial sums against `log W` (growth rate for divergent cases).
    pub log_growth_rate: f64,
    /// Shell sums shrink geometrically (each ratio below 3/4).
    pub cauchy: bool,
    pub verdict: Membership,
}

/// Partial `l^p` sums of `D_1^a D_2^b G_{Z^2}` over boxes of half-side 8, 16, ..., `max_radius`.
pub fn lp_membership_report(a: usize, b: usize, p: f64, max_radius: usize) -> Result<LpReport> {
    if !(1..=3).contains(&(a + b)) {
        return Err(Error::InvalidArgument("a + b must be 1, 2 or 3".into()));
    }
    if p < 1.0 {
        return Err(Error::InvalidArgument("p must be at least 1".into()));
    }
    if max_radius < 32 {
        return Err(Error::InvalidArgument("max_radius must be at least 32".into()));
    }
    let table = greens_z2_box(max_radius + a + b)?;
    let d = derivative_table(&table.values, a, b);
    let mut radii = Vec::new();
    let mut w = 8usize;
    while w <= max_radius {
        radii.push(w);
        w *= 2;
    }
    let wmax = *radii.last().unwrap() as i64;
    // Sum by shells of the sup norm, smallest window first.
    let mut shell = vec![KahanSum::new(); radii.len()];
    let mut counts = vec![0usize; radii.len()];
    for i in -wmax..=wmax {
        for j in -wmax..=wmax {
            let r = i.abs().max(j.abs()) as usize;
            let k = radii.iter().position(|&w| r <= w).expect("inside largest box");
            shell[k].add(d.get(i, j).abs().powf(p));
            counts[k] += 1;
        }
    }
    let mut partial_sums = Vec::new();
    let mut acc = KahanSum::new();
    for s in &shell {
        acc.add(s.value());
        partial_sums.push(acc.value());
    }
    let shell_sums: Vec<f64> = shell[1..].iter().map(|s| s.value()).collect();
    let shell_r: Vec<f64> = radii[1..]
        .iter()
        .zip(&counts[1..])
        .filter(|(_, &c)| c >= 16)
        .map(|(&w, _)| w as f64)
        .collect();
    let tail_exponent = loglog_slope(&shell_r, &shell_sums[shell_sums.len() - shell_r.len()..])
        .ok_or_else(|| Error::NumericalGuard("tail exponent undefined".into()))?;
    let logs: Vec<f64> = radii.iter().map(|&w| (w as f64).ln()).collect();
    let log_growth_rate = fit_line(&logs, &partial_sums).map(|f| f.slope).unwrap_or(0.0);
    let cauchy = shell_sums.windows(2).all(|w| w[1] < 0.75 * w[0]);
    let verdict = if tail_exponent < -0.5 {
        Membership::Member
    } else {
        Membership::NonMember
    };
    Ok(LpReport {
        a,
        b,
        p,
        radii,
        partial_sums,
        shell_sums,
        tail_exponent,
        log_growth_rate,
        cauchy,
        verdict,
    })
}
