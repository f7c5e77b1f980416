use crate::error::{Error, Result};
use crate::greens::greens_z2_box;
use crate::lattice::{is_c2, SparseIntField};
use crate::numeric::KahanSum;
use serde::Serialize;
use std::f64::consts::PI;

/// Agreement of successive Richardson values required of the Parseval sum.
const PARSEVAL_TOLERANCE: f64 = 1e-12;

const PARSEVAL_MAX_SIDE: usize = 1 << 12;

/// `f(ξ)` for `ξ = G_{Z^2} * v`, evaluated on the box `|i|, |j| <= M` with the
/// quadratic part of the tail restored through `‖ξ‖_2^2`.
#[derive(Clone, Debug, Serialize)]
pub struct FValue {
    #[serde(rename = "M")]
    pub radius: usize,
    pub value: f64,
    /// Bound on the neglected tail `Σ_{outside} |1 - c(ξ) - 2π^2 ξ^2|`, from
    /// `|1 - cos t - t^2/2| <= t^4/24` and `Σ ξ^4 <= (Σ ξ^2)^2`.
    pub tail_bound: f64,
    pub norm_sq: f64,
    pub box_norm_sq: f64,
    /// Largest change of the `G_{Z^2}` table under torus doubling.
    pub greens_doubling_change: f64,
}

/// `‖G_{Z^2} * v‖_2^2 = ∫ |v̂|^2 / λ^2` for `v ∈ C^2`, from Riemann sums on
/// tori of doubling side and two Richardson steps (the error expands in even
/// powers of the side).
pub fn parseval_norm_sq(v: &SparseIntField) -> Result<f64> {
    if !is_c2(v) {
        return Err(Error::InvalidArgument("v must lie in C^2".into()));
    }
    let entries: Vec<((i64, i64), i64)> = v.entries().collect();
    let riemann = |l: usize| -> f64 {
        let cos: Vec<f64> = (0..l).map(|k| (2.0 * PI * k as f64 / l as f64).cos()).collect();
        let sin: Vec<f64> = (0..l).map(|k| (2.0 * PI * k as f64 / l as f64).sin()).collect();
        let li = l as i64;
        let mut total = KahanSum::new();
        for k1 in 0..li {
            let mut row = 0.0;
            for k2 in 0..li {
                if k1 == 0 && k2 == 0 {
                    continue;
                }
                let (mut re, mut im) = (0.0, 0.0);
                for &((a, b), c) in &entries {
                    let idx = (k1 * a + k2 * b).rem_euclid(li) as usize;
                    re += c as f64 * cos[idx];
                    im -= c as f64 * sin[idx];
                }
                let lambda = 4.0 - 2.0 * cos[k1 as usize] - 2.0 * cos[k2 as usize];
                row += (re * re + im * im) / (lambda * lambda);
            }
            total.add(row);
        }
        total.value() / (l * l) as f64
    };
    let mut l = 64;
    let mut s = vec![riemann(l), riemann(2 * l), riemann(4 * l)];
    let r2 = |s: &[f64]| -> f64 {
        let n = s.len();
        let a = (4.0 * s[n - 2] - s[n - 3]) / 3.0;
        let b = (4.0 * s[n - 1] - s[n - 2]) / 3.0;
        (16.0 * b - a) / 15.0
    };
    let mut prev = r2(&s);
    loop {
        l *= 2;
        if 4 * l > PARSEVAL_MAX_SIDE {
            return Err(Error::NonConvergence(
                "Parseval sum did not settle under torus doubling".into(),
            ));
        }
        s.push(riemann(4 * l));
        let next = r2(&s);
        if (next - prev).abs() <= PARSEVAL_TOLERANCE {
            return Ok(next);
        }
        prev = next;
    }
}

/// `G_{Z^2}` on a square box, reused across evaluations of `f`.
pub(crate) struct FEvaluator {
    radius: usize,
    half: i64,
    table: Vec<f64>,
    doubling_change: f64,
}

impl FEvaluator {
    /// Tables for `f` on the box of half-side `radius`, for `v` supported in
    /// `|i|, |j| <= reach`.
    pub(crate) fn new(radius: usize, reach: usize) -> Result<Self> {
        let half = radius + reach;
        let g = greens_z2_box(half)?;
        let h = half as i64;
        let side = 2 * half + 1;
        let mut table = vec![0.0; side * side];
        for i in -h..=h {
            for j in -h..=h {
                table[((i + h) as usize) * side + (j + h) as usize] = g.get(i, j);
            }
        }
        Ok(FEvaluator {
            radius,
            half: h,
            table,
            doubling_change: g.meta.doubling_change.unwrap_or(0.0),
        })
    }

    fn g(&self, i: i64, j: i64) -> f64 {
        let side = (2 * self.half + 1) as usize;
        self.table[((i + self.half) as usize) * side + (j + self.half) as usize]
    }

    pub(crate) fn xi(&self, entries: &[((i64, i64), i64)], i: i64, j: i64) -> f64 {
        let mut s = 0.0;
        for &((a, b), c) in entries {
            s += c as f64 * self.g(i - a, j - b);
        }
        s
    }

    pub(crate) fn evaluate(&self, v: &SparseIntField) -> Result<FValue> {
        if !is_c2(v) {
            return Err(Error::InvalidArgument("v must lie in C^2".into()));
        }
        let entries: Vec<((i64, i64), i64)> = v.lifted_entries();
        let reach = entries
            .iter()
            .map(|&((a, b), _)| a.abs().max(b.abs()))
            .max()
            .unwrap_or(0);
        let m = self.radius as i64;
        if m + reach > self.half {
            return Err(Error::InvalidArgument("support reaches beyond the table".into()));
        }
        let norm_sq = parseval_norm_sq(v)?;
        let two_pi_sq = 2.0 * PI * PI;
        let mut core = KahanSum::new();
        let mut box_norm = KahanSum::new();
        for i in -m..=m {
            for j in -m..=m {
                let x = self.xi(&entries, i, j);
                core.add(1.0 - (2.0 * PI * x).cos() - two_pi_sq * x * x);
                box_norm.add(x * x);
            }
        }
        let box_norm_sq = box_norm.value();
        let outside = (norm_sq - box_norm_sq).max(0.0);
        Ok(FValue {
            radius: self.radius,
            value: core.value() + two_pi_sq * norm_sq,
            tail_bound: 2.0 * PI.powi(4) / 3.0 * outside * outside,
            norm_sq,
            box_norm_sq,
            greens_doubling_change: self.doubling_change,
        })
    }
}

/// `f(G_{Z^2} * v)` on the box of half-side `radius` with the tail handled
/// through the Parseval norm.
pub fn f_functional(v: &SparseIntField, radius: usize) -> Result<FValue> {
    if radius < 4 {
        return Err(Error::InvalidArgument("radius must be at least 4".into()));
    }
    let reach = v
        .lifted_entries()
        .iter()
        .map(|&((a, b), _)| a.unsigned_abs().max(b.unsigned_abs()) as usize)
        .max()
        .unwrap_or(0);
    FEvaluator::new(radius, reach)?.evaluate(v)
}
