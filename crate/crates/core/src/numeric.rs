//! Small numerical helpers: compensated sums, reduction mod 1, regression.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Neumaier's variant of Kahan summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = KahanSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<KahanSum>().value()
}

/// Compensated sum of complex numbers (componentwise).
#[derive(Clone, Copy, Debug, Default)]
pub struct ComplexSum {
    re: KahanSum,
    im: KahanSum,
}

impl ComplexSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// `e(x) = exp(2 pi i x)`.
#[inline]
pub fn e(x: f64) -> Complex64 {
    let (s, c) = (2.0 * PI * x).sin_cos();
    Complex64::new(c, s)
}

/// `c(x) = cos(2 pi x)`.
#[inline]
pub fn c(x: f64) -> f64 {
    (2.0 * PI * x).cos()
}

/// Reduce `x` modulo 1 into `[-1/2, 1/2)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let mut y = x - x.round();
    if y >= 0.5 {
        y -= 1.0;
    } else if y < -0.5 {
        y += 1.0;
    }
    y
}

/// Distance from `x` to the nearest integer.
#[inline]
pub fn dist_to_int(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Least-squares line `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(LineFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// Slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_line(&lx, &ly).map(|f| f.slope)
}

/// Solve the symmetric positive (semi)definite system `a x = b` by Cholesky
/// with a tiny diagonal shift when needed. `a` is row-major `n x n`.
pub fn solve_spd(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let m = DMatrix::from_row_slice(n, n, a);
    let scale = m.diagonal().amax().max(1e-300);
    let mut shift = 0.0;
    for _ in 0..8 {
        let shifted = &m + DMatrix::identity(n, n) * shift;
        if let Some(ch) = shifted.cholesky() {
            return Some(ch.solve(&DVector::from_column_slice(b)).as_slice().to_vec());
        }
        shift = if shift == 0.0 { 1e-14 * scale } else { shift * 100.0 };
    }
    None
}

/// Solve a general square system `a x = b` by LU with full pivoting.
pub fn solve_dense(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let lu = DMatrix::from_row_slice(n, n, a).full_piv_lu();
    lu.solve(&DVector::from_column_slice(b)).map(|x| x.as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut s = KahanSum::new();
        s.add(1.0);
        for _ in 0..10 {
            s.add(1e-16);
        }
        s.add(-1.0);
        assert!((s.value() - 1e-15).abs() < 1e-30);
    }

    #[test]
    fn wrap_unit_range() {
        for &x in &[0.5, -0.5, 1.25, -1.75, 3.0, 0.49999] {
            let y = wrap_unit(x);
            assert!((-0.5..0.5).contains(&y), "{x} -> {y}");
            assert!(dist_to_int(x - y) < 1e-12);
        }
    }

    #[test]
    fn line_fit_exact() {
        let xs = [1.0, 2.0, 3.0];
        let ys = [3.0, 5.0, 7.0];
        let f = fit_line(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spd_solve() {
        let a = [4.0, 1.0, 1.0, 3.0];
        let x = solve_spd(&a, &[1.0, 2.0], 2).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-12);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-12);
    }
}
