use crate::lattice::fourier::Fourier2;
use crate::lattice::{Domain, Field};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// `ν^{*n}` for the simple random walk step law, on the l1 window of radius `n`.
///
/// Computed on a torus of side at least `2n + 2` (so nothing wraps) by raising
/// the transform `(cos θ1 + cos θ2)/2` to the `n`-th power. Sites of the wrong
/// parity are exactly zero.
pub fn convolution_power(n: usize) -> Field<f64> {
    let side = (2 * n + 2).next_power_of_two().max(4);
    let cos: Vec<f64> = (0..side)
        .map(|k| (2.0 * PI * k as f64 / side as f64).cos())
        .collect();
    let mut data: Vec<Complex64> = (0..side * side)
        .map(|idx| {
            let (k1, k2) = (idx / side, idx % side);
            Complex64::new(((cos[k1] + cos[k2]) / 2.0).powi(n as i32), 0.0)
        })
        .collect();
    Fourier2::new(side).inverse(&mut data);
    let torus = Domain::torus(side);
    Field::from_fn(Domain::window(n.max(1)), |i, j| {
        if (i + j - n as i64).rem_euclid(2) != 0 {
            0.0
        } else {
            let idx = torus.index(i, j).expect("torus index");
            data[idx].re.max(0.0)
        }
    })
}

/// `exp(-|x|^2/n)/(π n)`.
pub fn gaussian_main_term(n: usize, i: i64, j: i64) -> f64 {
    let nf = n as f64;
    (-((i * i + j * j) as f64) / nf).exp() / (PI * nf)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LltError {
    pub n: usize,
    /// `max_x |(ν^n + ν^{n+1})(x)/2 - exp(-|x|^2/n)/(π n)|`.
    pub max_error: f64,
    pub argmax: (i64, i64),
}

/// Uniform error of the parity-averaged local limit approximation at time `n`.
pub fn llt_error(n: usize) -> LltError {
    assert!(n >= 1, "n must be positive");
    let a = convolution_power(n);
    let b = convolution_power(n + 1);
    let mut best = (0.0f64, (0, 0));
    for (x, v) in b.iter() {
        let avg = 0.5 * (a.get(x.0, x.1) + v);
        let err = (avg - gaussian_main_term(n, x.0, x.1)).abs();
        if err > best.0 {
            best = (err, x);
        }
    }
    LltError {
        n,
        max_error: best.0,
        argmax: best.1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_powers() {
        let p = convolution_power(1);
        assert!((p.get(1, 0) - 0.25).abs() < 1e-15);
        assert_eq!(p.get(0, 0), 0.0);
        let p = convolution_power(2);
        assert!((p.get(0, 0) - 0.25).abs() < 1e-15);
        assert!((p.get(1, 1) - 0.125).abs() < 1e-15);
        assert!((p.get(2, 0) - 0.0625).abs() < 1e-15);
        assert!((p.sum() - 1.0).abs() < 1e-12);
    }
}
