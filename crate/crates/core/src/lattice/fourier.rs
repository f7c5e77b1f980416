//! Two-dimensional discrete Fourier transforms on `m x m` tori.
//!
//! Convention: the forward transform is `F(k) = sum_x f(x) e(-k.x/m)` and the
//! inverse carries the `1/m^2` factor.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// A cached pair of 1-D plans for one side length.
pub struct Fourier2 {
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fourier2 {
    pub fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fourier2 {
            m,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        }
    }

    pub fn side(&self) -> usize {
        self.m
    }

    fn apply(&self, data: &mut [Complex64], inverse: bool) {
        let m = self.m;
        assert_eq!(data.len(), m * m, "transform buffer has wrong length");
        let plan = if inverse { &self.inverse } else { &self.forward };
        plan.process(data);
        transpose(data, m);
        plan.process(data);
        transpose(data, m);
        if inverse {
            let s = 1.0 / (m * m) as f64;
            for z in data.iter_mut() {
                *z *= s;
            }
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, false);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(data, true);
    }
}

fn transpose(data: &mut [Complex64], m: usize) {
    for i in 0..m {
        for j in i + 1..m {
            data.swap(i * m + j, j * m + i);
        }
    }
}

/// Symbol of the Laplacian at frequency `(k1, k2)`: `4 - 2cos(2 pi k1/m) - 2cos(2 pi k2/m)`.
pub fn laplacian_symbol(m: usize) -> Vec<f64> {
    let cs: Vec<f64> = (0..m)
        .map(|k| (2.0 * std::f64::consts::PI * k as f64 / m as f64).cos())
        .collect();
    let mut out = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..m {
            out[a * m + b] = 4.0 - 2.0 * cs[a] - 2.0 * cs[b];
        }
    }
    out
}
