#![allow(dead_code)]

use std::f64::consts::PI;

/// `G_{Z^2}(i, j)` by one-dimensional quadrature.
///
/// Summing out the second frequency exactly gives
/// `G(i, j) = -(1/π) ∫_0^π (1 - cos(iθ) t^{|j|}) / sqrt(a^2 - 4) dθ` with
/// `a = 4 - 2cos θ` and `t + 1/t = a`. The integrand is analytic on `[0, π]`,
/// so composite Simpson converges fast.
pub fn greens_z2_quadrature(i: i64, j: i64) -> f64 {
    let n = 20_000usize;
    let h = PI / n as f64;
    let f = |th: f64| -> f64 {
        let s = (th / 2.0).sin();
        // a - 2 = 4 sin^2(θ/2)
        let am2 = 4.0 * s * s;
        let a = 2.0 + am2;
        let root = (am2 * (a + 2.0)).sqrt();
        if root == 0.0 {
            // limit θ -> 0: (1 - t^j)/root -> |j|/2 and i-term vanishes
            return j.unsigned_abs() as f64 / 2.0;
        }
        let t = 2.0 / (a + root);
        let num = 1.0 - (i as f64 * th).cos() * t.powi(j.unsigned_abs() as i32);
        num / root
    };
    let mut s = f(0.0) + f(PI);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(k as f64 * h);
    }
    -(s * h / 3.0) / PI
}

/// `G_{Z^2}(n, n) = -(1/π) Σ_{k=1}^n 1/(2k - 1)`.
pub fn greens_z2_diagonal(n: u32) -> f64 {
    -(1..=n).map(|k| 1.0 / (2 * k - 1) as f64).sum::<f64>() / PI
}

/// Euler's constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Constant term of the logarithmic expansion of `G_{Z^2}`.
pub fn log_expansion_constant() -> f64 {
    (2.0 * EULER_GAMMA + 3.0 * 2f64.ln()) / (4.0 * PI)
}

/// Coefficient of the angular `|x|^{-2}` correction.
pub fn log_expansion_angular() -> f64 {
    1.0 / (24.0 * PI)
}

use num_bigint::BigInt;
use num_traits::{One, Zero};

/// Fraction-free (Bareiss) determinant of a dense integer matrix.
pub fn bareiss_det(mut a: Vec<Vec<BigInt>>) -> BigInt {
    let n = a.len();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
                a[i][j] = v;
            }
        }
        prev = a[k][k].clone();
    }
    sign * prev
}

/// Dense reduced Laplacian of `T_m` with the sink `(0,0)` removed (row-major order).
pub fn dense_reduced_laplacian(m: usize) -> Vec<Vec<BigInt>> {
    let n = m * m;
    let mut a = vec![vec![BigInt::zero(); n - 1]; n - 1];
    let mi = m as i64;
    for x in 1..n {
        let (i, j) = ((x / m) as i64, (x % m) as i64);
        a[x - 1][x - 1] += 4;
        for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let y = ((i + di).rem_euclid(mi) * mi + (j + dj).rem_euclid(mi)) as usize;
            if y != 0 {
                a[x - 1][y - 1] -= 1;
            }
        }
    }
    a
}
