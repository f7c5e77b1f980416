use super::{GreensMeta, GreensMethod, GreensTable};
use crate::lattice::fourier::{laplacian_symbol, Fourier2};
use crate::lattice::{Domain, Field, SparseIntField};
use crate::numeric::KahanSum;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Green's function of the torus `T_m`: the mean-zero solution of
/// `Δ G = e_0 - 1/m^2`, obtained by inverse transform of `1/λ(k)` with the zero
/// frequency dropped.
pub fn greens_torus(m: usize) -> GreensTable {
    assert!(m >= 2, "torus side must be at least 2");
    let sym = laplacian_symbol(m);
    let mut data: Vec<Complex64> = sym
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            if k == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(1.0 / l, 0.0)
            }
        })
        .collect();
    Fourier2::new(m).inverse(&mut data);
    let values = Field::from_values(Domain::torus(m), data.iter().map(|z| z.re).collect())
        .expect("storage length matches");
    GreensTable {
        values,
        meta: GreensMeta {
            method: GreensMethod::Dft,
            torus_sides: vec![m],
            doubling_change: None,
        },
    }
}

/// Point evaluation of `G_{T_m}` by summing out one frequency in closed form.
///
/// For fixed `k1 != 0` the sum over `k2` of `e(k2 j/m)/(a - 2cos(2 pi k2/m))`,
/// with `a = 4 - 2cos(2 pi k1/m)`, equals `m (t^j + t^{m-j}) / (sqrt(a^2-4)(1-t^m))`
/// where `t + 1/t = a`. The `k1 = 0` row is the one-dimensional torus Green's
/// function `-j(m-j)/(2m) + (m^2-1)/(12m)`. Cost is `O(m)` per point, which makes
/// very large tori usable without a full transform.
#[derive(Clone, Debug)]
pub struct TorusLine {
    m: usize,
    cos: Vec<f64>,
    t: Vec<f64>,
    inv_denom: Vec<f64>,
}

impl TorusLine {
    pub fn new(m: usize) -> Self {
        assert!(m >= 2, "torus side must be at least 2");
        let cos: Vec<f64> = (0..m)
            .map(|k| (2.0 * PI * k as f64 / m as f64).cos())
            .collect();
        let mut t = vec![0.0; m];
        let mut inv_denom = vec![0.0; m];
        for k in 1..m {
            let s2 = (PI * k as f64 / m as f64).sin().powi(2);
            // a - 2 = 4 sin^2(pi k / m); a^2 - 4 = (a - 2)(a + 2).
            let a = 2.0 + 4.0 * s2;
            let root = (4.0 * s2 * (a + 2.0)).sqrt();
            let tk = 2.0 / (a + root);
            t[k] = tk;
            inv_denom[k] = 1.0 / (root * (1.0 - tk.powi(m as i32)));
        }
        TorusLine {
            m,
            cos,
            t,
            inv_denom,
        }
    }

    pub fn side(&self) -> usize {
        self.m
    }

    pub fn value(&self, i: i64, j: i64) -> f64 {
        let m = self.m as i64;
        let i = i.rem_euclid(m) as usize;
        let j = j.rem_euclid(m) as usize;
        let mf = self.m as f64;
        let jf = j as f64;
        let mut s = KahanSum::new();
        s.add(-jf * (mf - jf) / (2.0 * mf) + (mf * mf - 1.0) / (12.0 * mf));
        let half = self.m / 2;
        for k in 1..=half {
            let tk = self.t[k];
            let w = (tk.powi(j as i32) + tk.powi((self.m - j) as i32)) * self.inv_denom[k];
            let c = self.cos[(k * i) % self.m];
            // k and m - k contribute equally; the middle term once.
            let mult = if 2 * k == self.m { 1.0 } else { 2.0 };
            s.add(mult * c * w);
        }
        s.value() / mf
    }
}

/// `(G_{T_m} * v)` for a sparse integer `v` on the torus, as a dense field.
pub fn torus_potential(g: &GreensTable, v: &SparseIntField) -> Field<f64> {
    crate::lattice::convolve_sparse(&g.values, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_evaluation_matches_transform() {
        for m in [4usize, 7, 16] {
            let g = greens_torus(m);
            let line = TorusLine::new(m);
            for i in 0..m as i64 {
                for j in 0..m as i64 {
                    let d = (g.get(i, j) - line.value(i, j)).abs();
                    assert!(d < 1e-13, "m={m} ({i},{j}) diff {d}");
                }
            }
        }
    }

    #[test]
    fn laplacian_is_delta_minus_mean() {
        let m = 8;
        let g = greens_torus(m);
        let l = g.values.laplacian();
        let inv = 1.0 / (m * m) as f64;
        assert!((l.get(0, 0) - (1.0 - inv)).abs() < 1e-12);
        assert!((l.get(3, 3) + inv).abs() < 1e-12);
        assert!(g.values.sum().abs() < 1e-12);
    }
}
