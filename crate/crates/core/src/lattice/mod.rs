//! Domains, fields and discrete calculus on `Z^2` windows and tori.

pub mod classes;
pub mod domain;
pub mod field;
pub mod fourier;
pub mod io;
pub mod sparse;
pub mod symmetry;

pub use classes::{c3_decomposition, class_membership, difference_kernel, is_c2, ClassLevel};
pub use domain::{Domain, NEIGHBORS, PLANE_RADIUS};
pub use field::{Axis, Field, Scalar, FFT_THRESHOLD};
pub use fourier::Fourier2;
pub use sparse::SparseIntField;
pub use symmetry::Dihedral;

/// Dense field of a sparse one convolved with a dense one: `(f * v)(x) = sum_y f(x - y) v(y)`.
pub fn convolve_sparse(f: &Field<f64>, v: &SparseIntField) -> Field<f64> {
    let d = f.domain();
    let entries: Vec<((i64, i64), i64)> = v.entries().collect();
    Field::from_fn(d, |i, j| {
        let mut s = crate::numeric::KahanSum::new();
        for &((a, b), c) in &entries {
            s.add(f.get(i - a, j - b) * c as f64);
        }
        s.value()
    })
}
