//! The integer classes `C^0 ⊃ C^1 ⊃ C^2 ⊃ C^3`.
//!
//! `C^k` is the integer span of translates of the `k`-th difference kernels, i.e.
//! the `k`-th power of the ideal `(X - 1, Y - 1)` in the Laurent ring when a
//! function `v` is identified with `sum v(i,j) X^i Y^j`. Membership in `C^1` and
//! `C^2` is read off the total mass and first moments. Membership in `C^3` is
//! decided constructively: [`c3_decomposition`] writes `v = δ1*f + δ2*g` with
//! `f, g ∈ C^2` whenever that is possible and fails otherwise.

use super::domain::Domain;
use super::sparse::SparseIntField;
use serde::Serialize;
use std::collections::BTreeMap;

/// Highest class a finitely supported integer function belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ClassLevel {
    C0,
    C1,
    C2,
    C3,
}

impl std::fmt::Display for ClassLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ClassLevel::C0 => "C0",
            ClassLevel::C1 => "C1",
            ClassLevel::C2 => "C2",
            ClassLevel::C3 => "C3",
        };
        f.write_str(s)
    }
}

/// True when the total mass and both first moments vanish.
pub fn is_c2(v: &SparseIntField) -> bool {
    v.total() == 0 && v.first_moments() == (0, 0)
}

pub fn class_membership(v: &SparseIntField) -> ClassLevel {
    if v.total() != 0 {
        return ClassLevel::C0;
    }
    if v.first_moments() != (0, 0) {
        return ClassLevel::C1;
    }
    if c3_decomposition(v).is_some() {
        ClassLevel::C3
    } else {
        ClassLevel::C2
    }
}

type Poly = BTreeMap<(i64, i64), i64>;

fn push(p: &mut Poly, key: (i64, i64), v: i64) {
    if v == 0 {
        return;
    }
    let e = p.entry(key).or_insert(0);
    *e += v;
    if *e == 0 {
        p.remove(&key);
    }
}

/// Write `v = δ1 * f + δ2 * g` with `f, g ∈ C^2`, or return `None` when `v ∉ C^3`.
///
/// With `p(X, Y)` the polynomial of `v` (after a monomial shift), divide exactly:
/// `p = (X - 1) q + r(Y)` where `r(Y) = p(1, Y)`, then `r = (Y - 1) r1`. Since
/// `δ1 ↔ X^{-1} - 1 = -X^{-1}(X - 1)`, take `f = -X q` and `g = -Y r1`. The
/// quotients lie in the square of the ideal exactly when `p` lies in its cube,
/// so a failed `C^2` check on `f` or `g` certifies `v ∉ C^3`.
///
/// Torus inputs are handled through their lifted coordinates; the returned
/// fields live on the same domain as `v`.
pub fn c3_decomposition(v: &SparseIntField) -> Option<(SparseIntField, SparseIntField)> {
    let domain = v.domain();
    if v.is_empty() {
        return Some((SparseIntField::zero(domain), SparseIntField::zero(domain)));
    }
    if !is_c2(v) {
        return None;
    }
    let lifted = v.lifted_entries();
    let a = lifted.iter().map(|e| e.0 .0).min().unwrap();
    let b = lifted.iter().map(|e| e.0 .1).min().unwrap();

    // Rows by power of Y: row[j] = coefficients in X.
    let mut rows: BTreeMap<i64, BTreeMap<i64, i64>> = BTreeMap::new();
    for &((i, j), c) in &lifted {
        *rows.entry(j - b).or_default().entry(i - a).or_insert(0) += c;
    }

    // q_i = sum_{n > i} c_n per row; r_j = p_j(1).
    let mut f: Poly = BTreeMap::new();
    let mut r: BTreeMap<i64, i64> = BTreeMap::new();
    for (&j, row) in &rows {
        let max_i = *row.keys().next_back().unwrap();
        let mut suffix = 0i64;
        for i in (0..max_i).rev() {
            suffix += row.get(&(i + 1)).copied().unwrap_or(0);
            // f = -X q: coefficient of q at X^i moves to X^{i+1}.
            push(&mut f, (i + 1 + a, j + b), -suffix);
        }
        let total: i64 = row.values().sum();
        if total != 0 {
            r.insert(j, total);
        }
    }
    let mut g: Poly = BTreeMap::new();
    if let Some(&max_j) = r.keys().next_back() {
        let mut suffix = 0i64;
        for j in (0..max_j).rev() {
            suffix += r.get(&(j + 1)).copied().unwrap_or(0);
            push(&mut g, (a, j + 1 + b), -suffix);
        }
    }

    let to_field = |p: Poly| SparseIntField::from_entries(domain, p).ok();
    let (f, g) = (to_field(f)?, to_field(g)?);
    if !is_c2(&f) || !is_c2(&g) {
        return None;
    }
    // The division is exact; re-convolution is kept as a cheap guard.
    let d1 = SparseIntField::delta1(domain);
    let d2 = SparseIntField::delta2(domain);
    let back = d1.convolve(&f).ok()?.add(&d2.convolve(&g).ok()?).ok()?;
    if back != *v {
        return None;
    }
    Some((f, g))
}

/// The kernels `δ1^{*a} * δ2^{*b}` on a domain.
pub fn difference_kernel(domain: Domain, a: usize, b: usize) -> SparseIntField {
    let mut out = SparseIntField::delta(domain, 0, 0).expect("origin is in every domain");
    let d1 = SparseIntField::delta1(domain);
    let d2 = SparseIntField::delta2(domain);
    for _ in 0..a {
        out = out.convolve(&d1).expect("kernel fits domain");
    }
    for _ in 0..b {
        out = out.convolve(&d2).expect("kernel fits domain");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_classes() {
        let d = Domain::plane();
        assert_eq!(class_membership(&SparseIntField::delta(d, 0, 0).unwrap()), ClassLevel::C0);
        assert_eq!(class_membership(&SparseIntField::delta1(d)), ClassLevel::C1);
        assert_eq!(class_membership(&difference_kernel(d, 1, 1)), ClassLevel::C2);
        assert_eq!(class_membership(&difference_kernel(d, 2, 0)), ClassLevel::C2);
        assert_eq!(class_membership(&difference_kernel(d, 2, 1)), ClassLevel::C3);
        assert_eq!(class_membership(&difference_kernel(d, 0, 3)), ClassLevel::C3);
    }

    #[test]
    fn decomposition_reconvolves() {
        let d = Domain::plane();
        let v = difference_kernel(d, 1, 2).translate((4, -3)).unwrap();
        let (f, g) = c3_decomposition(&v).unwrap();
        let back = SparseIntField::delta1(d)
            .convolve(&f)
            .unwrap()
            .add(&SparseIntField::delta2(d).convolve(&g).unwrap())
            .unwrap();
        assert_eq!(back, v);
    }
}
