use super::domain::{Domain, NEIGHBORS};
use super::field::Field;
use super::symmetry::Dihedral;
use crate::error::{Error, Result};
use std::collections::BTreeMap;

/// A finitely supported integer function on a [`Domain`].
///
/// Entries are kept in a sorted map with no zero values; torus keys are reduced
/// mod `m`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SparseIntField {
    domain: Domain,
    entries: BTreeMap<(i64, i64), i64>,
}

impl SparseIntField {
    pub fn zero(domain: Domain) -> Self {
        SparseIntField {
            domain,
            entries: BTreeMap::new(),
        }
    }

    /// Sum the given `(site, value)` pairs; duplicate sites accumulate.
    pub fn from_entries<I>(domain: Domain, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((i64, i64), i64)>,
    {
        let mut out = Self::zero(domain);
        for ((i, j), v) in entries {
            out.add_at(i, j, v)?;
        }
        Ok(out)
    }

    /// Point mass `e_(i,j)`.
    pub fn delta(domain: Domain, i: i64, j: i64) -> Result<Self> {
        Self::from_entries(domain, [((i, j), 1)])
    }

    /// `delta_1 = -e_0 + e_(-1,0)`: convolution with it is `D_1`.
    pub fn delta1(domain: Domain) -> Self {
        Self::from_entries(domain, [((0, 0), -1), ((-1, 0), 1)]).expect("fits every domain")
    }

    /// `delta_2 = -e_0 + e_(0,-1)`.
    pub fn delta2(domain: Domain) -> Self {
        Self::from_entries(domain, [((0, 0), -1), ((0, -1), 1)]).expect("fits every domain")
    }

    pub fn add_at(&mut self, i: i64, j: i64, v: i64) -> Result<()> {
        if !self.domain.contains(i, j) {
            return Err(Error::InvalidArgument(format!(
                "site ({i},{j}) outside {}",
                self.domain
            )));
        }
        if v == 0 {
            return Ok(());
        }
        let key = self.domain.normalize(i, j);
        let e = self.entries.entry(key).or_insert(0);
        *e += v;
        if *e == 0 {
            self.entries.remove(&key);
        }
        Ok(())
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn get(&self, i: i64, j: i64) -> i64 {
        let key = self.domain.normalize(i, j);
        self.entries.get(&key).copied().unwrap_or(0)
    }

    pub fn entries(&self) -> impl Iterator<Item = ((i64, i64), i64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn support(&self) -> Vec<(i64, i64)> {
        self.entries.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm1(&self) -> i64 {
        self.entries.values().map(|v| v.abs()).sum()
    }

    pub fn norm_inf(&self) -> i64 {
        self.entries.values().map(|v| v.abs()).max().unwrap_or(0)
    }

    pub fn total(&self) -> i64 {
        self.entries.values().sum()
    }

    /// Re-home onto another domain (coordinates are kept, then normalized).
    pub fn with_domain(&self, domain: Domain) -> Result<Self> {
        Self::from_entries(domain, self.entries())
    }

    /// Coordinates lifted to `Z^2`: on a torus, each site is replaced by the
    /// representative closest to the first support point.
    pub fn lifted_entries(&self) -> Vec<((i64, i64), i64)> {
        let Some(&base) = self.entries.keys().next() else {
            return Vec::new();
        };
        self.entries
            .iter()
            .map(|(&x, &v)| {
                let d = self.domain.lift_difference(x, base);
                ((base.0 + d.0, base.1 + d.1), v)
            })
            .collect()
    }

    /// First moments `(sum v(x) x_1, sum v(x) x_2)` of the lifted function.
    pub fn first_moments(&self) -> (i128, i128) {
        let mut m = (0i128, 0i128);
        for ((i, j), v) in self.lifted_entries() {
            m.0 += v as i128 * i as i128;
            m.1 += v as i128 * j as i128;
        }
        m
    }

    /// Second moments `(sum v x_1^2, sum v x_1 x_2, sum v x_2^2)` of the lifted function.
    pub fn second_moments(&self) -> (i128, i128, i128) {
        let mut m = (0i128, 0i128, 0i128);
        for ((i, j), v) in self.lifted_entries() {
            let (i, j, v) = (i as i128, j as i128, v as i128);
            m.0 += v * i * i;
            m.1 += v * i * j;
            m.2 += v * j * j;
        }
        m
    }

    pub fn neg(&self) -> Self {
        SparseIntField {
            domain: self.domain,
            entries: self.entries.iter().map(|(&k, &v)| (k, -v)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = self.clone();
        for ((i, j), v) in other.entries() {
            out.add_at(i, j, v)?;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn scale(&self, k: i64) -> Self {
        if k == 0 {
            return Self::zero(self.domain);
        }
        SparseIntField {
            domain: self.domain,
            entries: self.entries.iter().map(|(&x, &v)| (x, v * k)).collect(),
        }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.domain != other.domain {
            return Err(Error::DomainMismatch(
                self.domain.to_string(),
                other.domain.to_string(),
            ));
        }
        Ok(())
    }

    /// Translate: `(T_a v)(x) = v(x - a)`.
    pub fn translate(&self, a: (i64, i64)) -> Result<Self> {
        Self::from_entries(
            self.domain,
            self.entries().map(|((i, j), v)| ((i + a.0, j + a.1), v)),
        )
    }

    /// Convolution of two sparse fields.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = Self::zero(self.domain);
        for ((i, j), v) in self.entries() {
            for ((k, l), w) in other.entries() {
                out.add_at(i + k, j + l, v * w)?;
            }
        }
        Ok(out)
    }

    /// Integer Laplacian; on windows the result must stay inside the window.
    pub fn laplacian(&self) -> Result<Self> {
        let mut out = Self::zero(self.domain);
        for ((i, j), v) in self.entries() {
            out.add_at(i, j, 4 * v)?;
            for (di, dj) in NEIGHBORS {
                out.add_at(i + di, j + dj, -v)?;
            }
        }
        Ok(out)
    }

    /// Apply a lattice symmetry about the origin (windows and tori).
    pub fn transform(&self, g: Dihedral) -> Result<Self> {
        Self::from_entries(
            self.domain,
            self.entries().map(|((i, j), v)| (g.apply(i, j), v)),
        )
    }

    /// Dense real-valued copy.
    pub fn to_field(&self) -> Result<Field<f64>> {
        let mut f = Field::zeros(self.domain);
        if self.domain.storage_len() > 1 << 28 {
            return Err(Error::InvalidArgument(
                "domain too large for dense storage".into(),
            ));
        }
        for ((i, j), v) in self.entries() {
            f.set(i, j, v as f64)?;
        }
        Ok(f)
    }

    /// Normal form up to translation (and optionally the dihedral group and
    /// sign): the lexicographically smallest sorted entry list after moving the
    /// smallest support point to the origin. Uses lifted coordinates.
    pub fn normal_form(&self, dihedral: bool, sign: bool) -> Vec<((i64, i64), i64)> {
        let lifted = self.lifted_entries();
        normal_form_of(&lifted, dihedral, sign)
    }
}

/// See [`SparseIntField::normal_form`].
pub fn normal_form_of(
    entries: &[((i64, i64), i64)],
    dihedral: bool,
    sign: bool,
) -> Vec<((i64, i64), i64)> {
    let groups: &[Dihedral] = if dihedral {
        &Dihedral::ALL
    } else {
        &Dihedral::ALL[..1]
    };
    let signs: &[i64] = if sign { &[1, -1] } else { &[1] };
    let mut best: Option<Vec<((i64, i64), i64)>> = None;
    for &g in groups {
        for &s in signs {
            let mut img: Vec<((i64, i64), i64)> = entries
                .iter()
                .map(|&((i, j), v)| (g.apply(i, j), s * v))
                .collect();
            img.sort();
            if let Some(&((a, b), _)) = img.first() {
                for e in img.iter_mut() {
                    e.0 = (e.0 .0 - a, e.0 .1 - b);
                }
            }
            if best.as_ref().is_none_or(|b| img < *b) {
                best = Some(img);
            }
        }
    }
    best.unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta1_convolution_is_forward_difference() {
        let d = Domain::window(10);
        let d1 = SparseIntField::delta1(d);
        let e = SparseIntField::delta(d, 0, 0).unwrap();
        let c = d1.convolve(&e).unwrap();
        assert_eq!(c, d1);
        assert_eq!(d1.first_moments(), (-1, 0));
    }

    #[test]
    fn torus_keys_normalize() {
        let d = Domain::torus(5);
        let v = SparseIntField::from_entries(d, [((-1, 0), 2), ((4, 5), -2)]).unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn normal_form_invariant_under_symmetry() {
        let d = Domain::plane();
        let v = SparseIntField::delta1(d).convolve(&SparseIntField::delta2(d)).unwrap();
        let nf = v.normal_form(true, true);
        for g in Dihedral::ALL {
            let w = v.transform(g).unwrap().translate((3, -7)).unwrap();
            assert_eq!(w.normal_form(true, true), nf);
            assert_eq!(w.neg().normal_form(true, true), nf);
        }
    }
}
