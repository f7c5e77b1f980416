use crate::error::{Error, Result};
use crate::greens::{greens_torus, GreensTable};
use crate::lattice::{convolve_sparse, Domain, Field, SparseIntField};
use crate::numeric::{e, wrap_unit, ComplexSum, KahanSum};
use num_complex::Complex64;
use serde::Serialize;

/// Tolerance for `Δξ ≡ 0 mod 1`.
pub const HARMONIC_TOLERANCE: f64 = 1e-8;

/// Tolerance for rounding `Δξ'` to an integer prevector.
pub const PREVECTOR_TOLERANCE: f64 = 1e-6;

/// A character of the sandpile group of `T_m`: values in `[-1/2, 1/2)` with
/// `ξ(0,0) = 0` and `Δξ` integer-valued.
#[derive(Clone, Debug, PartialEq)]
pub struct Frequency {
    values: Field<f64>,
}

impl Frequency {
    /// Validate a torus field as a frequency (values are wrapped into `[-1/2, 1/2)`).
    pub fn new(values: Field<f64>) -> Result<Self> {
        let Domain::Torus { .. } = values.domain() else {
            return Err(Error::InvalidArgument("frequencies live on a torus".into()));
        };
        let values = values.map(wrap_unit);
        if values.get(0, 0).abs() > HARMONIC_TOLERANCE {
            return Err(Error::InvalidArgument("frequency must vanish at the sink".into()));
        }
        let worst = harmonic_defect(&values);
        if worst > HARMONIC_TOLERANCE {
            return Err(Error::NumericalGuard(format!(
                "Δξ is {worst:.3e} away from an integer"
            )));
        }
        Ok(Frequency { values })
    }

    pub fn zero(m: usize) -> Self {
        Frequency {
            values: Field::zeros(Domain::torus(m)),
        }
    }

    pub fn m(&self) -> usize {
        self.values.domain().side()
    }

    pub fn values(&self) -> &Field<f64> {
        &self.values
    }

    pub fn get(&self, i: i64, j: i64) -> f64 {
        self.values.get(i, j)
    }

    /// `-ξ`.
    pub fn neg(&self) -> Frequency {
        Frequency {
            values: self.values.map(|x| wrap_unit(-x)),
        }
    }

    /// `ξ - η` in the dual group.
    pub fn sub(&self, other: &Frequency) -> Result<Frequency> {
        Ok(Frequency {
            values: self.values.sub(&other.values)?.map(wrap_unit),
        })
    }

    pub fn is_zero(&self) -> bool {
        self.values.max_abs() < HARMONIC_TOLERANCE
    }
}

/// `max_x dist(Δξ(x), Z)`.
pub fn harmonic_defect(xi: &Field<f64>) -> f64 {
    xi.laplacian()
        .values()
        .iter()
        .map(|&x| (x - x.round()).abs())
        .fold(0.0, f64::max)
}

/// `(1/m^2) sum_x e(ξ_x)` for any real field on `T_m`.
///
/// For a frequency (`ξ(0,0) = 0`) this is the eigenvalue of the sandpile chain.
pub fn mu_hat_field(xi: &Field<f64>) -> Complex64 {
    let mut s = ComplexSum::new();
    for (_, x) in xi.iter() {
        s.add(e(x));
    }
    s.value() / xi.domain().site_count() as f64
}

pub fn mu_hat(xi: &Frequency) -> Complex64 {
    mu_hat_field(&xi.values)
}

#[derive(Clone, Debug, Serialize)]
pub struct SavingsReport {
    pub set_size: usize,
    /// `|S| - |sum_{x in S} e(ξ_x)|`.
    pub savings: f64,
    /// Savings over the whole torus, `m^2 (1 - |μ̂(ξ)|)`.
    pub total_savings: f64,
    pub eigenvalue_modulus: f64,
}

/// `sav(ξ; S) = |S| - |sum_{x in S} e(ξ_x)|`.
pub fn set_savings(xi: &Field<f64>, set: &[(i64, i64)]) -> f64 {
    let mut s = ComplexSum::new();
    for &(i, j) in set {
        s.add(e(xi.get(i, j)));
    }
    set.len() as f64 - s.value().norm()
}

/// `sav(ξ; T_m) = m^2 - |sum_x e(ξ_x)|`.
pub fn total_savings(xi: &Field<f64>) -> f64 {
    let mut s = ComplexSum::new();
    for (_, x) in xi.iter() {
        s.add(e(x));
    }
    xi.domain().site_count() as f64 - s.value().norm()
}

pub fn savings(xi: &Frequency, set: &[(i64, i64)]) -> SavingsReport {
    let total = total_savings(&xi.values);
    let n = xi.values.domain().site_count() as f64;
    SavingsReport {
        set_size: set.len(),
        savings: set_savings(&xi.values, set),
        total_savings: total,
        eigenvalue_modulus: 1.0 - total / n,
    }
}

/// `G_{T_m} * v` (the unnormalized frequency `ξ̄` of a prevector).
pub fn potential(g: &GreensTable, v: &SparseIntField) -> Result<Field<f64>> {
    if g.domain() != v.domain() {
        return Err(Error::DomainMismatch(
            g.domain().to_string(),
            v.domain().to_string(),
        ));
    }
    Ok(convolve_sparse(&g.values, v))
}

/// `ξ = G_{T_m} * v - (G_{T_m} * v)(0,0)` reduced mod 1, with a precomputed Green's table.
pub fn frequency_from_prevector_with(g: &GreensTable, v: &SparseIntField) -> Result<Frequency> {
    if v.total() != 0 {
        return Err(Error::InvalidArgument("prevector must have mean zero".into()));
    }
    let bar = potential(g, v)?;
    let c = bar.get(0, 0);
    Frequency::new(bar.map(|x| x - c))
}

pub fn frequency_from_prevector(v: &SparseIntField) -> Result<Frequency> {
    let Domain::Torus { m } = v.domain() else {
        return Err(Error::InvalidArgument("prevectors live on a torus".into()));
    };
    frequency_from_prevector_with(&greens_torus(m), v)
}

/// The prevector `Δξ'` of the lift `ξ'_x ∈ (C - 1/2, C + 1/2]`, `C = arg(μ̂(ξ))/2π`.
pub fn distinguished_prevector(xi: &Frequency) -> Result<SparseIntField> {
    let mu = mu_hat(xi);
    let c = if mu.norm() > 0.0 {
        mu.arg() / (2.0 * std::f64::consts::PI)
    } else {
        0.0
    };
    let lift = xi.values.map(|x| {
        let y = x - c;
        c + y - (y - 0.5).ceil()
    });
    let lap = lift.laplacian();
    let domain = lift.domain();
    let mut entries = Vec::new();
    for ((i, j), x) in lap.iter() {
        let r = x.round();
        if (x - r).abs() > PREVECTOR_TOLERANCE {
            return Err(Error::NumericalGuard(format!(
                "Δξ' at ({i},{j}) is {x}, not an integer"
            )));
        }
        if r != 0.0 {
            entries.push(((i, j), r as i64));
        }
    }
    SparseIntField::from_entries(domain, entries)
}

/// `‖ξ̄‖_2^2` for `ξ̄ = G_{T_m} * v`.
pub fn potential_norm_sq(g: &GreensTable, v: &SparseIntField) -> Result<f64> {
    let bar = potential(g, v)?;
    let mut s = KahanSum::new();
    for (_, x) in bar.iter() {
        s.add(x * x);
    }
    Ok(s.value())
}
