use crate::error::{Error, Result};
use crate::numeric::{e, ComplexSum};
use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Probabilities must sum to one within this.
pub const LAW_TOLERANCE: f64 = 1e-12;

/// A law of a single height: finitely many values with probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightDistribution {
    atoms: Vec<(u64, f64)>,
}

impl HeightDistribution {
    pub fn new(mut atoms: Vec<(u64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidArgument("empty height law".into()));
        }
        if atoms.iter().any(|&(_, p)| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidArgument("probabilities must be nonnegative".into()));
        }
        atoms.sort_by_key(|a| a.0);
        let mut merged: Vec<(u64, f64)> = Vec::with_capacity(atoms.len());
        for (v, p) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => merged.push((v, p)),
            }
        }
        let total: f64 = merged.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > LAW_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(HeightDistribution { atoms: merged })
    }

    /// The point mass at `h`.
    pub fn constant(h: u64) -> Self {
        HeightDistribution { atoms: vec![(h, 1.0)] }
    }

    /// Uniform on `lo..=hi`.
    pub fn uniform(lo: u64, hi: u64) -> Result<Self> {
        if hi < lo {
            return Err(Error::InvalidArgument("empty range".into()));
        }
        let p = 1.0 / (hi - lo + 1) as f64;
        HeightDistribution::new((lo..=hi).map(|v| (v, p)).collect())
    }

    /// `a` with probability `1 - p`, `b` with probability `p`.
    pub fn two_point(a: u64, b: u64, p: f64) -> Result<Self> {
        HeightDistribution::new(vec![(a, 1.0 - p), (b, p)])
    }

    pub fn atoms(&self) -> &[(u64, f64)] {
        &self.atoms
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|&(v, p)| v as f64 * p).sum()
    }

    pub fn max_value(&self) -> u64 {
        self.atoms.last().map_or(0, |a| a.0)
    }

    /// `E[e(-t σ)]`.
    pub fn characteristic(&self, t: f64) -> Complex64 {
        let mut s = ComplexSum::new();
        for &(v, p) in &self.atoms {
            s.add(e(-t * v as f64) * p);
        }
        s.value()
    }

    /// A sampler drawing heights from this law.
    pub fn sampler(&self) -> HeightSampler {
        let values = self.atoms.iter().map(|a| a.0).collect();
        let index = WeightedIndex::new(self.atoms.iter().map(|a| a.1)).expect("validated law");
        HeightSampler { values, index }
    }
}

pub struct HeightSampler {
    values: Vec<u64>,
    index: WeightedIndex<f64>,
}

impl HeightSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.values[self.index.sample(rng)]
    }
}

impl FromStr for HeightDistribution {
    type Err = Error;

    /// Parses `value:probability` pairs separated by commas, e.g. `2:0.9,4:0.1`.
    fn from_str(s: &str) -> Result<Self> {
        let atoms = s
            .split(',')
            .map(|part| {
                let (v, p) = part
                    .trim()
                    .split_once(':')
                    .ok_or_else(|| Error::InvalidArgument(format!("expected value:prob, got {part:?}")))?;
                let v: u64 = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad height {v:?}")))?;
                let p: f64 = p
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad probability {p:?}")))?;
                Ok((v, p))
            })
            .collect::<Result<Vec<_>>>()?;
        HeightDistribution::new(atoms)
    }
}

impl fmt::Display for HeightDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.atoms.iter().map(|(v, p)| format!("{v}:{p}")).collect();
        write!(f, "{}", parts.join(","))
    }
}
