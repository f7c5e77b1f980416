use super::domain::{Domain, NEIGHBORS};
use super::fourier::Fourier2;
use crate::error::{Error, Result};
use crate::numeric::{ComplexSum, KahanSum};
use num_complex::Complex64;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

/// Scalar types a [`Field`] can hold: `f64` or `Complex64`.
pub trait Scalar:
    Copy
    + Default
    + PartialEq
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + Mul<f64, Output = Self>
    + 'static
{
    fn zero() -> Self {
        Self::default()
    }
    fn from_f64(x: f64) -> Self;
    fn to_complex(self) -> Complex64;
    fn from_complex(z: Complex64) -> Self;
    fn is_finite(self) -> bool;
    fn modulus(self) -> f64;
    fn modulus_sq(self) -> f64;
    fn sum_compensated<I: Iterator<Item = Self>>(iter: I) -> Self;
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn from_complex(z: Complex64) -> Self {
        z.re
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn modulus_sq(self) -> f64 {
        self * self
    }
    fn sum_compensated<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.collect::<KahanSum>().value()
    }
}

impl Scalar for Complex64 {
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn to_complex(self) -> Complex64 {
        self
    }
    fn from_complex(z: Complex64) -> Self {
        z
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn modulus_sq(self) -> f64 {
        self.norm_sqr()
    }
    fn sum_compensated<I: Iterator<Item = Self>>(iter: I) -> Self {
        let mut s = ComplexSum::new();
        for z in iter {
            s.add(z);
        }
        s.value()
    }
}

/// Coordinate axis for discrete derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    First,
    Second,
}

impl Axis {
    pub fn offset(self) -> (i64, i64) {
        match self {
            Axis::First => (1, 0),
            Axis::Second => (0, 1),
        }
    }
}

/// Below this torus side convolution is done by direct summation.
pub const FFT_THRESHOLD: usize = 32;

/// A dense function on a [`Domain`].
///
/// On windows, reads outside the ball return zero (zero extension).
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T: Scalar = f64> {
    domain: Domain,
    values: Vec<T>,
}

impl<T: Scalar> Field<T> {
    pub fn zeros(domain: Domain) -> Self {
        Field {
            domain,
            values: vec![T::zero(); domain.storage_len()],
        }
    }

    pub fn from_fn(domain: Domain, mut f: impl FnMut(i64, i64) -> T) -> Self {
        let mut out = Self::zeros(domain);
        for idx in 0..domain.storage_len() {
            let (i, j) = domain.coords(idx);
            if domain.contains(i, j) {
                out.values[idx] = f(i, j);
            }
        }
        out
    }

    /// Build from dense storage; entries outside a window ball must be zero.
    pub fn from_values(domain: Domain, values: Vec<T>) -> Result<Self> {
        if values.len() != domain.storage_len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for {domain} (expected {})",
                values.len(),
                domain.storage_len()
            )));
        }
        let mut f = Field { domain, values };
        f.clear_outside();
        if !f.is_finite() {
            return Err(Error::InvalidArgument("non-finite field values".into()));
        }
        Ok(f)
    }

    fn clear_outside(&mut self) {
        if let Domain::Window { .. } = self.domain {
            for idx in 0..self.values.len() {
                let (i, j) = self.domain.coords(idx);
                if !self.domain.contains(i, j) {
                    self.values[idx] = T::zero();
                }
            }
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Dense row-major storage.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: i64, j: i64) -> T {
        match self.domain.index(i, j) {
            Some(idx) => self.values[idx],
            None => T::zero(),
        }
    }

    pub fn set(&mut self, i: i64, j: i64, v: T) -> Result<()> {
        match self.domain.index(i, j) {
            Some(idx) => {
                self.values[idx] = v;
                Ok(())
            }
            None => Err(Error::InvalidArgument(format!(
                "site ({i},{j}) outside {}",
                self.domain
            ))),
        }
    }

    /// Iterate `(site, value)` over the domain.
    pub fn iter(&self) -> impl Iterator<Item = ((i64, i64), T)> + '_ {
        self.domain
            .sites()
            .map(move |(i, j)| ((i, j), self.get(i, j)))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v = f(*v);
        }
        out.clear_outside();
        out
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> T {
        T::sum_compensated(self.values.iter().copied())
    }

    pub fn mean(&self) -> T {
        self.sum() * (1.0 / self.domain.site_count() as f64)
    }

    /// True when `|sum| <= 1e-10 * site count`.
    pub fn is_mean_zero(&self) -> bool {
        self.sum().modulus() <= 1e-10 * self.domain.site_count() as f64
    }

    pub fn norm2_sq(&self) -> f64 {
        crate::numeric::kahan_sum(self.values.iter().map(|v| v.modulus_sq()))
    }

    pub fn norm2(&self) -> f64 {
        self.norm2_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.modulus()).fold(0.0, f64::max)
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

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a += *b;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a -= *b;
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    /// Max modulus of the pointwise difference.
    pub fn max_diff(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (*a - *b).modulus())
            .fold(0.0, f64::max))
    }

    /// Pointwise `4f(x) - sum of the four neighbours`.
    pub fn laplacian(&self) -> Self {
        let d = self.domain;
        Field::from_fn(d, |i, j| {
            let mut s = self.get(i, j) * 4.0;
            for (di, dj) in NEIGHBORS {
                s -= self.get(i + di, j + dj);
            }
            s
        })
    }

    /// `k`-fold forward difference `f(x + e) - f(x)` along `axis`.
    pub fn derivative(&self, axis: Axis, order: usize) -> Self {
        let (di, dj) = axis.offset();
        let mut cur = self.clone();
        for _ in 0..order {
            let prev = cur;
            cur = Field::from_fn(self.domain, |i, j| prev.get(i + di, j + dj) - prev.get(i, j));
        }
        cur
    }

    /// `D_1^a D_2^b f`.
    pub fn mixed_derivative(&self, a: usize, b: usize) -> Self {
        self.derivative(Axis::First, a).derivative(Axis::Second, b)
    }

    /// Translate: `(T_a f)(x) = f(x - a)`; windows fill with zero.
    pub fn translate(&self, a: (i64, i64)) -> Self {
        Field::from_fn(self.domain, |i, j| self.get(i - a.0, j - a.1))
    }

    /// Convolution `(f * g)(x) = sum_y f(x - y) g(y)`.
    ///
    /// Circular on tori (Fourier transform from side [`FFT_THRESHOLD`] up),
    /// direct over the support of `g` on windows.
    pub fn convolve(&self, g: &Self) -> Result<Self> {
        self.check_same(g)?;
        match self.domain {
            Domain::Torus { m } if m >= FFT_THRESHOLD => Ok(self.convolve_fft(g)),
            _ => Ok(self.convolve_direct(g)),
        }
    }

    /// Direct-summation convolution (any domain).
    pub fn convolve_direct(&self, g: &Self) -> Self {
        let support: Vec<((i64, i64), T)> = g
            .iter()
            .filter(|(_, v)| *v != T::zero())
            .collect();
        Field::from_fn(self.domain, |i, j| {
            let mut s = T::zero();
            for &((a, b), gv) in &support {
                s += self.get(i - a, j - b) * gv;
            }
            s
        })
    }

    /// Transform-based circular convolution (tori only).
    pub fn convolve_fft(&self, g: &Self) -> Self {
        let m = match self.domain {
            Domain::Torus { m } => m,
            Domain::Window { .. } => return self.convolve_direct(g),
        };
        let plan = Fourier2::new(m);
        let mut a: Vec<Complex64> = self.values.iter().map(|v| v.to_complex()).collect();
        let mut b: Vec<Complex64> = g.values.iter().map(|v| v.to_complex()).collect();
        plan.forward(&mut a);
        plan.forward(&mut b);
        for (x, y) in a.iter_mut().zip(&b) {
            *x *= *y;
        }
        plan.inverse(&mut a);
        Field {
            domain: self.domain,
            values: a.into_iter().map(T::from_complex).collect(),
        }
    }

    /// `sum_x f(x) g(x)` with compensated summation.
    pub fn dot(&self, other: &Self) -> Result<T> {
        self.check_same(other)?;
        Ok(T::sum_compensated(
            self.values.iter().zip(&other.values).map(|(a, b)| *a * *b),
        ))
    }
}

impl Field<f64> {
    /// Promote to a complex field.
    pub fn to_complex(&self) -> Field<Complex64> {
        Field {
            domain: self.domain,
            values: self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

impl Field<Complex64> {
    pub fn real_part(&self) -> Field<f64> {
        Field {
            domain: self.domain,
            values: self.values.iter().map(|z| z.re).collect(),
        }
    }
}
