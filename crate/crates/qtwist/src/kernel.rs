//! Exact scalars: rationals, truncated power series in ħ, q-integers.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact rational number, always normalized (lowest terms, positive denominator).
pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qf(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Parse "p", "-p", "p/q".
pub fn parse_q(s: &str) -> Option<Q> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(Q::new(n, d))
        }
        None => Some(Q::from_integer(s.parse().ok()?)),
    }
}

pub fn q_to_string(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KernelError {
    #[error("truncation order mismatch: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("series has zero constant term")]
    ZeroConstantTerm,
    #[error("series has nonzero constant term")]
    NonzeroConstantTerm,
    #[error("index {i} out of range 0..={n}")]
    OutOfRange { i: i64, n: i64 },
}

/// Element of ℚ[[ħ]]/(ħ^K). The order K is the coefficient vector length.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Series {
    c: Vec<Q>,
}

/// Carries the truncation order for one computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ctx {
    pub order: usize,
}

impl Default for Ctx {
    fn default() -> Self {
        Ctx { order: 4 }
    }
}

impl Ctx {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "truncation order must be positive");
        Ctx { order }
    }
    pub fn zero(&self) -> Series {
        Series::zero(self.order)
    }
    pub fn one(&self) -> Series {
        Series::constant(self.order, q(1))
    }
    pub fn constant(&self, x: Q) -> Series {
        Series::constant(self.order, x)
    }
    pub fn int(&self, n: i64) -> Series {
        Series::constant(self.order, q(n))
    }
    /// ħ^j scaled by x.
    pub fn monomial(&self, j: usize, x: Q) -> Series {
        let mut s = self.zero();
        if j < self.order {
            s.c[j] = x;
        }
        s
    }
    pub fn hbar(&self) -> Series {
        self.monomial(1, q(1))
    }
    pub fn from_coeffs(&self, coeffs: &[Q]) -> Series {
        let mut s = self.zero();
        for (i, x) in coeffs.iter().enumerate().take(self.order) {
            s.c[i] = x.clone();
        }
        s
    }
    /// exp(x·ħ)
    pub fn exp_hbar(&self, x: &Q) -> Series {
        exp_series(&self.monomial(1, x.clone())).expect("degree-one argument")
    }
    pub fn q_int(&self, n: i64, d: &Q) -> Series {
        q_int(self.order, n, d)
    }
}

impl Series {
    pub fn zero(order: usize) -> Self {
        Series { c: vec![Q::zero(); order] }
    }
    pub fn constant(order: usize, x: Q) -> Self {
        let mut s = Series::zero(order);
        s.c[0] = x;
        s
    }
    pub fn from_vec(c: Vec<Q>) -> Self {
        assert!(!c.is_empty(), "truncation order must be positive");
        Series { c }
    }
    pub fn order(&self) -> usize {
        self.c.len()
    }
    pub fn coeffs(&self) -> &[Q] {
        &self.c
    }
    pub fn coeff(&self, i: usize) -> Q {
        self.c.get(i).cloned().unwrap_or_else(Q::zero)
    }
    pub fn c0(&self) -> &Q {
        &self.c[0]
    }
    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|x| x.is_zero())
    }
    pub fn is_one(&self) -> bool {
        self.c[0].is_one() && self.c[1..].iter().all(|x| x.is_zero())
    }
    /// Invertible in the truncated ring.
    pub fn is_unit(&self) -> bool {
        !self.c[0].is_zero()
    }
    /// Lowest ħ-degree with nonzero coefficient; None for zero.
    pub fn valuation(&self) -> Option<usize> {
        self.c.iter().position(|x| !x.is_zero())
    }
    pub fn scale(&self, x: &Q) -> Series {
        Series { c: self.c.iter().map(|a| a * x).collect() }
    }
    /// Multiply by ħ^j.
    pub fn shift(&self, j: usize) -> Series {
        let k = self.order();
        let mut out = Series::zero(k);
        for i in 0..k.saturating_sub(j) {
            out.c[i + j] = self.c[i].clone();
        }
        out
    }
    /// Divide by ħ^j, dropping the low coefficients. Result keeps order K
    /// (high coefficients become zero since they are unknown).
    pub fn unshift(&self, j: usize) -> Series {
        let k = self.order();
        let mut out = Series::zero(k);
        for i in j..k {
            out.c[i - j] = self.c[i].clone();
        }
        out
    }
    /// Reduce to a smaller truncation order.
    pub fn truncate(&self, order: usize) -> Series {
        let mut c: Vec<Q> = self.c.iter().take(order).cloned().collect();
        c.resize(order, Q::zero());
        Series { c }
    }
    pub fn check_order(&self, other: &Series) -> Result<(), KernelError> {
        if self.order() != other.order() {
            Err(KernelError::OrderMismatch(self.order(), other.order()))
        } else {
            Ok(())
        }
    }
    pub fn pow(&self, n: u32) -> Series {
        let mut acc = Series::constant(self.order(), q(1));
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }
    pub fn to_strings(&self) -> Vec<String> {
        self.c.iter().map(q_to_string).collect()
    }
}

/// Cauchy product truncated at K.
pub fn series_mul(a: &Series, b: &Series) -> Result<Series, KernelError> {
    a.check_order(b)?;
    let k = a.order();
    let mut out = Series::zero(k);
    for i in 0..k {
        if a.c[i].is_zero() {
            continue;
        }
        for j in 0..k - i {
            if !b.c[j].is_zero() {
                out.c[i + j] += &a.c[i] * &b.c[j];
            }
        }
    }
    Ok(out)
}

pub fn series_inv(a: &Series) -> Result<Series, KernelError> {
    if a.c[0].is_zero() {
        return Err(KernelError::ZeroConstantTerm);
    }
    let k = a.order();
    let inv0 = a.c[0].recip();
    let mut b = Series::zero(k);
    b.c[0] = inv0.clone();
    for n in 1..k {
        let mut s = Q::zero();
        for i in 1..=n {
            if !a.c[i].is_zero() {
                s += &a.c[i] * &b.c[n - i];
            }
        }
        b.c[n] = -(s * &inv0);
    }
    Ok(b)
}

pub fn exp_series(a: &Series) -> Result<Series, KernelError> {
    if !a.c[0].is_zero() {
        return Err(KernelError::NonzeroConstantTerm);
    }
    let k = a.order();
    let mut out = Series::constant(k, q(1));
    let mut term = Series::constant(k, q(1));
    for n in 1..k {
        term = (&term * a).scale(&qf(1, n as i64));
        if term.is_zero() {
            break;
        }
        out = &out + &term;
    }
    Ok(out)
}

/// [n] with q = exp(ħd/2), as the symmetric sum Σ_{i=-n+1}^{n-1} q^i (step 2).
/// Negative n gives −[−n].
pub fn q_int(order: usize, n: i64, d: &Q) -> Series {
    if n < 0 {
        return -q_int(order, -n, d);
    }
    let mut out = Series::zero(order);
    let mut i = -n + 1;
    while i < n {
        // q^i = exp(ħ·d·i/2)
        let arg = Series::zero(order).add_monomial(1, d * qf(i, 2));
        out = &out + &exp_series(&arg).expect("degree-one argument");
        i += 2;
    }
    out
}

pub fn q_factorial(order: usize, n: i64, d: &Q) -> Series {
    let mut acc = Series::constant(order, q(1));
    for i in 1..=n {
        acc = &acc * &q_int(order, i, d);
    }
    acc
}

pub fn q_binom(order: usize, n: i64, i: i64, d: &Q) -> Result<Series, KernelError> {
    if i < 0 || i > n {
        return Err(KernelError::OutOfRange { i, n });
    }
    let num = q_factorial(order, n, d);
    let den = series_mul(&q_factorial(order, n - i, d), &q_factorial(order, i, d))?;
    series_mul(&num, &series_inv(&den)?)
}

impl Series {
    fn add_monomial(mut self, j: usize, x: Q) -> Series {
        if j < self.order() {
            self.c[j] += x;
        }
        self
    }
}

impl<'a> Add<&'a Series> for &'a Series {
    type Output = Series;
    fn add(self, rhs: &Series) -> Series {
        self.check_order(rhs).expect("series order mismatch");
        Series { c: self.c.iter().zip(&rhs.c).map(|(a, b)| a + b).collect() }
    }
}

impl<'a> Sub<&'a Series> for &'a Series {
    type Output = Series;
    fn sub(self, rhs: &Series) -> Series {
        self.check_order(rhs).expect("series order mismatch");
        Series { c: self.c.iter().zip(&rhs.c).map(|(a, b)| a - b).collect() }
    }
}

impl<'a> Mul<&'a Series> for &'a Series {
    type Output = Series;
    fn mul(self, rhs: &Series) -> Series {
        series_mul(self, rhs).expect("series order mismatch")
    }
}

impl Neg for Series {
    type Output = Series;
    fn neg(self) -> Series {
        Series { c: self.c.into_iter().map(|a| -a).collect() }
    }
}

impl Neg for &Series {
    type Output = Series;
    fn neg(self) -> Series {
        Series { c: self.c.iter().map(|a| -a).collect() }
    }
}

impl AddAssign<&Series> for Series {
    fn add_assign(&mut self, rhs: &Series) {
        self.check_order(rhs).expect("series order mismatch");
        for (a, b) in self.c.iter_mut().zip(&rhs.c) {
            *a += b;
        }
    }
}

impl SubAssign<&Series> for Series {
    fn sub_assign(&mut self, rhs: &Series) {
        self.check_order(rhs).expect("series order mismatch");
        for (a, b) in self.c.iter_mut().zip(&rhs.c) {
            *a -= b;
        }
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, a) in self.c.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let neg = a.is_negative();
            let mag = a.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            first = false;
            let ms = q_to_string(&mag);
            match i {
                0 => write!(f, "{ms}")?,
                _ => {
                    if !mag.is_one() {
                        write!(f, "{ms}·")?;
                    }
                    if i == 1 {
                        write!(f, "ħ")?;
                    } else {
                        write!(f, "ħ^{i}")?;
                    }
                }
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " (mod ħ^{})", self.order())
    }
}

impl fmt::Debug for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Series {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_strings().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Series {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v: Vec<String> = Vec::deserialize(d)?;
        if v.is_empty() {
            return Err(serde::de::Error::custom("empty series"));
        }
        let c = v
            .iter()
            .map(|s| parse_q(s).ok_or_else(|| serde::de::Error::custom(format!("bad rational {s}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Series { c })
    }
}

/// Small integer view of a rational, when it is one.
pub fn q_to_i64(x: &Q) -> Option<i64> {
    if x.is_integer() {
        x.numer().to_i64()
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(c: &[i64]) -> Series {
        Series::from_vec(c.iter().map(|&x| q(x)).collect())
    }

    #[test]
    fn mul_examples() {
        assert_eq!(series_mul(&s(&[1, 1, 0]), &s(&[1, -1, 0])).unwrap(), s(&[1, 0, -1]));
        let b = s(&[3, 5, 7, 2]);
        assert_eq!(series_mul(&s(&[1, 0, 0, 0]), &b).unwrap(), b);
        assert!(series_mul(&s(&[0, 0, 1]), &s(&[0, 1, 0])).unwrap().is_zero());
        assert_eq!(series_mul(&s(&[1, 1]), &s(&[1, 1, 1])), Err(KernelError::OrderMismatch(2, 3)));
    }

    #[test]
    fn inv_examples() {
        assert_eq!(series_inv(&s(&[1, 0, 0])).unwrap(), s(&[1, 0, 0]));
        assert_eq!(series_inv(&s(&[1, 1, 0])).unwrap(), s(&[1, -1, 1]));
        assert_eq!(series_inv(&s(&[2])).unwrap(), Series::constant(1, qf(1, 2)));
        assert_eq!(series_inv(&s(&[0, 1])), Err(KernelError::ZeroConstantTerm));
    }

    #[test]
    fn exp_examples() {
        assert_eq!(exp_series(&s(&[0, 0, 0])).unwrap(), s(&[1, 0, 0]));
        let e = exp_series(&s(&[0, 1, 0])).unwrap();
        assert_eq!(e, Series::from_vec(vec![q(1), q(1), qf(1, 2)]));
        let em = exp_series(&s(&[0, -1, 0])).unwrap();
        assert!((&e * &em).is_one());
        assert_eq!(exp_series(&s(&[1, 0])), Err(KernelError::NonzeroConstantTerm));
    }

    // Oracle: e^{ħ}+e^{-ħ} summed by direct Taylor coefficients.
    fn taylor_cosh2(order: usize) -> Series {
        let mut c = vec![Q::zero(); order];
        let mut fact = BigInt::one();
        for (n, slot) in c.iter_mut().enumerate() {
            if n > 0 {
                fact *= BigInt::from(n);
            }
            if n % 2 == 0 {
                *slot = Q::new(BigInt::from(2), fact.clone());
            }
        }
        Series::from_vec(c)
    }

    #[test]
    fn q_int_examples() {
        assert!(q_int(3, 1, &q(5)).is_one());
        assert!(q_int(3, 0, &q(5)).is_zero());
        assert_eq!(q_int(3, 2, &q(2)), s(&[2, 0, 1]));
        assert_eq!(q_int(5, 2, &q(2)), taylor_cosh2(5));
        assert_eq!(q_int(3, -2, &q(2)), s(&[-2, 0, -1]));
    }

    #[test]
    fn q_binom_examples() {
        for n in 0..5 {
            assert!(q_binom(3, n, 0, &q(2)).unwrap().is_one());
            assert!(q_binom(3, n, n, &q(2)).unwrap().is_one());
        }
        // Oracle: factorial quotient [2]!/([1]![1]!) = [2].
        assert_eq!(q_binom(3, 2, 1, &q(2)).unwrap(), s(&[2, 0, 1]));
        assert_eq!(q_binom(3, 2, 1, &q(2)).unwrap(), q_int(3, 2, &q(2)));
        assert!(q_binom(3, 2, 3, &q(2)).is_err());
    }

    #[test]
    fn display_is_readable() {
        let x = Series::from_vec(vec![q(1), q(-1), qf(1, 2)]);
        assert_eq!(x.to_string(), "1 - ħ + 1/2·ħ^2 (mod ħ^3)");
    }
}
