//! Truncated power series in the formal parameter ε.

use std::fmt;

use crate::error::{Error, Result};
use crate::poly::Poly;

/// Payload of a truncated ε-series.
pub trait SeriesCoeff: Clone + PartialEq {
    /// Zero with the same shape (dimension, arity) as `self`.
    fn zero_like(&self) -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
}

/// Payloads with a product, so the series form a ring.
pub trait SeriesRing: SeriesCoeff {
    fn mul(&self, other: &Self) -> Self;
    /// Dimension the payload lives on.
    fn shape(&self) -> usize;
}

impl SeriesCoeff for Poly {
    fn zero_like(&self) -> Self {
        Poly::zero(self.dim())
    }
    fn is_zero(&self) -> bool {
        Poly::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
}

impl SeriesRing for Poly {
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn shape(&self) -> usize {
        self.dim()
    }
}

/// `c_0 + c_1 ε + … + c_N ε^N`, truncated at order `N` inclusive.
#[derive(Clone, PartialEq)]
pub struct EpsSeries<T> {
    coeffs: Vec<T>,
}

impl<T: SeriesCoeff> EpsSeries<T> {
    /// Builds a series of order `coeffs.len() - 1`.
    pub fn new(coeffs: Vec<T>) -> Self {
        assert!(!coeffs.is_empty(), "series needs at least the order-0 coefficient");
        EpsSeries { coeffs }
    }

    /// `c` in degree 0, zeros up to `order`.
    pub fn constant(c: T, order: usize) -> Self {
        let z = c.zero_like();
        let mut coeffs = vec![z; order + 1];
        coeffs[0] = c;
        EpsSeries { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: usize) -> &T {
        &self.coeffs[k]
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(T::is_zero)
    }

    /// Index of the lowest nonzero coefficient.
    pub fn valuation(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.order() != other.order() {
            return Err(Error::OrderMismatch(self.order(), other.order()));
        }
        Ok(EpsSeries { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.add(b)).collect() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.order() != other.order() {
            return Err(Error::OrderMismatch(self.order(), other.order()));
        }
        Ok(EpsSeries { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.sub(b)).collect() })
    }

    pub fn map<U: SeriesCoeff>(&self, f: impl Fn(&T) -> U) -> EpsSeries<U> {
        EpsSeries { coeffs: self.coeffs.iter().map(f).collect() }
    }
}

impl<T: SeriesRing> EpsSeries<T> {
    /// Cauchy product truncated at the common order.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        series_mul(self, other)
    }
}

/// Coefficient `k` of the result is `Σ_{l ≤ k} a_{k-l} b_l`.
pub fn series_mul<T: SeriesRing>(a: &EpsSeries<T>, b: &EpsSeries<T>) -> Result<EpsSeries<T>> {
    let n = a.order();
    if n != b.order() {
        return Err(Error::OrderMismatch(n, b.order()));
    }
    if a.coeffs[0].shape() != b.coeffs[0].shape() {
        return Err(Error::DimMismatch(a.coeffs[0].shape(), b.coeffs[0].shape()));
    }
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let mut acc = a.coeffs[0].zero_like();
        for l in 0..=k {
            acc = acc.add(&a.coeffs[k - l].mul(&b.coeffs[l]));
        }
        out.push(acc);
    }
    Ok(EpsSeries { coeffs: out })
}

impl fmt::Display for EpsSeries<Poly> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let body = if c.num_terms() > 1 && k > 0 { format!("({c})") } else { c.to_string() };
            let eps = match k {
                0 => String::new(),
                1 => "eps".to_string(),
                _ => format!("eps^{k}"),
            };
            let piece = match (k, body.as_str()) {
                (0, _) => body.clone(),
                (_, "1") => eps,
                (_, "-1") => format!("-{eps}"),
                _ => format!("{body}*{eps}"),
            };
            if first {
                write!(f, "{piece}")?;
                first = false;
            } else if let Some(rest) = piece.strip_prefix('-') {
                write!(f, " - {rest}")?;
            } else {
                write!(f, " + {piece}")?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl fmt::Debug for EpsSeries<Poly> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EpsSeries[N={}]({})", self.order(), self)
    }
}
