//! Exact-rational multivariate polynomials on R^d.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact scalar. Always reduced, denominator positive.
pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Exact conversion of a finite float into a rational.
pub fn rat_from_f64(x: f64) -> Rational {
    Rational::from_float(x).unwrap_or_else(Rational::zero)
}

pub fn rat_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// A derivative multi-index: coordinate indices in 1..=dim, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(mut entries: Vec<usize>) -> Self {
        entries.sort_unstable();
        MultiIndex(entries)
    }

    pub fn empty() -> Self {
        MultiIndex(Vec::new())
    }

    pub fn single(i: usize) -> Self {
        MultiIndex(vec![i])
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_index(&self) -> usize {
        self.0.last().copied().unwrap_or(0)
    }

    pub fn join(&self, other: &MultiIndex) -> MultiIndex {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        MultiIndex::new(v)
    }

    pub fn push(&self, i: usize) -> MultiIndex {
        self.join(&MultiIndex::single(i))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, ")")
    }
}

/// Exponent vector of length `dim`.
pub type Exponent = Vec<u32>;

/// Sparse polynomial with rational coefficients. Zero coefficients are never stored.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Poly {
    dim: usize,
    terms: BTreeMap<Exponent, Rational>,
}

impl Poly {
    pub fn zero(dim: usize) -> Self {
        Poly { dim, terms: BTreeMap::new() }
    }

    pub fn one(dim: usize) -> Self {
        Self::constant(dim, Rational::one())
    }

    pub fn constant(dim: usize, c: Rational) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(vec![0; dim], c);
        p
    }

    /// The coordinate function x_i, 1-based.
    pub fn var(dim: usize, i: usize) -> Result<Self> {
        check_index(i, dim)?;
        let mut e = vec![0; dim];
        e[i - 1] = 1;
        Ok(Self::monomial(e, Rational::one()))
    }

    pub fn monomial(exp: Exponent, c: Rational) -> Self {
        let mut p = Self::zero(exp.len());
        p.add_term(exp, c);
        p
    }

    pub fn from_terms(dim: usize, terms: impl IntoIterator<Item = (Exponent, Rational)>) -> Self {
        let mut p = Self::zero(dim);
        for (e, c) in terms {
            assert_eq!(e.len(), dim, "exponent length must equal dim");
            p.add_term(e, c);
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &Rational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, exp: &[u32]) -> Rational {
        self.terms.get(exp).cloned().unwrap_or_else(Rational::zero)
    }

    /// Value of the constant term.
    pub fn constant_term(&self) -> Rational {
        self.coeff(&vec![0; self.dim])
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|e| e.iter().all(|&k| k == 0))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn add_term(&mut self, exp: Exponent, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(exp) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn scale(&self, c: &Rational) -> Poly {
        if c.is_zero() {
            return Poly::zero(self.dim);
        }
        Poly {
            dim: self.dim,
            terms: self.terms.iter().map(|(e, v)| (e.clone(), v * c)).collect(),
        }
    }

    /// Exact partial derivative with respect to x_i (1-based).
    pub fn partial(&self, i: usize) -> Result<Poly> {
        check_index(i, self.dim)?;
        let k = i - 1;
        let mut out = Poly::zero(self.dim);
        for (e, c) in &self.terms {
            if e[k] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            let p = e2[k];
            e2[k] -= 1;
            out.add_term(e2, c * rat_int(p as i64));
        }
        Ok(out)
    }

    /// Applies the derivative `∂_K`.
    pub fn apply_multiindex(&self, k: &MultiIndex) -> Result<Poly> {
        if k.max_index() > self.dim {
            return Err(Error::IndexOutOfRange { index: k.max_index(), dim: self.dim });
        }
        let mut out = Poly::zero(self.dim);
        for (e, c) in &self.terms {
            let mut e2 = e.clone();
            let mut c2 = c.clone();
            let mut dead = false;
            for &i in k.entries() {
                let p = e2[i - 1];
                if p == 0 {
                    dead = true;
                    break;
                }
                c2 *= rat_int(p as i64);
                e2[i - 1] -= 1;
            }
            if !dead {
                out.add_term(e2, c2);
            }
        }
        Ok(out)
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut acc = Poly::one(self.dim);
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    /// Evaluates at a rational point.
    pub fn eval(&self, x: &[Rational]) -> Rational {
        assert_eq!(x.len(), self.dim);
        let mut s = Rational::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (xi, &k) in x.iter().zip(e) {
                for _ in 0..k {
                    t *= xi;
                }
            }
            s += t;
        }
        s
    }

    /// Largest absolute coefficient, as a float.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|c| rat_to_f64(&c.abs())).fold(0.0, f64::max)
    }

    /// Maps every coefficient through `f`, dropping resulting zeros.
    pub fn map_coeffs(&self, f: impl Fn(&Rational) -> Rational) -> Poly {
        Poly::from_terms(self.dim, self.terms.iter().map(|(e, c)| (e.clone(), f(c))))
    }

    fn check_dim(&self, other: &Poly) {
        assert_eq!(self.dim, other.dim, "polynomial dimension mismatch");
    }
}

pub(crate) fn check_index(i: usize, dim: usize) -> Result<()> {
    if i == 0 || i > dim {
        Err(Error::IndexOutOfRange { index: i, dim })
    } else {
        Ok(())
    }
}

impl<'a> Add<&'a Poly> for &'a Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        self.check_dim(rhs);
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl AddAssign<&Poly> for Poly {
    fn add_assign(&mut self, rhs: &Poly) {
        self.check_dim(rhs);
        for (e, c) in &rhs.terms {
            self.add_term(e.clone(), c.clone());
        }
    }
}

impl<'a> Sub<&'a Poly> for &'a Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self.check_dim(rhs);
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), -c);
        }
        out
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(&-Rational::one())
    }
}

impl<'a> Mul<&'a Poly> for &'a Poly {
    type Output = Poly;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: &Poly) -> Poly {
        self.check_dim(rhs);
        let mut out = Poly::zero(self.dim);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &rhs.terms {
                let e: Exponent = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, c1 * c2);
            }
        }
        out
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Poly> for Poly {
            type Output = Poly;
            fn $m(self, rhs: Poly) -> Poly {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

pub(crate) fn fmt_rational(c: &Rational) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

/// Prints in the expression grammar accepted by [`crate::parse::parse_poly`].
/// Terms are printed in descending graded-lex order of exponents.
impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut keys: Vec<&Exponent> = self.terms.keys().collect();
        keys.sort_by(|a, b| {
            let da: u32 = a.iter().sum();
            let db: u32 = b.iter().sum();
            db.cmp(&da).then_with(|| b.cmp(a))
        });
        for (n, e) in keys.into_iter().enumerate() {
            let c = &self.terms[e];
            let neg = c.is_negative();
            let a = c.abs();
            if n == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            let mut factors: Vec<String> = Vec::new();
            let is_const = e.iter().all(|&k| k == 0);
            if !a.is_one() || is_const {
                factors.push(fmt_rational(&a));
            }
            for (i, &k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => factors.push(format!("x{}", i + 1)),
                    _ => factors.push(format!("x{}^{}", i + 1, k)),
                }
            }
            write!(f, "{}", factors.join("*"))?;
        }
        Ok(())
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly[d={}]({})", self.dim, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(d: usize, i: usize) -> Poly {
        Poly::var(d, i).unwrap()
    }

    #[test]
    fn partial_power_rule() {
        let p = &(&x(2, 1) * &x(2, 1)) * &x(2, 2);
        assert_eq!(p.partial(1).unwrap(), (&x(2, 1) * &x(2, 2)).scale(&rat_int(2)));
        assert!(Poly::constant(2, rat_int(5)).partial(2).unwrap().is_zero());
        let q = &(&x(2, 1) * &x(2, 2)) + &(&x(2, 2) * &x(2, 2));
        assert_eq!(q.partial(2).unwrap(), &x(2, 1) + &x(2, 2).scale(&rat_int(2)));
    }

    #[test]
    fn partial_rejects_bad_index() {
        assert!(x(2, 1).partial(3).is_err());
        assert!(x(2, 1).partial(0).is_err());
        assert!(x(2, 1).apply_multiindex(&MultiIndex::new(vec![1, 4])).is_err());
    }

    #[test]
    fn multiindex_derivatives() {
        let p = &x(2, 1) * &x(2, 2);
        assert_eq!(p.apply_multiindex(&MultiIndex::new(vec![2, 1])).unwrap(), Poly::one(2));
        let c = x(1, 1).pow(3);
        assert_eq!(c.apply_multiindex(&MultiIndex::new(vec![1, 1])).unwrap(), x(1, 1).scale(&rat_int(6)));
        assert_eq!(p.apply_multiindex(&MultiIndex::empty()).unwrap(), p);
    }

    #[test]
    fn multiindex_sorted() {
        assert_eq!(MultiIndex::new(vec![3, 1, 2]).entries(), &[1, 2, 3]);
    }

    #[test]
    fn display() {
        let p = &(&x(2, 1) * &x(2, 2)) + &Poly::constant(2, rat(3, 2));
        assert_eq!(p.to_string(), "x1*x2 + 3/2");
        assert_eq!(Poly::zero(3).to_string(), "0");
        assert_eq!((-&x(3, 3).pow(2)).to_string(), "-x3^2");
    }
}
