//! Multivector fields with polynomial coefficients and the Schouten–Nijenhuis bracket.
//!
//! A grade-k field is stored by its components on strictly increasing index
//! tuples `i_1 < … < i_k`; the component on `(1,2)` is the tensor entry
//! `X^{12} = -X^{21}`. Grade 0 is a single polynomial stored under `()`.

use std::collections::BTreeMap;
use std::fmt;

use num::One;

use crate::error::{Error, Result};
use crate::parse::parse_poly;
use crate::poly::{check_index, rat, rat_int, Poly, Rational};

#[derive(Clone, Eq)]
pub struct MultiVectorField {
    dim: usize,
    grade: usize,
    components: BTreeMap<Vec<usize>, Poly>,
}

/// Sorts `idx` in place and returns the permutation sign, or `None` on a repeat.
pub(crate) fn sort_sign(idx: &mut [usize]) -> Option<i32> {
    let mut sign = 1;
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && idx[j - 1] > idx[j] {
            idx.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if idx.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some(sign)
    }
}

/// Zero fields compare equal regardless of their nominal grade.
impl PartialEq for MultiVectorField {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.components == other.components
            && (self.grade == other.grade || self.components.is_empty())
    }
}

impl MultiVectorField {
    pub fn zero(dim: usize, grade: usize) -> Self {
        MultiVectorField { dim, grade, components: BTreeMap::new() }
    }

    pub fn function(f: Poly) -> Self {
        let mut x = Self::zero(f.dim(), 0);
        x.add_component(vec![], f);
        x
    }

    /// `coeff ∂_{i_1} ∧ … ∧ ∂_{i_k}` for arbitrary (unsorted) indices.
    pub fn monomial(coeff: Poly, indices: &[usize]) -> Result<Self> {
        let dim = coeff.dim();
        for &i in indices {
            check_index(i, dim)?;
        }
        let mut x = Self::zero(dim, indices.len());
        x.add_component(indices.to_vec(), coeff);
        Ok(x)
    }

    /// Builds a field from `(coefficient, indices)` terms, canonicalizing order and sign.
    pub fn from_terms(dim: usize, grade: usize, terms: impl IntoIterator<Item = (Poly, Vec<usize>)>) -> Result<Self> {
        let mut x = Self::zero(dim, grade);
        for (c, idx) in terms {
            if c.dim() != dim {
                return Err(Error::DimMismatch(dim, c.dim()));
            }
            if idx.len() != grade {
                return Err(Error::WrongGrade { expected: grade, got: idx.len() });
            }
            for &i in &idx {
                check_index(i, dim)?;
            }
            x.add_component(idx, c);
        }
        Ok(x)
    }

    /// Bivector with the given constant skew component matrix.
    pub fn constant_bivector(alpha: &[Vec<Rational>]) -> Result<Self> {
        let d = alpha.len();
        if alpha.iter().any(|row| row.len() != d) {
            return Err(Error::NotSkew);
        }
        let mut x = Self::zero(d, 2);
        for (i, row) in alpha.iter().enumerate() {
            for (j, a) in row.iter().enumerate() {
                if *a != -alpha[j][i].clone() {
                    return Err(Error::NotSkew);
                }
                if i < j {
                    x.add_component(vec![i + 1, j + 1], Poly::constant(d, a.clone()));
                }
            }
        }
        Ok(x)
    }

    fn add_component(&mut self, mut idx: Vec<usize>, c: Poly) {
        debug_assert_eq!(idx.len(), self.grade);
        let Some(sign) = sort_sign(&mut idx) else { return };
        if c.is_zero() {
            return;
        }
        let c = if sign < 0 { -&c } else { c };
        let slot = self.components.entry(idx.clone()).or_insert_with(|| Poly::zero(self.dim));
        *slot += &c;
        if slot.is_zero() {
            self.components.remove(&idx);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grade(&self) -> usize {
        self.grade
    }

    pub fn is_zero(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> impl Iterator<Item = (&Vec<usize>, &Poly)> {
        self.components.iter()
    }

    /// Tensor entry `X^{j_1…j_k}` for any index tuple, using skew-symmetry.
    pub fn tensor(&self, indices: &[usize]) -> Poly {
        let mut idx = indices.to_vec();
        match sort_sign(&mut idx) {
            None => Poly::zero(self.dim),
            Some(s) => match self.components.get(&idx) {
                None => Poly::zero(self.dim),
                Some(c) if s > 0 => c.clone(),
                Some(c) => -c,
            },
        }
    }

    /// The coefficient of a grade-0 field.
    pub fn as_function(&self) -> Poly {
        self.tensor(&[])
    }

    pub fn scale(&self, c: &Rational) -> Self {
        let mut x = Self::zero(self.dim, self.grade);
        for (i, p) in &self.components {
            x.add_component(i.clone(), p.scale(c));
        }
        x
    }

    /// Sum of two fields of equal grade. A zero operand carries no grade, so it is
    /// accepted whatever grade it was built with.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimMismatch(self.dim, other.dim));
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.is_zero() {
            return Ok(other.clone());
        }
        self.check_same(other)?;
        let mut x = self.clone();
        for (i, p) in &other.components {
            x.add_component(i.clone(), p.clone());
        }
        Ok(x)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(&-Rational::one()))
    }

    /// Largest absolute coefficient among all components.
    pub fn max_abs_coeff(&self) -> f64 {
        self.components.values().map(Poly::max_abs_coeff).fold(0.0, f64::max)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimMismatch(self.dim, other.dim));
        }
        if self.grade != other.grade {
            return Err(Error::WrongGrade { expected: self.grade, got: other.grade });
        }
        Ok(())
    }

    /// Splits into decomposable pieces `c ∂_{i_1} ∧ … ∧ ∂_{i_k}`.
    fn decomposables(&self) -> impl Iterator<Item = Decomposable> + '_ {
        self.components.iter().map(|(i, c)| Decomposable { coeff: c.clone(), indices: i.clone() })
    }
}

/// `coeff · ∂_{indices[0]} ∧ …`, viewed as the wedge of the vector fields
/// `coeff ∂_{indices[0]}, ∂_{indices[1]}, …`.
#[derive(Clone)]
struct Decomposable {
    coeff: Poly,
    indices: Vec<usize>,
}

impl Decomposable {
    /// Coefficient and index of the `r`-th vector-field factor.
    fn factor(&self, r: usize) -> (Poly, usize) {
        if r == 0 {
            (self.coeff.clone(), self.indices[0])
        } else {
            (Poly::one(self.coeff.dim()), self.indices[r])
        }
    }

    /// The wedge of all factors except the `r`-th, as (coefficient, indices).
    fn without(&self, r: usize) -> (Poly, Vec<usize>) {
        let dim = self.coeff.dim();
        let coeff = if r == 0 { Poly::one(dim) } else { self.coeff.clone() };
        let mut idx = self.indices.clone();
        idx.remove(r);
        (coeff, idx)
    }
}

/// `X ∧ Y`; grades add.
pub fn mv_wedge(x: &MultiVectorField, y: &MultiVectorField) -> Result<MultiVectorField> {
    if x.dim != y.dim {
        return Err(Error::DimMismatch(x.dim, y.dim));
    }
    let mut out = MultiVectorField::zero(x.dim, x.grade + y.grade);
    for (i, a) in &x.components {
        for (j, b) in &y.components {
            let mut idx = i.clone();
            idx.extend_from_slice(j);
            out.add_component(idx, a * b);
        }
    }
    Ok(out)
}

/// Lie bracket of `f ∂_a` and `g ∂_b`: `f ∂_a g ∂_b − g ∂_b f ∂_a`.
fn vf_bracket(f: &Poly, a: usize, g: &Poly, b: usize) -> [(Poly, usize); 2] {
    let dag = g.partial(a).expect("index checked");
    let dbf = f.partial(b).expect("index checked");
    [(f * &dag, b), (-&(g * &dbf), a)]
}

/// The Schouten–Nijenhuis bracket `[X, Y]`, of grade `k + l − 1`.
pub fn schouten(x: &MultiVectorField, y: &MultiVectorField) -> Result<MultiVectorField> {
    if x.dim != y.dim {
        return Err(Error::DimMismatch(x.dim, y.dim));
    }
    let (k, l) = (x.grade, y.grade);
    if k == 0 && l == 0 {
        return Ok(MultiVectorField::zero(x.dim, 0));
    }
    if k == 0 {
        // [f, Y] = (−1)^l [Y, f]
        let r = schouten(y, x)?;
        return Ok(if l % 2 == 0 { r } else { r.scale(&-Rational::one()) });
    }
    let dim = x.dim;
    let mut out = MultiVectorField::zero(dim, k + l - 1);
    if l == 0 {
        let g = y.as_function();
        for dx in x.decomposables() {
            for i in 0..k {
                let (c, a) = dx.factor(i);
                let xi_g = &c * &g.partial(a)?;
                let (rest_c, rest_idx) = dx.without(i);
                // sign (−1)^{k−i} with 1-based i
                let sign = if (k - (i + 1)) % 2 == 0 { 1 } else { -1 };
                out.add_component(rest_idx, (&xi_g * &rest_c).scale(&rat_int(sign)));
            }
        }
        return Ok(out);
    }
    for dx in x.decomposables() {
        for dy in y.decomposables() {
            for i in 0..k {
                let (f, a) = dx.factor(i);
                let (xc, xrest) = dx.without(i);
                for j in 0..l {
                    let (g, b) = dy.factor(j);
                    let (yc, yrest) = dy.without(j);
                    // 1-based (−1)^{i+j} equals 0-based (−1)^{i+j}
                    let sign = if (i + j) % 2 == 0 { rat_int(1) } else { rat_int(-1) };
                    let rest = &(&xc * &yc).scale(&sign);
                    for (h, c) in vf_bracket(&f, a, &g, b) {
                        if h.is_zero() {
                            continue;
                        }
                        let mut idx = vec![c];
                        idx.extend_from_slice(&xrest);
                        idx.extend_from_slice(&yrest);
                        out.add_component(idx, &h * rest);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `½ [π, π]`; zero exactly when `π` is Poisson.
pub fn jacobiator(pi: &MultiVectorField) -> Result<MultiVectorField> {
    if pi.grade != 2 {
        return Err(Error::WrongGrade { expected: 2, got: pi.grade });
    }
    Ok(schouten(pi, pi)?.scale(&rat(1, 2)))
}

pub fn is_poisson(pi: &MultiVectorField) -> Result<bool> {
    Ok(jacobiator(pi)?.is_zero())
}

/// `{f, g} = Σ_{i<j} π^{ij} (∂_i f ∂_j g − ∂_j f ∂_i g)`, so `{x_i, x_j} = π^{ij}`.
pub fn poisson_bracket(pi: &MultiVectorField, f: &Poly, g: &Poly) -> Result<Poly> {
    if pi.grade != 2 {
        return Err(Error::WrongGrade { expected: 2, got: pi.grade });
    }
    if f.dim() != pi.dim {
        return Err(Error::DimMismatch(pi.dim, f.dim()));
    }
    if g.dim() != pi.dim {
        return Err(Error::DimMismatch(pi.dim, g.dim()));
    }
    let mut out = Poly::zero(pi.dim);
    for (ij, c) in &pi.components {
        let (i, j) = (ij[0], ij[1]);
        let t = &(&f.partial(i)? * &g.partial(j)?) - &(&f.partial(j)? * &g.partial(i)?);
        out += &(c * &t);
    }
    Ok(out)
}

/// Parses `"x3 d1^d2 + x1 d2^d3 + x2 d3^d1"`. Text without any `d<i>` is a grade-0 field.
pub fn parse_multivector(text: &str, dim: usize) -> Result<MultiVectorField> {
    let bytes = text.as_bytes();
    let mut wedges: Vec<(usize, usize, Vec<usize>)> = Vec::new();
    let mut p = 0;
    while p < bytes.len() {
        if bytes[p] == b'd' {
            let start = p;
            let mut idx = Vec::new();
            loop {
                if p >= bytes.len() || bytes[p] != b'd' {
                    return Err(Error::Parse { pos: p, msg: "expected 'd<i>'".into() });
                }
                p += 1;
                let ds = p;
                while p < bytes.len() && bytes[p].is_ascii_digit() {
                    p += 1;
                }
                let i: usize = text[ds..p]
                    .parse()
                    .map_err(|_| Error::Parse { pos: ds, msg: "expected index after 'd'".into() })?;
                if i == 0 || i > dim {
                    return Err(Error::Parse { pos: ds, msg: format!("index d{i} out of range for dimension {dim}") });
                }
                idx.push(i);
                let mut q = p;
                while q < bytes.len() && bytes[q] == b' ' {
                    q += 1;
                }
                if q < bytes.len() && bytes[q] == b'^' {
                    p = q + 1;
                    while p < bytes.len() && bytes[p] == b' ' {
                        p += 1;
                    }
                } else {
                    break;
                }
            }
            wedges.push((start, p, idx));
        } else {
            p += 1;
        }
    }
    if wedges.is_empty() {
        return Ok(MultiVectorField::function(parse_poly(text, dim)?));
    }
    let grade = wedges[0].2.len();
    let mut terms = Vec::new();
    let mut prev_end = 0;
    for (start, end, idx) in &wedges {
        if idx.len() != grade {
            return Err(Error::Parse { pos: *start, msg: "mixed grades in multivector expression".into() });
        }
        let seg = text[prev_end..*start].trim();
        let seg = seg.strip_prefix('+').map(str::trim).unwrap_or(seg);
        let coeff = match seg {
            "" => Poly::one(dim),
            "-" => -&Poly::one(dim),
            s => {
                let (neg, body) = match s.strip_prefix('-') {
                    Some(b) => (true, b.trim()),
                    None => (false, s),
                };
                let body = body.strip_suffix('*').map(str::trim).unwrap_or(body);
                let c = parse_poly(body, dim).map_err(|e| shift_pos(e, prev_end))?;
                if neg {
                    -&c
                } else {
                    c
                }
            }
        };
        terms.push((coeff, idx.clone()));
        prev_end = *end;
    }
    if !text[prev_end..].trim().is_empty() {
        return Err(Error::Parse { pos: prev_end, msg: "trailing text after last wedge term".into() });
    }
    MultiVectorField::from_terms(dim, grade, terms)
}

fn shift_pos(e: Error, by: usize) -> Error {
    match e {
        Error::Parse { pos, msg } => Error::Parse { pos: pos + by, msg },
        other => other,
    }
}

impl fmt::Display for MultiVectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.is_empty() {
            return write!(f, "0");
        }
        if self.grade == 0 {
            return write!(f, "{}", self.as_function());
        }
        for (n, (idx, c)) in self.components.iter().enumerate() {
            let wedge: Vec<String> = idx.iter().map(|i| format!("d{i}")).collect();
            let s = c.to_string();
            let coeff = if c.num_terms() > 1 {
                format!("({s}) ")
            } else if s == "1" {
                String::new()
            } else if s == "-1" {
                "-".to_string()
            } else {
                format!("{s} ")
            };
            match (n, coeff.strip_prefix('-')) {
                (0, _) => write!(f, "{coeff}")?,
                (_, Some(rest)) => write!(f, " - {rest}")?,
                (_, None) => write!(f, " + {coeff}")?,
            }
            write!(f, "{}", wedge.join("^"))?;
        }
        Ok(())
    }
}

impl fmt::Debug for MultiVectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MV[d={},k={}]({})", self.dim, self.grade, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mv(s: &str, d: usize) -> MultiVectorField {
        parse_multivector(s, d).unwrap()
    }

    #[test]
    fn wedge_examples() {
        let w = mv_wedge(&mv("d1", 2), &mv("d2", 2)).unwrap();
        assert_eq!(w.tensor(&[1, 2]), Poly::one(2));
        assert!(mv_wedge(&mv("d1", 2), &mv("d1", 2)).unwrap().is_zero());
        let w = mv_wedge(&mv("x2 d1", 2), &mv("d2", 2)).unwrap();
        assert_eq!(w, mv("x2 d1^d2", 2));
    }

    #[test]
    fn schouten_examples() {
        let r = schouten(&mv("d1", 1), &mv("x1", 1)).unwrap();
        assert_eq!(r.grade(), 0);
        assert_eq!(r.as_function(), Poly::one(1));
        assert!(schouten(&mv("d1^d2", 2), &mv("d1^d2", 2)).unwrap().is_zero());
        assert!(schouten(&mv("x1", 2), &mv("x2", 2)).unwrap().is_zero());
    }

    #[test]
    fn vector_field_bracket() {
        // [x1 ∂2, x2 ∂1] = x1 ∂1 − x2 ∂2
        let r = schouten(&mv("x1 d2", 2), &mv("x2 d1", 2)).unwrap();
        assert_eq!(r, mv("x1 d1 - x2 d2", 2));
    }

    #[test]
    fn jacobiator_examples() {
        let su2 = mv("x3 d1^d2 + x1 d2^d3 + x2 d3^d1", 3);
        assert!(jacobiator(&su2).unwrap().is_zero());
        assert!(jacobiator(&mv("3 d1^d2 - 1/2 d2^d3", 3)).unwrap().is_zero());
        assert!(matches!(jacobiator(&mv("d1", 2)), Err(Error::WrongGrade { .. })));
        // only ∂_1 π^{12} is nonzero and it pairs with π^{21}, so this one is Poisson
        assert!(jacobiator(&mv("x1 d1^d2 + d2^d3", 3)).unwrap().is_zero());
        let bad = jacobiator(&mv("x2 d1^d2 + d2^d3", 3)).unwrap();
        assert_eq!(bad, mv("-1 d1^d2^d3", 3));
    }

    #[test]
    fn poisson_bracket_examples() {
        let pi = mv("d1^d2", 2);
        let x1 = Poly::var(2, 1).unwrap();
        let x2 = Poly::var(2, 2).unwrap();
        assert_eq!(poisson_bracket(&pi, &x1, &x2).unwrap(), Poly::one(2));
        let f = &x1 * &x2;
        assert!(poisson_bracket(&pi, &f, &f).unwrap().is_zero());
        assert!(poisson_bracket(&pi, &f, &Poly::one(2)).unwrap().is_zero());
    }

    #[test]
    fn parse_and_print() {
        let x = mv("x3 d1^d2 + x1 d2^d3 + x2 d3^d1", 3);
        assert_eq!(x.tensor(&[1, 3]), -&Poly::var(3, 2).unwrap());
        assert_eq!(mv(&x.to_string(), 3), x);
        assert_eq!(mv("-(x1 + 1) d2^d1", 2), mv("(x1 + 1) d1^d2", 2));
        assert!(parse_multivector("x1 d1^d2 + d3", 3).is_err());
        assert!(parse_multivector("d1^d4", 3).is_err());
        assert_eq!(mv("x1^2 + 1", 2).grade(), 0);
    }

    #[test]
    fn constant_bivector_requires_skew() {
        let a = vec![vec![rat_int(0), rat_int(1)], vec![rat_int(1), rat_int(0)]];
        assert!(matches!(MultiVectorField::constant_bivector(&a), Err(Error::NotSkew)));
    }

    #[test]
    fn sort_sign_works() {
        let mut v = vec![3, 1, 2];
        assert_eq!(sort_sign(&mut v), Some(1));
        let mut v = vec![2, 1];
        assert_eq!(sort_sign(&mut v), Some(-1));
        let mut v = vec![2, 1, 2];
        assert_eq!(sort_sign(&mut v), None);
    }
}
