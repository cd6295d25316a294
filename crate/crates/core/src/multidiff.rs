//! Multidifferential operators with polynomial coefficients: the Hochschild side.
//!
//! An operator of arity `m+1` (Hochschild degree `m`) is a finite sum of terms
//! `c(x) ∂_{K_0} f_0 ⋯ ∂_{K_m} f_m`. Terms with equal derivative tuples are
//! merged, so two operators are equal iff their term maps are equal.
//! Arity 0 is allowed: such an operator is just a function.

use std::collections::BTreeMap;
use std::fmt;

use num::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multivector::{schouten, MultiVectorField};
use crate::parse::parse_poly;
use crate::poly::{rat, rat_int, MultiIndex, Poly, Rational};
use crate::series::{EpsSeries, SeriesCoeff};

#[derive(Clone, PartialEq, Eq)]
pub struct MultiDiffOp {
    dim: usize,
    arity: usize,
    terms: BTreeMap<Vec<MultiIndex>, Poly>,
}

impl MultiDiffOp {
    pub fn zero(dim: usize, arity: usize) -> Self {
        MultiDiffOp { dim, arity, terms: BTreeMap::new() }
    }

    /// Pointwise product of `arity` functions; arity 1 is the identity, arity 2 is `m`.
    pub fn pointwise(dim: usize, arity: usize) -> Self {
        let mut op = Self::zero(dim, arity);
        op.add_term(Poly::one(dim), vec![MultiIndex::empty(); arity]);
        op
    }

    pub fn identity(dim: usize) -> Self {
        Self::pointwise(dim, 1)
    }

    /// Arity-0 operator with value `f`.
    pub fn function(f: Poly) -> Self {
        let mut op = Self::zero(f.dim(), 0);
        op.add_term(f, vec![]);
        op
    }

    /// The first-order operator `Σ ξ^i ∂_i`.
    pub fn vector_field(x: &MultiVectorField) -> Result<Self> {
        if x.grade() != 1 {
            return Err(Error::WrongGrade { expected: 1, got: x.grade() });
        }
        let mut op = Self::zero(x.dim(), 1);
        for (i, c) in x.components() {
            op.add_term(c.clone(), vec![MultiIndex::single(i[0])]);
        }
        Ok(op)
    }

    pub fn add_term(&mut self, coeff: Poly, derivs: Vec<MultiIndex>) {
        assert_eq!(derivs.len(), self.arity, "derivative tuple length must equal arity");
        assert_eq!(coeff.dim(), self.dim, "coefficient dimension mismatch");
        if coeff.is_zero() {
            return;
        }
        let slot = self.terms.entry(derivs.clone()).or_insert_with(|| Poly::zero(self.dim));
        *slot += &coeff;
        if slot.is_zero() {
            self.terms.remove(&derivs);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Hochschild degree, `arity − 1`.
    pub fn degree(&self) -> i64 {
        self.arity as i64 - 1
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<MultiIndex>, &Poly)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Highest total derivative order of any term.
    pub fn total_order(&self) -> usize {
        self.terms.keys().map(|d| d.iter().map(MultiIndex::order).sum()).max().unwrap_or(0)
    }

    /// True when no term leaves a slot underived, i.e. `O(…, 1, …) = 0`.
    pub fn vanishes_on_constants(&self) -> bool {
        self.terms.keys().all(|d| d.iter().all(|k| !k.is_empty()))
    }

    pub fn scale(&self, c: &Rational) -> Self {
        let mut out = Self::zero(self.dim, self.arity);
        if c.is_zero() {
            return out;
        }
        for (d, p) in &self.terms {
            out.terms.insert(d.clone(), p.scale(c));
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let mut out = self.clone();
        out.add_assign(other);
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(&-Rational::one()))
    }

    fn add_assign(&mut self, other: &Self) {
        for (d, p) in &other.terms {
            self.add_term(p.clone(), d.clone());
        }
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimMismatch(self.dim, other.dim));
        }
        if self.arity != other.arity {
            return Err(Error::ArityMismatch { expected: self.arity, got: other.arity });
        }
        Ok(())
    }

    /// Largest absolute coefficient in any term.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(Poly::max_abs_coeff).fold(0.0, f64::max)
    }

    /// Drops coefficient entries with absolute value ≤ `tol` (for float-derived operators).
    pub fn chop(&self, tol: f64) -> Self {
        let mut out = Self::zero(self.dim, self.arity);
        for (d, p) in &self.terms {
            let q = p.map_coeffs(|c| if crate::poly::rat_to_f64(c).abs() <= tol { Rational::zero() } else { c.clone() });
            out.add_term(q, d.clone());
        }
        out
    }

    /// Swaps the two arguments of a bidifferential operator.
    pub fn transpose(&self) -> Result<Self> {
        if self.arity != 2 {
            return Err(Error::ArityMismatch { expected: 2, got: self.arity });
        }
        let mut out = Self::zero(self.dim, 2);
        for (d, p) in &self.terms {
            out.add_term(p.clone(), vec![d[1].clone(), d[0].clone()]);
        }
        Ok(out)
    }
}

impl SeriesCoeff for MultiDiffOp {
    fn zero_like(&self) -> Self {
        MultiDiffOp::zero(self.dim, self.arity)
    }
    fn is_zero(&self) -> bool {
        MultiDiffOp::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        MultiDiffOp::add(self, other).expect("series payloads share shape")
    }
    fn sub(&self, other: &Self) -> Self {
        MultiDiffOp::sub(self, other).expect("series payloads share shape")
    }
}

/// `Σ_terms c · Π_slots ∂_{K_slot} f_slot`.
pub fn op_apply(op: &MultiDiffOp, fs: &[Poly]) -> Result<Poly> {
    if fs.len() != op.arity {
        return Err(Error::ArityMismatch { expected: op.arity, got: fs.len() });
    }
    for f in fs {
        if f.dim() != op.dim {
            return Err(Error::DimMismatch(op.dim, f.dim()));
        }
    }
    let mut out = Poly::zero(op.dim);
    for (derivs, c) in &op.terms {
        let mut t = c.clone();
        for (k, f) in derivs.iter().zip(fs) {
            if t.is_zero() {
                break;
            }
            t = &t * &f.apply_multiindex(k)?;
        }
        out += &t;
    }
    Ok(out)
}

/// Every way of handing the entries of `k` to `targets` bins, as per-bin multi-indices.
/// Entries are distributed position by position, so multiplicities come out right.
fn leibniz_splits(k: &MultiIndex, targets: usize) -> Vec<Vec<MultiIndex>> {
    let mut out: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); targets]];
    for &i in k.entries() {
        let mut next = Vec::with_capacity(out.len() * targets);
        for split in &out {
            for t in 0..targets {
                let mut s = split.clone();
                s[t].push(i);
                next.push(s);
            }
        }
        out = next;
    }
    out.into_iter().map(|s| s.into_iter().map(MultiIndex::new).collect()).collect()
}

/// Partial composition `φ ∘_i ψ`: the output of ψ is fed into slot `i` of φ.
pub fn compose_i(phi: &MultiDiffOp, psi: &MultiDiffOp, i: usize) -> Result<MultiDiffOp> {
    if phi.dim != psi.dim {
        return Err(Error::DimMismatch(phi.dim, psi.dim));
    }
    if i >= phi.arity {
        return Err(Error::SlotOutOfRange { slot: i, arity: phi.arity });
    }
    let n1 = psi.arity;
    let mut out = MultiDiffOp::zero(phi.dim, phi.arity + n1 - 1);
    for (kd, c) in &phi.terms {
        for (ld, c2) in &psi.terms {
            for split in leibniz_splits(&kd[i], n1 + 1) {
                let coeff = c2.apply_multiindex(&split[0])?;
                if coeff.is_zero() {
                    continue;
                }
                let mut derivs = Vec::with_capacity(out.arity);
                derivs.extend_from_slice(&kd[..i]);
                for (j, l) in ld.iter().enumerate() {
                    derivs.push(l.join(&split[j + 1]));
                }
                derivs.extend_from_slice(&kd[i + 1..]);
                out.add_term(c * &coeff, derivs);
            }
        }
    }
    Ok(out)
}

fn sign(e: i64) -> Rational {
    if e.rem_euclid(2) == 0 {
        Rational::one()
    } else {
        -Rational::one()
    }
}

/// Pre-Lie product `φ ∘ ψ = Σ_i (−1)^{n i} φ ∘_i ψ`, `n` the degree of ψ.
pub fn pre_lie(phi: &MultiDiffOp, psi: &MultiDiffOp) -> Result<MultiDiffOp> {
    if phi.dim != psi.dim {
        return Err(Error::DimMismatch(phi.dim, psi.dim));
    }
    let n = psi.degree();
    let arity = (phi.arity + psi.arity).saturating_sub(1);
    let mut out = MultiDiffOp::zero(phi.dim, arity);
    for i in 0..phi.arity {
        out.add_assign(&compose_i(phi, psi, i)?.scale(&sign(n * i as i64)));
    }
    Ok(out)
}

/// Gerstenhaber bracket `[φ, ψ] = φ∘ψ − (−1)^{mn} ψ∘φ`.
///
/// Two functions (degree −1 each) bracket into degree −2, which is the zero space;
/// that case returns the zero function.
pub fn gerstenhaber(phi: &MultiDiffOp, psi: &MultiDiffOp) -> Result<MultiDiffOp> {
    if phi.dim != psi.dim {
        return Err(Error::DimMismatch(phi.dim, psi.dim));
    }
    if phi.arity == 0 && psi.arity == 0 {
        return Ok(MultiDiffOp::zero(phi.dim, 0));
    }
    let (m, n) = (phi.degree(), psi.degree());
    let a = pre_lie(phi, psi)?;
    let b = pre_lie(psi, phi)?;
    a.sub(&b.scale(&sign(m * n)))
}

/// Hochschild differential `d_m ψ = [m, ψ]`.
pub fn hochschild_d(psi: &MultiDiffOp) -> MultiDiffOp {
    gerstenhaber(&MultiDiffOp::pointwise(psi.dim, 2), psi).expect("same dimension")
}

/// The alternating-sum form of `d_m`, written with compositions and multiplied by
/// `(−1)^n` so that it coincides with [`hochschild_d`]:
/// `f_0 ψ(f_1,…) + Σ_i (−1)^{i+1} ψ(…, f_i f_{i+1}, …) + (−1)^n ψ(…, f_n) f_{n+1}`.
pub fn hochschild_d_explicit(psi: &MultiDiffOp) -> MultiDiffOp {
    let dim = psi.dim;
    let n = psi.degree();
    let m = MultiDiffOp::pointwise(dim, 2);
    if psi.arity == 0 {
        // f_0 ψ − ψ f_0
        return MultiDiffOp::zero(dim, 1);
    }
    let mut out = compose_i(&m, psi, 1).expect("slot 1 exists");
    for i in 0..psi.arity {
        out.add_assign(&compose_i(psi, &m, i).expect("slot in range").scale(&sign(i as i64 + 1)));
    }
    out.add_assign(&compose_i(&m, psi, 0).expect("slot 0 exists").scale(&sign(n)));
    out.scale(&sign(n))
}

fn permutations(k: usize) -> Vec<(Vec<usize>, i64)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut out);
    out.into_iter()
        .map(|p| {
            let inv = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).filter(|&(a, b)| p[a] > p[b]).count();
            (p, if inv % 2 == 0 { 1 } else { -1 })
        })
        .collect()
}

fn factorial(k: usize) -> i64 {
    (1..=k as i64).product()
}

/// The HKR map: `ξ_1 ∧ ⋯ ∧ ξ_k ↦ (1/k!) Σ_σ sgn(σ) ξ_{σ(1)}(f_1) ⋯ ξ_{σ(k)}(f_k)`.
/// Functions map to themselves (arity-0 operators).
pub fn hkr_u1(x: &MultiVectorField) -> MultiDiffOp {
    let k = x.grade();
    let mut out = MultiDiffOp::zero(x.dim(), k);
    let norm = rat(1, factorial(k));
    let perms = permutations(k);
    for (idx, c) in x.components() {
        for (p, s) in &perms {
            let derivs = p.iter().map(|&j| MultiIndex::single(idx[j])).collect();
            out.add_term(c.scale(&(&norm * rat_int(*s))), derivs);
        }
    }
    out
}

/// `[U₁X, U₁Y] − U₁[X, Y]`, the failure of the HKR map to preserve brackets.
pub fn u1_defect(x: &MultiVectorField, y: &MultiVectorField) -> Result<MultiDiffOp> {
    let lhs = gerstenhaber(&hkr_u1(x), &hkr_u1(y))?;
    let rhs = hkr_u1(&schouten(x, y)?);
    lhs.sub(&rhs)
}

/// An associative deformation `f ⋆ g = fg + Σ_k B_k(f,g) ε^k`, truncated at order N.
#[derive(Clone, PartialEq)]
pub struct StarProduct {
    dim: usize,
    bidiff: Vec<MultiDiffOp>,
}

impl StarProduct {
    /// `bidiff[k-1]` is `B_k`. Each must be bidifferential and vanish on constants.
    pub fn new(dim: usize, bidiff: Vec<MultiDiffOp>) -> Result<Self> {
        for b in &bidiff {
            if b.dim != dim {
                return Err(Error::DimMismatch(dim, b.dim));
            }
            if b.arity != 2 {
                return Err(Error::ArityMismatch { expected: 2, got: b.arity });
            }
            if !b.vanishes_on_constants() {
                return Err(Error::NotVanishingOnConstants);
            }
        }
        Ok(StarProduct { dim, bidiff })
    }

    /// The undeformed product up to order `order`.
    pub fn trivial(dim: usize, order: usize) -> Self {
        StarProduct { dim, bidiff: vec![MultiDiffOp::zero(dim, 2); order] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.bidiff.len()
    }

    /// `B_k`, with `B_0 = m`.
    pub fn b(&self, k: usize) -> MultiDiffOp {
        if k == 0 {
            MultiDiffOp::pointwise(self.dim, 2)
        } else {
            self.bidiff[k - 1].clone()
        }
    }

    pub fn bidiff(&self) -> &[MultiDiffOp] {
        &self.bidiff
    }

    /// `f ⋆ g` as a truncated series.
    pub fn star(&self, f: &Poly, g: &Poly) -> Result<EpsSeries<Poly>> {
        let n = self.order();
        self.star_series(&EpsSeries::constant(f.clone(), n), &EpsSeries::constant(g.clone(), n))
    }

    /// `ε`-bilinear extension to series arguments.
    pub fn star_series(&self, a: &EpsSeries<Poly>, b: &EpsSeries<Poly>) -> Result<EpsSeries<Poly>> {
        let n = self.order();
        if a.order() != n {
            return Err(Error::OrderMismatch(n, a.order()));
        }
        if b.order() != n {
            return Err(Error::OrderMismatch(n, b.order()));
        }
        let mut out = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let mut acc = Poly::zero(self.dim);
            for l in 0..=k {
                let bl = self.b(l);
                for i in 0..=(k - l) {
                    acc += &op_apply(&bl, &[a.coeff(i).clone(), b.coeff(k - l - i).clone()])?;
                }
            }
            out.push(acc);
        }
        Ok(EpsSeries::new(out))
    }

    /// `B_1⁻(f,g) = ½(B_1(f,g) − B_1(g,f))`.
    pub fn b1_skew(&self) -> MultiDiffOp {
        let b1 = self.b(1);
        b1.sub(&b1.transpose().unwrap()).unwrap().scale(&rat(1, 2))
    }

    /// `B_1⁺(f,g) = ½(B_1(f,g) + B_1(g,f))`.
    pub fn b1_sym(&self) -> MultiDiffOp {
        let b1 = self.b(1);
        b1.add(&b1.transpose().unwrap()).unwrap().scale(&rat(1, 2))
    }
}

/// Order-`k` coefficient `½ Σ_{i+j=k} [B_i, B_j]` of the Maurer–Cartan expression for
/// `m + B`; it equals `d_m B_k + ½ Σ_{i,j≥1} [B_i, B_j]` and, applied to `(f,g,h)`,
/// the order-`k` associator `(f⋆g)⋆h − f⋆(g⋆h)`.
pub fn mc_residual(s: &StarProduct) -> EpsSeries<MultiDiffOp> {
    let n = s.order();
    let half = rat(1, 2);
    let coeffs = (0..=n)
        .map(|k| {
            let mut acc = MultiDiffOp::zero(s.dim, 3);
            for i in 0..=k {
                let br = gerstenhaber(&s.b(i), &s.b(k - i)).expect("same dimension");
                acc.add_assign(&br.scale(&half));
            }
            acc
        })
        .collect();
    EpsSeries::new(coeffs)
}

/// Formal operator `D = id + Σ_k D_k ε^k` with every `D_k` vanishing on constants.
#[derive(Clone, PartialEq)]
pub struct GaugeOp {
    dim: usize,
    diffops: Vec<MultiDiffOp>,
}

impl GaugeOp {
    pub fn new(dim: usize, diffops: Vec<MultiDiffOp>) -> Result<Self> {
        for d in &diffops {
            if d.dim != dim {
                return Err(Error::DimMismatch(dim, d.dim));
            }
            if d.arity != 1 {
                return Err(Error::ArityMismatch { expected: 1, got: d.arity });
            }
            if !d.vanishes_on_constants() {
                return Err(Error::NotVanishingOnConstants);
            }
        }
        Ok(GaugeOp { dim, diffops })
    }

    pub fn identity(dim: usize, order: usize) -> Self {
        GaugeOp { dim, diffops: vec![MultiDiffOp::zero(dim, 1); order] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.diffops.len()
    }

    /// `D_k`, with `D_0 = id`.
    pub fn d(&self, k: usize) -> MultiDiffOp {
        if k == 0 {
            MultiDiffOp::identity(self.dim)
        } else {
            self.diffops[k - 1].clone()
        }
    }

    pub fn diffops(&self) -> &[MultiDiffOp] {
        &self.diffops
    }

    /// Formal inverse: `E_0 = id`, `E_k = −Σ_{i=1}^{k} D_i ∘ E_{k−i}`.
    pub fn inverse(&self) -> GaugeOp {
        let n = self.order();
        let mut e: Vec<MultiDiffOp> = vec![MultiDiffOp::identity(self.dim)];
        for k in 1..=n {
            let mut acc = MultiDiffOp::zero(self.dim, 1);
            for i in 1..=k {
                acc.add_assign(&compose_i(&self.d(i), &e[k - i], 0).expect("arity 1"));
            }
            e.push(acc.scale(&-Rational::one()));
        }
        e.remove(0);
        GaugeOp { dim: self.dim, diffops: e }
    }

    pub fn apply(&self, f: &Poly) -> Result<EpsSeries<Poly>> {
        (0..=self.order()).map(|k| op_apply(&self.d(k), std::slice::from_ref(f))).collect::<Result<Vec<_>>>().map(EpsSeries::new)
    }
}

/// One term of the operator JSON form.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct OpTermJson {
    pub coeff: String,
    pub derivs: Vec<Vec<usize>>,
}

/// Operator as a list of `{coeff, derivs}` terms.
pub fn op_to_json(op: &MultiDiffOp) -> Vec<OpTermJson> {
    op.terms
        .iter()
        .map(|(d, c)| OpTermJson { coeff: c.to_string(), derivs: d.iter().map(|k| k.entries().to_vec()).collect() })
        .collect()
}

pub fn op_from_json(terms: &[OpTermJson], dim: usize, arity: usize) -> Result<MultiDiffOp> {
    let mut op = MultiDiffOp::zero(dim, arity);
    for t in terms {
        if t.derivs.len() != arity {
            return Err(Error::ArityMismatch { expected: arity, got: t.derivs.len() });
        }
        let mut derivs = Vec::with_capacity(arity);
        for k in &t.derivs {
            for &i in k {
                crate::poly::check_index(i, dim)?;
            }
            derivs.push(MultiIndex::new(k.clone()));
        }
        op.add_term(parse_poly(&t.coeff, dim)?, derivs);
    }
    Ok(op)
}

/// `{dim, order, B: [operator per order]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StarProductJson {
    pub dim: usize,
    pub order: usize,
    #[serde(rename = "B")]
    pub b: Vec<Vec<OpTermJson>>,
}

impl StarProduct {
    pub fn to_json(&self) -> StarProductJson {
        StarProductJson { dim: self.dim, order: self.order(), b: self.bidiff.iter().map(op_to_json).collect() }
    }

    pub fn from_json(j: &StarProductJson) -> Result<Self> {
        if j.b.len() != j.order {
            return Err(Error::OrderMismatch(j.order, j.b.len()));
        }
        let ops = j.b.iter().map(|t| op_from_json(t, j.dim, 2)).collect::<Result<Vec<_>>>()?;
        StarProduct::new(j.dim, ops)
    }
}

/// `{dim, order, D: [operator per order]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GaugeOpJson {
    pub dim: usize,
    pub order: usize,
    #[serde(rename = "D")]
    pub d: Vec<Vec<OpTermJson>>,
}

impl GaugeOp {
    pub fn to_json(&self) -> GaugeOpJson {
        GaugeOpJson { dim: self.dim, order: self.order(), d: self.diffops.iter().map(op_to_json).collect() }
    }

    pub fn from_json(j: &GaugeOpJson) -> Result<Self> {
        if j.d.len() != j.order {
            return Err(Error::OrderMismatch(j.order, j.d.len()));
        }
        let ops = j.d.iter().map(|t| op_from_json(t, j.dim, 1)).collect::<Result<Vec<_>>>()?;
        GaugeOp::new(j.dim, ops)
    }
}

impl fmt::Display for MultiDiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, (d, c)) in self.terms.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            let slots: Vec<String> = d
                .iter()
                .map(|k| if k.is_empty() { "id".to_string() } else { format!("d{}", k) })
                .collect();
            write!(f, "({c})*[{}]", slots.join(" ⊗ "))?;
        }
        Ok(())
    }
}

impl fmt::Debug for MultiDiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Op[d={},arity={}]({})", self.dim, self.arity, self)
    }
}
