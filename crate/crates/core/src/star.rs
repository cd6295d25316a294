//! Star products from graphs: assembly, the Moyal closed form, associativity
//! residuals, gauge equivalence, skew normalization, low-order formality checks,
//! and the exact solve for order-2 weights.
//!
//! Normalization: `B_n = (2^n / n!) Σ_Γ w_Γ B_Γ(π, …, π)` over one representative per
//! star-ordering class, so that `B_1(f, g) = Σ π^{ij} ∂_i f ∂_j g` and constant `π`
//! reproduces Moyal with `α = π`.

use std::collections::BTreeMap;

use num::{BigInt, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::graphs::{assemble_operator, enumerate_graphs, star_product_graphs, AdmissibleGraph};
use crate::linalg;
use crate::multidiff::{compose_i, gerstenhaber, hkr_u1, hochschild_d, op_apply, u1_defect, GaugeOp, MultiDiffOp, StarProduct};
use crate::multivector::{is_poisson, MultiVectorField};
use crate::poly::{rat, rat_from_f64, rat_int, rat_to_f64, Exponent, MultiIndex, Poly, Rational};
use crate::series::EpsSeries;
use crate::weights::{
    known_weight, mc_weight, Provenance, WeightCache, WeightCacheEntry, WeightEstimate, WeightValue,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightMode {
    /// Sample every weight that is not identically zero.
    Mc { samples: u64, seed: u64 },
    /// Exact values only; a missing weight is an error.
    Cache,
    /// Exact values where known, cached estimates next, sampling otherwise.
    Hybrid { samples: u64, seed: u64 },
}

#[derive(Clone, Debug)]
pub struct WeightSource {
    pub mode: WeightMode,
    pub tolerance: f64,
    pub cache: WeightCache,
}

impl WeightSource {
    pub fn mc(samples: u64, seed: u64) -> Self {
        WeightSource { mode: WeightMode::Mc { samples, seed }, tolerance: 0.02, cache: WeightCache::new() }
    }

    pub fn cache(cache: WeightCache) -> Self {
        WeightSource { mode: WeightMode::Cache, tolerance: 0.0, cache }
    }

    pub fn hybrid(cache: WeightCache, samples: u64, seed: u64) -> Self {
        WeightSource { mode: WeightMode::Hybrid { samples, seed }, tolerance: 0.02, cache }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    /// Weight of `g` in its own star ordering.
    pub fn weight(&self, g: &AdmissibleGraph) -> Result<Rational> {
        let trivial = g.n() == 0 || g.has_parallel_edges() || g.edge_count() != g.expected_edges();
        match self.mode {
            WeightMode::Mc { samples, seed } => {
                if trivial {
                    return Ok(known_weight(g, None).expect("trivial weights are known"));
                }
                Ok(rat_from_f64(mc_weight(g, samples, seed).mean))
            }
            WeightMode::Cache => known_weight(g, Some(&self.cache)).ok_or_else(|| Error::MissingWeight(g.key().0)),
            WeightMode::Hybrid { samples, seed } => {
                if let Some(w) = known_weight(g, Some(&self.cache)) {
                    return Ok(w);
                }
                if let Some(e) = self.cache.get(&g.key()) {
                    let s = crate::weights::ordering_sign(g) as f64;
                    return Ok(rat_from_f64(s * e.value.as_f64()));
                }
                Ok(rat_from_f64(mc_weight(g, samples, seed).mean))
            }
        }
    }
}

fn factorial(n: usize) -> BigInt {
    (1..=n).map(BigInt::from).product()
}

/// The star product of a Poisson bivector up to order `order`. A non-Poisson
/// bivector is refused unless `force` is set.
pub fn star_expand(pi: &MultiVectorField, order: usize, source: &WeightSource, force: bool) -> Result<StarProduct> {
    if pi.grade() != 2 {
        return Err(Error::WrongGrade { expected: 2, got: pi.grade() });
    }
    if !force && !is_poisson(pi)? {
        return Err(Error::NotPoisson);
    }
    let dim = pi.dim();
    let mut bs = Vec::with_capacity(order);
    for n in 1..=order {
        let xs = vec![pi.clone(); n];
        let mut acc = MultiDiffOp::zero(dim, 2);
        for g in star_product_graphs(n) {
            let op = assemble_operator(&g, &xs)?;
            if op.is_zero() {
                continue;
            }
            let w = source.weight(&g)?;
            acc = acc.add(&op.scale(&w))?;
        }
        let norm = Rational::new(BigInt::from(2).pow(n as u32), factorial(n));
        bs.push(acc.scale(&norm));
    }
    StarProduct::new(dim, bs)
}

/// Closed-form Moyal product for a constant skew matrix `alpha`.
pub fn moyal(alpha: &[Vec<Rational>], order: usize) -> Result<StarProduct> {
    let pi = MultiVectorField::constant_bivector(alpha)?;
    let dim = pi.dim();
    let pairs: Vec<(usize, usize, Rational)> = (1..=dim)
        .flat_map(|i| (1..=dim).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, alpha[i - 1][j - 1].clone()))
        .filter(|(_, _, a)| !a.is_zero())
        .collect();
    let mut bs = Vec::with_capacity(order);
    let mut layer: Vec<(Rational, Vec<usize>, Vec<usize>)> = vec![(Rational::one(), vec![], vec![])];
    for n in 1..=order {
        let mut next = Vec::with_capacity(layer.len() * pairs.len());
        for (c, is, js) in &layer {
            for (i, j, a) in &pairs {
                let mut is = is.clone();
                let mut js = js.clone();
                is.push(*i);
                js.push(*j);
                next.push((c * a, is, js));
            }
        }
        layer = next;
        let mut op = MultiDiffOp::zero(dim, 2);
        let norm = Rational::new(BigInt::one(), factorial(n));
        for (c, is, js) in &layer {
            op.add_term(Poly::constant(dim, c * &norm), vec![MultiIndex::new(is.clone()), MultiIndex::new(js.clone())]);
        }
        bs.push(op);
    }
    StarProduct::new(dim, bs)
}

/// `(f⋆g)⋆h − f⋆(g⋆h)` up to the product's order.
pub fn assoc_residual(s: &StarProduct, f: &Poly, g: &Poly, h: &Poly) -> Result<EpsSeries<Poly>> {
    let n = s.order();
    let lift = |p: &Poly| EpsSeries::constant(p.clone(), n);
    let left = s.star_series(&s.star(f, g)?, &lift(h))?;
    let right = s.star_series(&lift(f), &s.star(g, h)?)?;
    left.sub(&right)
}

fn gauge_term(d: &GaugeOp, k: usize) -> MultiDiffOp {
    if k <= d.order() {
        d.d(k)
    } else {
        MultiDiffOp::zero(d.dim(), 1)
    }
}

/// `f ⋆' g = D⁻¹(Df ⋆ Dg)`, i.e. `B'_k = Σ_{a+l+b+c=k} E_a ∘ B_l ∘ (D_b ⊗ D_c)`
/// with `E = D⁻¹`. Gauge terms beyond the gauge's order are zero.
pub fn gauge_transform(s: &StarProduct, d: &GaugeOp) -> Result<StarProduct> {
    if s.dim() != d.dim() {
        return Err(Error::DimMismatch(s.dim(), d.dim()));
    }
    let n = s.order();
    let padded = GaugeOp::new(d.dim(), (1..=n).map(|k| gauge_term(d, k)).collect())?;
    let e = padded.inverse();
    let mut inner: Vec<MultiDiffOp> = vec![MultiDiffOp::zero(s.dim(), 2); n + 1];
    for l in 0..=n {
        let bl = s.b(l);
        for b in 0..=(n - l) {
            let left = compose_i(&bl, &padded.d(b), 0)?;
            for c in 0..=(n - l - b) {
                let t = compose_i(&left, &padded.d(c), 1)?;
                inner[l + b + c] = inner[l + b + c].add(&t)?;
            }
        }
    }
    let mut bs = Vec::with_capacity(n);
    for k in 1..=n {
        let mut acc = MultiDiffOp::zero(s.dim(), 2);
        for a in 0..=k {
            acc = acc.add(&compose_i(&e.d(a), &inner[k - a], 0)?)?;
        }
        bs.push(acc);
    }
    StarProduct::new(s.dim(), bs)
}

fn monomial(exp: &[u32]) -> Poly {
    Poly::monomial(exp.to_vec(), Rational::one())
}

fn exponents(dim: usize, max_deg: u32) -> Vec<Exponent> {
    fn rec(i: usize, left: u32, e: &mut Vec<u32>, out: &mut Vec<Exponent>) {
        if i == e.len() {
            out.push(e.clone());
            return;
        }
        for k in 0..=left {
            e[i] = k;
            rec(i + 1, left - k, e, out);
        }
        e[i] = 0;
    }
    let mut out = Vec::new();
    rec(0, max_deg, &mut vec![0; dim], &mut out);
    out.sort_by_key(|e| (e.iter().sum::<u32>(), std::cmp::Reverse(e.clone())));
    out
}

/// `D_1` on monomials from `D_1(ab) = B_1⁺(a, b) + D_1(a) b + a D_1(b)`, starting from
/// zero on constants and coordinates. Every factorization of every monomial up to
/// `max_deg` must give the same value.
pub fn d1_on_monomials(s: &StarProduct, max_deg: u32) -> Result<BTreeMap<Exponent, Poly>> {
    let dim = s.dim();
    let sym = s.b1_sym();
    let mut table: BTreeMap<Exponent, Poly> = BTreeMap::new();
    for e in exponents(dim, max_deg) {
        let deg: u32 = e.iter().sum();
        if deg <= 1 {
            table.insert(e, Poly::zero(dim));
            continue;
        }
        let mut value: Option<Poly> = None;
        for a in exponents(dim, deg - 1) {
            if a.iter().sum::<u32>() == 0 || a.iter().zip(&e).any(|(x, y)| x > y) {
                continue;
            }
            let b: Exponent = e.iter().zip(&a).map(|(x, y)| x - y).collect();
            let (pa, pb) = (monomial(&a), monomial(&b));
            let v = &(&op_apply(&sym, &[pa.clone(), pb.clone()])? + &(&table[&a] * &pb)) + &(&pa * &table[&b]);
            match &value {
                None => value = Some(v),
                Some(prev) if *prev != v => {
                    return Err(Error::Inconsistent(format!(
                        "D1 of monomial {:?} depends on the grouping: {prev} vs {v}",
                        e
                    )))
                }
                Some(_) => {}
            }
        }
        table.insert(e, value.expect("degree ≥ 2 has a factorization"));
    }
    Ok(table)
}

fn multi_factorial(k: &[u32]) -> BigInt {
    k.iter().map(|&x| factorial(x as usize)).product()
}

fn falling(k: &[u32], l: &[u32]) -> BigInt {
    k.iter().zip(l).map(|(&a, &b)| factorial(a as usize) / factorial((a - b) as usize)).product()
}

fn exp_to_multiindex(k: &[u32]) -> MultiIndex {
    MultiIndex::new(k.iter().enumerate().flat_map(|(i, &c)| std::iter::repeat_n(i + 1, c as usize)).collect())
}

/// Recovers a differential operator from its values on monomials by triangular
/// inversion: `D(x^K) = Σ_{L ≤ K} c_L K!/(K−L)! x^{K−L}`.
fn operator_from_monomials(dim: usize, values: &BTreeMap<Exponent, Poly>, max_order: u32) -> MultiDiffOp {
    let mut coeffs: Vec<(Exponent, Poly)> = Vec::new();
    for k in exponents(dim, max_order) {
        let deg: u32 = k.iter().sum();
        if deg == 0 {
            continue;
        }
        let mut rest = values[&k].clone();
        for (l, c) in &coeffs {
            if l.iter().zip(&k).all(|(a, b)| a <= b) {
                let kl: Exponent = k.iter().zip(l).map(|(a, b)| a - b).collect();
                let t = (c * &monomial(&kl)).scale(&Rational::from_integer(falling(&k, l)));
                rest = &rest - &t;
            }
        }
        let c = rest.scale(&Rational::new(BigInt::one(), multi_factorial(&k)));
        if !c.is_zero() {
            coeffs.push((k, c));
        }
    }
    let mut op = MultiDiffOp::zero(dim, 1);
    for (k, c) in coeffs {
        op.add_term(c, vec![exp_to_multiindex(&k)]);
    }
    op
}

/// Gauges `s` so that `B_1` becomes skew. Returns the new product and the gauge
/// `D = id + ε D_1` used.
pub fn skew_normalize(s: &StarProduct) -> Result<(StarProduct, GaugeOp)> {
    let dim = s.dim();
    if s.order() == 0 {
        return Ok((s.clone(), GaugeOp::identity(dim, 0)));
    }
    let sym = s.b1_sym();
    let order = sym.terms().map(|(d, _)| d.iter().map(MultiIndex::order).sum::<usize>()).max().unwrap_or(0) as u32;
    let coeff_deg = sym.terms().map(|(_, c)| c.degree()).max().unwrap_or(0);
    let check_deg = (order + 2).max(4) + coeff_deg;
    let table = d1_on_monomials(s, check_deg)?;
    let d1 = operator_from_monomials(dim, &table, order);
    for (e, v) in &table {
        let got = op_apply(&d1, &[monomial(e)])?;
        if &got != v {
            return Err(Error::Inconsistent(format!("D1 is not a differential operator of order {order} on {e:?}")));
        }
    }
    let mut ds = vec![MultiDiffOp::zero(dim, 1); s.order()];
    ds[0] = d1;
    let gauge = GaugeOp::new(dim, ds)?;
    Ok((gauge_transform(s, &gauge)?, gauge))
}

/// `U_n(ξ_1, …, ξ_n) = Σ_Γ w_Γ B_Γ(ξ_1, …, ξ_n)` over graphs whose star sizes match
/// the grades; `U_1` is the HKR map.
pub fn formality_u(xs: &[MultiVectorField], source: &WeightSource) -> Result<MultiDiffOp> {
    let Some(first) = xs.first() else {
        return Err(Error::Unsupported("U_0 is not defined".into()));
    };
    if xs.len() == 1 {
        return Ok(hkr_u1(first));
    }
    let n = xs.len();
    let total: usize = xs.iter().map(MultiVectorField::grade).sum();
    if total + 2 < 2 * n {
        return Err(Error::Unsupported("grades too small for any admissible graph".into()));
    }
    let nbar = total + 2 - 2 * n;
    let mut acc = MultiDiffOp::zero(first.dim(), nbar);
    for g in enumerate_graphs(n, nbar, total) {
        if g.stars().iter().zip(xs).any(|(s, x)| s.len() != x.grade()) {
            continue;
        }
        let op = assemble_operator(&g, xs)?;
        if op.is_zero() {
            continue;
        }
        acc = acc.add(&op.scale(&source.weight(&g)?))?;
    }
    Ok(acc)
}

/// Formality residual applied to `fs`: `d_m U_1(ξ)` for one field and
/// `[U_1 X, U_1 Y] − U_1[X, Y] + d_m U_2(X, Y)` for two.
pub fn formality_residual(xs: &[MultiVectorField], fs: &[Poly], source: &WeightSource) -> Result<Poly> {
    let op = formality_operator(xs, source)?;
    op_apply(&op, fs)
}

/// The residual as an operator (see [`formality_residual`]).
pub fn formality_operator(xs: &[MultiVectorField], source: &WeightSource) -> Result<MultiDiffOp> {
    match xs {
        [x] => Ok(hochschild_d(&hkr_u1(x))),
        [x, y] => {
            if x.grade() == 0 || y.grade() == 0 {
                return Err(Error::Unsupported("formality residual needs grades ≥ 1".into()));
            }
            let defect = u1_defect(x, y)?;
            if x.grade() + y.grade() == 2 {
                // U_2 is a function here and d_m annihilates it
                return Ok(defect);
            }
            let u2 = formality_u(xs, source)?;
            let du2 = hochschild_d(&u2);
            if du2.arity() != defect.arity() {
                return Err(Error::ArityMismatch { expected: defect.arity(), got: du2.arity() });
            }
            defect.add(&du2)
        }
        _ => Err(Error::Unsupported(format!("formality residual for n = {}", xs.len()))),
    }
}

/// Key of an operator coefficient entry: derivative tuple and monomial.
type EntryKey = (Vec<MultiIndex>, Exponent);

fn entries(op: &MultiDiffOp) -> BTreeMap<EntryKey, Rational> {
    let mut m = BTreeMap::new();
    for (d, c) in op.terms() {
        for (e, r) in c.terms() {
            m.insert((d.clone(), e.clone()), r.clone());
        }
    }
    m
}

/// Poisson structures used to pin down the order-2 weights: the linear su(2)
/// structure, two planar ones, and Nambu brackets `{x_i, x_j} = ε_{ijk} ∂_k C`.
pub fn solve_structures() -> Vec<MultiVectorField> {
    use crate::multivector::parse_multivector;
    let mut out: Vec<MultiVectorField> =
        [("x3 d1^d2 + x1 d2^d3 + x2 d3^d1", 3), ("x1*x2 d1^d2", 2), ("(x1^2*x2 + x2^3) d1^d2", 2)]
            .iter()
            .map(|&(t, d)| parse_multivector(t, d).expect("valid"))
            .collect();
    for c in ["x1*x2*x3", "x1^2*x2 + x3^3", "x1^3*x2 + x2*x3^2 + x1*x3"] {
        let c = crate::parse::parse_poly(c, 3).expect("valid");
        let d = |i| c.partial(i).expect("index in range");
        let terms = vec![(d(3), vec![1, 2]), (d(1), vec![2, 3]), (d(2), vec![3, 1])];
        out.push(MultiVectorField::from_terms(3, 2, terms).expect("valid"));
    }
    out
}

#[derive(Clone, Debug)]
pub struct SolvedWeight {
    pub graph: AdmissibleGraph,
    pub value: Rational,
    pub estimate: WeightEstimate,
    /// Not determined by associativity; fixed from the estimate on the grid `1/GRID`.
    pub free: bool,
}

impl SolvedWeight {
    /// Distance from the estimate in units of its standard error.
    pub fn sigmas(&self) -> f64 {
        let d = (rat_to_f64(&self.value) - self.estimate.mean).abs();
        if self.estimate.stderr == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d / self.estimate.stderr
        }
    }
}

#[derive(Clone, Debug)]
pub struct WeightSolve {
    pub weights: Vec<SolvedWeight>,
    pub equations: usize,
    pub rank: usize,
}

/// Denominator of the grid free weights are rounded to.
pub const GRID: i64 = 48;

impl WeightSolve {
    pub fn to_cache(&self) -> WeightCache {
        let mut c = WeightCache::new();
        for w in &self.weights {
            c.insert(WeightCacheEntry {
                key: w.graph.key(),
                value: WeightValue::Exact(w.value.clone()),
                provenance: Provenance::AssociativitySolve,
                citation: Some(if w.free {
                    format!("order-2 associativity, free direction rounded to 1/{GRID} from MC")
                } else {
                    "order-2 associativity".to_string()
                }),
                stderr: None,
            });
        }
        c
    }

    pub fn all_within(&self, k: f64) -> bool {
        self.weights.iter().all(|w| w.sigmas() <= k)
    }
}

/// Solves `d_m B_2 + ½[B_1, B_1] = 0` for the order-2 weights over several Poisson
/// structures. Directions left free by the equations are set by a least-squares fit
/// to Monte Carlo estimates, rounded to multiples of `1/GRID`; the remaining weights
/// follow exactly.
pub fn solve_order2_weights(samples: u64, seed: u64) -> Result<WeightSolve> {
    let graphs = star_product_graphs(2);
    let k = graphs.len();
    let mut rows: Vec<Vec<Rational>> = Vec::new();
    let mut rhs: Vec<Rational> = Vec::new();
    for pi in solve_structures() {
        let b1 = assemble_operator(&AdmissibleGraph::fan(2), std::slice::from_ref(&pi))?;
        let base = entries(&gerstenhaber(&b1, &b1)?.scale(&rat(1, 2)));
        let cols: Vec<BTreeMap<EntryKey, Rational>> = graphs
            .iter()
            .map(|g| Ok(entries(&hochschild_d(&assemble_operator(g, &[pi.clone(), pi.clone()])?.scale(&rat_int(2))))))
            .collect::<Result<_>>()?;
        let mut keys: Vec<&EntryKey> = base.keys().collect();
        for c in &cols {
            keys.extend(c.keys());
        }
        keys.sort();
        keys.dedup();
        for key in keys {
            rows.push(cols.iter().map(|c| c.get(key).cloned().unwrap_or_else(Rational::zero)).collect());
            rhs.push(-base.get(key).cloned().unwrap_or_else(Rational::zero));
        }
    }
    let sol = linalg::solve(&rows, &rhs, k)?;
    let estimates: Vec<WeightEstimate> = graphs.iter().map(|g| mc_weight(g, samples, seed)).collect();
    // weighted least squares for the free parameters t: w = p + Σ t_j n_j
    let f = sol.free.len();
    let mut t = vec![Rational::zero(); f];
    if f > 0 {
        let wt: Vec<f64> = estimates.iter().map(|e| 1.0 / e.stderr.max(1e-6).powi(2)).collect();
        let nf: Vec<Vec<f64>> = sol.nullspace.iter().map(|v| v.iter().map(rat_to_f64).collect()).collect();
        let pf: Vec<f64> = sol.particular.iter().map(rat_to_f64).collect();
        let mut a = vec![vec![Rational::zero(); f]; f];
        let mut b = vec![Rational::zero(); f];
        for i in 0..f {
            for j in 0..f {
                a[i][j] = rat_from_f64((0..k).map(|g| wt[g] * nf[i][g] * nf[j][g]).sum());
            }
            b[i] = rat_from_f64((0..k).map(|g| wt[g] * nf[i][g] * (estimates[g].mean - pf[g])).sum());
        }
        let ls = linalg::solve(&a, &b, f)?;
        t = ls.particular.iter().map(|x| snap(rat_to_f64(x), GRID)).collect();
    }
    let mut values = sol.particular.clone();
    for (tj, nj) in t.iter().zip(&sol.nullspace) {
        for (v, n) in values.iter_mut().zip(nj) {
            *v += tj * n;
        }
    }
    let weights = graphs
        .into_iter()
        .zip(values)
        .zip(estimates)
        .enumerate()
        .map(|(i, ((graph, value), estimate))| SolvedWeight { graph, value, estimate, free: sol.free.contains(&i) })
        .collect();
    Ok(WeightSolve { weights, equations: rows.len(), rank: k - f })
}

fn snap(x: f64, grid: i64) -> Rational {
    rat((x * grid as f64).round() as i64, grid)
}

/// Largest absolute coefficient difference between two products of equal shape.
pub fn max_coeff_diff(a: &StarProduct, b: &StarProduct) -> Result<f64> {
    if a.order() != b.order() {
        return Err(Error::OrderMismatch(a.order(), b.order()));
    }
    let mut m: f64 = 0.0;
    for k in 1..=a.order() {
        m = m.max(a.b(k).sub(&b.b(k))?.max_abs_coeff());
    }
    Ok(m)
}

/// Rational as a float, or as an exact string when small.
pub fn describe(r: &Rational) -> String {
    if r.denom().abs() <= BigInt::from(1_000_000) {
        r.to_string()
    } else {
        format!("{:.6}", r.to_f64().unwrap_or(f64::NAN))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multivector::parse_multivector;
    use crate::parse::parse_poly;

    fn p(s: &str, d: usize) -> Poly {
        parse_poly(s, d).unwrap()
    }

    fn standard_alpha() -> Vec<Vec<Rational>> {
        vec![vec![rat_int(0), rat_int(1)], vec![rat_int(-1), rat_int(0)]]
    }

    #[test]
    fn moyal_examples() {
        let s = moyal(&standard_alpha(), 2).unwrap();
        assert_eq!(s.star(&p("x1", 2), &p("x2", 2)).unwrap().to_string(), "x1*x2 + eps");
        let r = s.star(&p("x1^2", 2), &p("x2^2", 2)).unwrap();
        assert_eq!(r.to_string(), "x1^2*x2^2 + 4*x1*x2*eps + 2*eps^2");
        let zero = moyal(&[vec![rat_int(0); 2], vec![rat_int(0); 2]], 2).unwrap();
        assert!(zero.bidiff().iter().all(MultiDiffOp::is_zero));
        assert!(matches!(moyal(&[vec![rat_int(0), rat_int(1)], vec![rat_int(1), rat_int(0)]], 1), Err(Error::NotSkew)));
    }

    #[test]
    fn constant_star_expand_is_moyal() {
        let pi = parse_multivector("d1^d2", 2).unwrap();
        let s = star_expand(&pi, 3, &WeightSource::cache(WeightCache::new()), false).unwrap();
        assert!(s == moyal(&standard_alpha(), 3).unwrap());
        let b1 = s.b(1);
        assert_eq!(op_apply(&b1, &[p("x1", 2), p("x2", 2)]).unwrap(), Poly::one(2));
    }

    #[test]
    fn refuses_non_poisson() {
        let pi = parse_multivector("x2 d1^d2 + d2^d3", 3).unwrap();
        let src = WeightSource::cache(WeightCache::new());
        assert!(matches!(star_expand(&pi, 1, &src, false), Err(Error::NotPoisson)));
        assert!(star_expand(&pi, 1, &src, true).is_ok());
        let su2 = parse_multivector("x3 d1^d2 + x1 d2^d3 + x2 d3^d1", 3).unwrap();
        assert!(matches!(star_expand(&su2, 2, &src, false), Err(Error::MissingWeight(_))));
    }

    #[test]
    fn gauge_identity_and_inverse() {
        let s = moyal(&standard_alpha(), 2).unwrap();
        assert!(gauge_transform(&s, &GaugeOp::identity(2, 2)).unwrap() == s);
        let mut lap = MultiDiffOp::zero(2, 1);
        lap.add_term(Poly::one(2), vec![MultiIndex::new(vec![1, 1])]);
        lap.add_term(Poly::one(2), vec![MultiIndex::new(vec![2, 2])]);
        let d = GaugeOp::new(2, vec![lap.clone(), MultiDiffOp::zero(2, 1)]).unwrap();
        let t = gauge_transform(&s, &d).unwrap();
        // B1' − B1 = −(D1(fg) − D1 f·g − f·D1 g)
        let (f, g) = (p("x1^2*x2 + x2", 2), p("x1*x2^2", 2));
        let diff = &op_apply(&t.b(1), &[f.clone(), g.clone()]).unwrap() - &op_apply(&s.b(1), &[f.clone(), g.clone()]).unwrap();
        let d1 = |h: &Poly| op_apply(&lap, std::slice::from_ref(h)).unwrap();
        let want = &(&d1(&(&f * &g)) - &(&d1(&f) * &g)) - &(&f * &d1(&g));
        assert_eq!(diff, -&want);
        let back = gauge_transform(&t, &d.inverse()).unwrap();
        assert!(back == s);
    }

    #[test]
    fn skew_normalize_half_moyal() {
        let mut b1 = MultiDiffOp::zero(2, 2);
        b1.add_term(Poly::one(2), vec![MultiIndex::single(1), MultiIndex::single(2)]);
        let s = StarProduct::new(2, vec![b1]).unwrap();
        let (t, d) = skew_normalize(&s).unwrap();
        let mut want = MultiDiffOp::zero(2, 2);
        want.add_term(Poly::constant(2, rat(1, 2)), vec![MultiIndex::single(1), MultiIndex::single(2)]);
        want.add_term(Poly::constant(2, rat(-1, 2)), vec![MultiIndex::single(2), MultiIndex::single(1)]);
        assert_eq!(t.b(1), want);
        let mut d1 = MultiDiffOp::zero(2, 1);
        d1.add_term(Poly::constant(2, rat(1, 2)), vec![MultiIndex::new(vec![1, 2])]);
        assert_eq!(d.d(1), d1);
        let skew = moyal(&standard_alpha(), 1).unwrap();
        let (same, d0) = skew_normalize(&skew).unwrap();
        assert!(same == skew);
        assert!(d0.d(1).is_zero());
    }

    #[test]
    fn skew_normalize_detects_inconsistency() {
        // a symmetric B1 that is not a Hochschild coboundary
        let mut b1 = MultiDiffOp::zero(2, 2);
        b1.add_term(p("x1", 2), vec![MultiIndex::single(1), MultiIndex::single(1)]);
        b1.add_term(Poly::one(2), vec![MultiIndex::single(2), MultiIndex::new(vec![1, 1])]);
        b1.add_term(Poly::one(2), vec![MultiIndex::new(vec![1, 1]), MultiIndex::single(2)]);
        let s = StarProduct::new(2, vec![b1]).unwrap();
        assert!(matches!(skew_normalize(&s), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn formality_n1_and_vector_fields() {
        let src = WeightSource::cache(WeightCache::new());
        let x = parse_multivector("x1*x2 d1^d2 + x3 d2^d3", 3).unwrap();
        assert!(formality_operator(&[x], &src).unwrap().is_zero());
        let a = parse_multivector("x1 d2", 2).unwrap();
        let b = parse_multivector("x2^2 d1", 2).unwrap();
        assert!(formality_operator(&[a, b], &src).unwrap().is_zero());
    }
}
