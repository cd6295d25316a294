#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stardq::multidiff::MultiDiffOp;
use stardq::poly::{rat_int, Exponent};
use stardq::{MultiIndex, MultiVectorField, Poly};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random polynomial of total degree ≤ `deg` with up to `terms` small integer terms.
pub fn poly(r: &mut impl Rng, dim: usize, deg: u32, terms: usize) -> Poly {
    let n = r.random_range(1..=terms);
    let mut p = Poly::zero(dim);
    for _ in 0..n {
        let mut e: Exponent = vec![0; dim];
        let d = r.random_range(0..=deg);
        for _ in 0..d {
            e[r.random_range(0..dim)] += 1;
        }
        let c = r.random_range(-3i64..=3);
        p.add_term(e, rat_int(c));
    }
    p
}

pub fn nonzero_poly(r: &mut impl Rng, dim: usize, deg: u32, terms: usize) -> Poly {
    loop {
        let p = poly(r, dim, deg, terms);
        if !p.is_zero() {
            return p;
        }
    }
}

pub fn multivector(r: &mut impl Rng, dim: usize, grade: usize, deg: u32) -> MultiVectorField {
    let n = r.random_range(1..=2);
    let mut terms = Vec::new();
    for _ in 0..n {
        let mut idx: Vec<usize> = (1..=dim).collect();
        for i in (1..idx.len()).rev() {
            idx.swap(i, r.random_range(0..=i));
        }
        idx.truncate(grade);
        terms.push((poly(r, dim, deg, 2), idx));
    }
    MultiVectorField::from_terms(dim, grade, terms).unwrap()
}

/// Random operator of the given arity; slots get derivative orders ≤ `ord`.
pub fn operator(r: &mut impl Rng, dim: usize, arity: usize, ord: usize, deg: u32) -> MultiDiffOp {
    let n = r.random_range(1..=2);
    let mut op = MultiDiffOp::zero(dim, arity);
    for _ in 0..n {
        let derivs: Vec<MultiIndex> = (0..arity)
            .map(|_| {
                let k = r.random_range(0..=ord);
                MultiIndex::new((0..k).map(|_| r.random_range(1..=dim)).collect())
            })
            .collect();
        op.add_term(poly(r, dim, deg, 2), derivs);
    }
    op
}

pub fn monomials(dim: usize, max_deg: u32) -> Vec<Poly> {
    let mut out = Vec::new();
    let mut e = vec![0u32; dim];
    fn rec(i: usize, left: u32, e: &mut Vec<u32>, out: &mut Vec<Poly>) {
        if i == e.len() {
            out.push(Poly::monomial(e.clone(), rat_int(1)));
            return;
        }
        for k in 0..=left {
            e[i] = k;
            rec(i + 1, left - k, e, out);
        }
        e[i] = 0;
    }
    rec(0, max_deg, &mut e, &mut out);
    out
}

/// Order-2 weights solved once per test binary (10⁶ samples, seed 42).
pub fn solved() -> &'static stardq::star::WeightSolve {
    static SOLVED: std::sync::OnceLock<stardq::star::WeightSolve> = std::sync::OnceLock::new();
    SOLVED.get_or_init(|| stardq::star::solve_order2_weights(1_000_000, 42).expect("order-2 solve"))
}

pub fn solved_source() -> stardq::star::WeightSource {
    stardq::star::WeightSource::cache(solved().to_cache())
}
