mod common;

use rand::Rng;
use stardq::multidiff::{hochschild_d_explicit, pre_lie};
use stardq::poly::rat_int;
use stardq::{gerstenhaber, hkr_u1, hochschild_d, op_apply, u1_defect, MultiDiffOp, Rational};

const CASES: usize = 200;

fn sign(e: i64) -> Rational {
    rat_int(if e.rem_euclid(2) == 0 { 1 } else { -1 })
}

fn random_op(r: &mut impl Rng, dim: usize, max_arity: usize) -> MultiDiffOp {
    let arity = r.random_range(1..=max_arity);
    common::operator(r, dim, arity, 2, 2)
}

#[test]
fn gerstenhaber_graded_skew() {
    let mut r = common::rng(21);
    for _ in 0..CASES {
        let dim = r.random_range(1..=3);
        let a = random_op(&mut r, dim, 3);
        let b = random_op(&mut r, dim, 3);
        let lhs = gerstenhaber(&a, &b).unwrap();
        let rhs = gerstenhaber(&b, &a).unwrap().scale(&-sign(a.degree() * b.degree()));
        assert_eq!(lhs, rhs, "φ = {a:?}, ψ = {b:?}");
    }
}

#[test]
fn gerstenhaber_graded_jacobi() {
    let mut r = common::rng(22);
    for _ in 0..CASES {
        let dim = r.random_range(1..=2);
        let x = random_op(&mut r, dim, 2);
        let y = random_op(&mut r, dim, 2);
        let z = random_op(&mut r, dim, 2);
        let (a, b, c) = (x.degree(), y.degree(), z.degree());
        let t1 = gerstenhaber(&x, &gerstenhaber(&y, &z).unwrap()).unwrap().scale(&sign(a * c));
        let t2 = gerstenhaber(&y, &gerstenhaber(&z, &x).unwrap()).unwrap().scale(&sign(b * a));
        let t3 = gerstenhaber(&z, &gerstenhaber(&x, &y).unwrap()).unwrap().scale(&sign(c * b));
        let sum = t1.add(&t2).unwrap().add(&t3).unwrap();
        assert!(sum.is_zero(), "{x:?} {y:?} {z:?}: {sum:?}");
    }
}

#[test]
fn pre_lie_identity() {
    // the associator of ∘ is graded-symmetric in its last two arguments
    let mut r = common::rng(23);
    for _ in 0..CASES / 2 {
        let dim = r.random_range(1..=2);
        let x = random_op(&mut r, dim, 2);
        let y = random_op(&mut r, dim, 2);
        let z = random_op(&mut r, dim, 2);
        let assoc = |p: &MultiDiffOp, q: &MultiDiffOp, s: &MultiDiffOp| {
            pre_lie(&pre_lie(p, q).unwrap(), s).unwrap().sub(&pre_lie(p, &pre_lie(q, s).unwrap()).unwrap()).unwrap()
        };
        let lhs = assoc(&x, &y, &z);
        let rhs = assoc(&x, &z, &y).scale(&sign(y.degree() * z.degree()));
        assert_eq!(lhs, rhs);
    }
}

#[test]
fn hochschild_squares_to_zero() {
    let mut r = common::rng(24);
    for _ in 0..CASES {
        let dim = r.random_range(1..=3);
        let psi = random_op(&mut r, dim, 3);
        let dd = hochschild_d(&hochschild_d(&psi));
        assert!(dd.is_zero(), "ψ = {psi:?}: {dd:?}");
    }
}

#[test]
fn explicit_form_agrees() {
    let mut r = common::rng(25);
    for _ in 0..CASES {
        let dim = r.random_range(1..=3);
        let psi = random_op(&mut r, dim, 3);
        assert_eq!(hochschild_d(&psi), hochschild_d_explicit(&psi));
    }
}

#[test]
fn explicit_form_pointwise() {
    // d ψ(f0,…,f_{n+1}) with the standard last sign (−1)^n, up to the overall (−1)^n
    let mut r = common::rng(26);
    for _ in 0..CASES / 2 {
        let dim = r.random_range(1..=3);
        let psi = random_op(&mut r, dim, 2);
        let n = psi.degree();
        let fs: Vec<_> = (0..psi.arity() + 1).map(|_| common::poly(&mut r, dim, 3, 3)).collect();
        let last = fs.len() - 1;
        let mut want = &fs[0] * &op_apply(&psi, &fs[1..]).unwrap();
        for i in 0..last {
            let mut args = fs[..i].to_vec();
            args.push(&fs[i] * &fs[i + 1]);
            args.extend_from_slice(&fs[i + 2..]);
            want = &want + &op_apply(&psi, &args).unwrap().scale(&sign(i as i64 + 1));
        }
        want = &want + &(&op_apply(&psi, &fs[..last]).unwrap() * &fs[last]).scale(&sign(n));
        let got = op_apply(&hochschild_d(&psi), &fs).unwrap();
        assert_eq!(got, want.scale(&sign(n)));
    }
}

#[test]
fn hkr_is_chain_map() {
    let mut r = common::rng(27);
    for _ in 0..CASES {
        let dim = r.random_range(1..=4);
        let grade = r.random_range(0..=dim.min(3));
        let x = common::multivector(&mut r, dim, grade, 2);
        assert!(hochschild_d(&hkr_u1(&x)).is_zero(), "X = {x}");
    }
}

#[test]
fn u1_defect_is_closed() {
    let mut r = common::rng(28);
    for _ in 0..CASES {
        let dim = r.random_range(1..=3);
        let mut g = || r.random_range(0..=dim.min(2));
        let (a, b) = (g(), g());
        let x = common::multivector(&mut r, dim, a, 2);
        let y = common::multivector(&mut r, dim, b, 2);
        let d = u1_defect(&x, &y).unwrap();
        assert!(hochschild_d(&d).is_zero(), "X = {x}, Y = {y}");
    }
}

#[test]
fn u1_defect_vanishes_on_vector_fields() {
    let mut r = common::rng(29);
    for _ in 0..CASES / 2 {
        let dim = r.random_range(1..=3);
        let x = common::multivector(&mut r, dim, 1, 2);
        let y = common::multivector(&mut r, dim, 1, 2);
        assert!(u1_defect(&x, &y).unwrap().is_zero());
    }
}
