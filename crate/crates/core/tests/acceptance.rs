//! One line per acceptance criterion; exits nonzero if any fails.

mod common;

use std::time::{Duration, Instant};

use rand::Rng;
use stardq::graphs::AdmissibleGraph;
use stardq::multidiff::{mc_residual, op_apply, GaugeOp, MultiDiffOp, StarProduct};
use stardq::multivector::is_poisson;
use stardq::poly::{rat, rat_int};
use stardq::star::{
    assoc_residual, d1_on_monomials, formality_operator, formality_residual, gauge_transform, max_coeff_diff, moyal,
    skew_normalize, star_expand, WeightSource,
};
use stardq::weights::mc_weight;
use stardq::{
    gerstenhaber, hkr_u1, hochschild_d, jacobiator, mv_wedge, parse_multivector, poisson_bracket, schouten, u1_defect,
    MultiIndex, MultiVectorField, Poly, Rational,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sign(e: i64) -> Rational {
    rat_int(if e.rem_euclid(2) == 0 { 1 } else { -1 })
}

fn fan_weights() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (nbar, want) in [(2, 0.5), (3, 1.0 / 6.0)] {
        let t = Instant::now();
        let e = mc_weight(&AdmissibleGraph::fan(nbar), 1_000_000, 42);
        let dt = t.elapsed();
        ok &= e.within(want, 3.0) && e.stderr <= 0.01 && dt <= Duration::from_secs(60);
        parts.push(format!("nbar={nbar}: {:.5} ± {:.5} in {:.1}s", e.mean, e.stderr, dt.as_secs_f64()));
    }
    check(ok, parts.join(", "))
}

fn moyal_reproduction() -> Outcome {
    let alpha = vec![vec![rat_int(0), rat_int(1)], vec![rat_int(-1), rat_int(0)]];
    let pi = MultiVectorField::constant_bivector(&alpha).map_err(|e| e.to_string())?;
    let want = moyal(&alpha, 2).map_err(|e| e.to_string())?;
    let exact = star_expand(&pi, 2, &common::solved_source(), false).map_err(|e| e.to_string())?;
    let sampled = star_expand(&pi, 2, &WeightSource::mc(1_000_000, 42), false).map_err(|e| e.to_string())?;
    let diff = max_coeff_diff(&sampled, &want).map_err(|e| e.to_string())?;
    check(exact == want && diff <= 0.02, format!("cache mode exact: {}, MC max diff {diff:.4}", exact == want))
}

fn su2_associativity() -> Outcome {
    let t = Instant::now();
    let pi = parse_multivector("x3 d1^d2 + x1 d2^d3 + x2 d3^d1", 3).map_err(|e| e.to_string())?;
    let s = star_expand(&pi, 2, &common::solved_source(), false).map_err(|e| e.to_string())?;
    let mons = common::monomials(3, 2);
    let mut bad = 0;
    let mut triples = 0;
    for f in &mons {
        for g in &mons {
            for h in &mons {
                triples += 1;
                let r = assoc_residual(&s, f, g, h).map_err(|e| e.to_string())?;
                if !r.coeff(1).is_zero() || !r.coeff(2).is_zero() {
                    bad += 1;
                }
            }
        }
    }
    let dt = t.elapsed();
    check(
        bad == 0 && dt <= Duration::from_secs(300),
        format!("{bad} of {triples} triples nonzero, {:.1}s", dt.as_secs_f64()),
    )
}

fn weight_cross_check() -> Outcome {
    let solve = common::solved();
    let worst = solve.weights.iter().map(|w| w.sigmas()).fold(0.0, f64::max);
    let free = solve.weights.iter().filter(|w| w.free).count();
    check(
        solve.all_within(3.0),
        format!("{} weights, rank {}, {free} fixed from MC, worst {worst:.2} sigma", solve.weights.len(), solve.rank),
    )
}

fn random_field(r: &mut impl Rng) -> (usize, MultiVectorField) {
    let dim = r.random_range(1..=4);
    let grade = r.random_range(0..=dim.min(3));
    (dim, common::multivector(r, dim, grade, 2))
}

fn dgla_suites() -> Outcome {
    const CASES: usize = 200;
    let mut r = common::rng(101);
    let mut failures = Vec::new();
    let (mut skew, mut leibniz, mut jacobi) = (true, true, true);
    for _ in 0..CASES {
        let dim = r.random_range(1..=4);
        let mut pick = || r.random_range(0..=dim.min(3));
        let (a, b, c) = (pick(), pick(), pick());
        let x = common::multivector(&mut r, dim, a, 2);
        let y = common::multivector(&mut r, dim, b, 2);
        let z = common::multivector(&mut r, dim, c, 2);
        let (a, b, c) = (a as i64, b as i64, c as i64);
        skew &= schouten(&x, &y).unwrap() == schouten(&y, &x).unwrap().scale(&-sign((a + 1) * (b + 1)));
        let lhs = schouten(&x, &mv_wedge(&y, &z).unwrap()).unwrap();
        let first = mv_wedge(&schouten(&x, &y).unwrap(), &z).unwrap();
        let second = mv_wedge(&y, &schouten(&x, &z).unwrap()).unwrap().scale(&sign((a - 1) * b));
        leibniz &= lhs == first.add(&second).unwrap();
        let (p, q, s) = (a - 1, b - 1, c - 1);
        let t1 = schouten(&x, &schouten(&y, &z).unwrap()).unwrap().scale(&sign(p * s));
        let t2 = schouten(&y, &schouten(&z, &x).unwrap()).unwrap().scale(&sign(q * p));
        let t3 = schouten(&z, &schouten(&x, &y).unwrap()).unwrap().scale(&sign(s * q));
        jacobi &= t1.add(&t2).unwrap().add(&t3).unwrap().is_zero();
    }
    let (mut gskew, mut gjacobi, mut dd) = (true, true, true);
    let op = |r: &mut rand_chacha::ChaCha8Rng, dim: usize, max_arity: usize| -> MultiDiffOp {
        let arity = r.random_range(1..=max_arity);
        common::operator(r, dim, arity, 2, 2)
    };
    for _ in 0..CASES {
        let dim = r.random_range(1..=2);
        let x = op(&mut r, dim, 2);
        let y = op(&mut r, dim, 2);
        let z = op(&mut r, dim, 2);
        let (a, b, c) = (x.degree(), y.degree(), z.degree());
        gskew &= gerstenhaber(&x, &y).unwrap() == gerstenhaber(&y, &x).unwrap().scale(&-sign(a * b));
        let t1 = gerstenhaber(&x, &gerstenhaber(&y, &z).unwrap()).unwrap().scale(&sign(a * c));
        let t2 = gerstenhaber(&y, &gerstenhaber(&z, &x).unwrap()).unwrap().scale(&sign(b * a));
        let t3 = gerstenhaber(&z, &gerstenhaber(&x, &y).unwrap()).unwrap().scale(&sign(c * b));
        gjacobi &= t1.add(&t2).unwrap().add(&t3).unwrap().is_zero();
        let pdim = r.random_range(1..=3);
        let psi = op(&mut r, pdim, 3);
        dd &= hochschild_d(&hochschild_d(&psi)).is_zero();
    }
    for (name, ok) in [
        ("schouten skew", skew),
        ("schouten leibniz", leibniz),
        ("schouten jacobi", jacobi),
        ("gerstenhaber skew", gskew),
        ("gerstenhaber jacobi", gjacobi),
        ("d^2 = 0", dd),
    ] {
        if !ok {
            failures.push(name);
        }
    }
    check(
        failures.is_empty(),
        if failures.is_empty() { format!("6 suites x {CASES} cases") } else { format!("failed: {}", failures.join(", ")) },
    )
}

fn scalar_jacobi_holds(pi: &MultiVectorField, fs: &[Poly]) -> bool {
    let br = |f: &Poly, g: &Poly| poisson_bracket(pi, f, g).unwrap();
    fs.iter().all(|f| {
        fs.iter().all(|g| {
            fs.iter().all(|h| (&(&br(f, &br(g, h)) + &br(g, &br(h, f))) + &br(h, &br(f, g))).is_zero())
        })
    })
}

fn maurer_cartan_jacobi() -> Outcome {
    let mut r = common::rng(102);
    let coords: Vec<Poly> = (1..=3).map(|i| Poly::var(3, i).unwrap()).collect();
    let pairs = [[1, 2], [1, 3], [2, 3]];
    let mut counter = 0;
    let mut poisson = 0;
    for _ in 0..50 {
        let used = if r.random_bool(0.5) { 1 } else { r.random_range(2..=3) };
        let terms: Vec<_> = pairs.iter().take(used).map(|p| (common::poly(&mut r, 3, 1, 2), p.to_vec())).collect();
        let pi = MultiVectorField::from_terms(3, 2, terms).unwrap();
        let zero = jacobiator(&pi).unwrap().is_zero();
        poisson += zero as usize;
        if zero != scalar_jacobi_holds(&pi, &coords) || zero != is_poisson(&pi).unwrap() {
            counter += 1;
        }
    }
    check(counter == 0, format!("50 bivectors ({poisson} Poisson), {counter} counterexamples"))
}

fn hkr_and_defect() -> Outcome {
    const CASES: usize = 100;
    let mut r = common::rng(103);
    let mut chain = 0;
    let mut closed = 0;
    for _ in 0..CASES {
        let (_, x) = random_field(&mut r);
        chain += hochschild_d(&hkr_u1(&x)).is_zero() as usize;
        let dim = r.random_range(1..=3);
        let a = r.random_range(0..=dim.min(2));
        let b = r.random_range(0..=dim.min(2));
        let x = common::multivector(&mut r, dim, a, 2);
        let y = common::multivector(&mut r, dim, b, 2);
        closed += hochschild_d(&u1_defect(&x, &y).unwrap()).is_zero() as usize;
    }
    check(
        chain == CASES && closed == CASES,
        format!("chain map {chain}/{CASES}, defect closed {closed}/{CASES}"),
    )
}

fn random_gauge(r: &mut impl Rng, dim: usize, order: usize) -> GaugeOp {
    let ops = (0..order)
        .map(|_| {
            let raw = common::operator(r, dim, 1, 2, 1);
            let mut op = MultiDiffOp::zero(dim, 1);
            for (d, c) in raw.terms().filter(|(d, _)| !d[0].is_empty()) {
                op.add_term(c.clone(), d.clone());
            }
            op
        })
        .collect();
    GaugeOp::new(dim, ops).unwrap()
}

fn gauge_and_skew() -> Outcome {
    // normal-ordered product with a symmetric part at first order
    let dim = 3;
    let mut b1 = MultiDiffOp::zero(dim, 2);
    b1.add_term(Poly::one(dim), vec![MultiIndex::single(1), MultiIndex::single(2)]);
    let mut b2 = MultiDiffOp::zero(dim, 2);
    b2.add_term(Poly::constant(dim, rat(1, 2)), vec![MultiIndex::new(vec![1, 1]), MultiIndex::new(vec![2, 2])]);
    let s = StarProduct::new(dim, vec![b1, b2]).map_err(|e| e.to_string())?;
    let table = d1_on_monomials(&s, 4).map_err(|e| e.to_string())?;
    let sym = s.b1_sym();
    let d1 = |p: &Poly| {
        let mut acc = Poly::zero(dim);
        for (e, c) in p.terms() {
            acc += &table[e].scale(c);
        }
        acc
    };
    let x = |i| Poly::var(dim, i).unwrap();
    let mut grouping = true;
    for i in 1..=3 {
        for j in 1..=3 {
            for k in 1..=3 {
                let (a, b, c) = (x(i), x(j), x(k));
                let ab = &a * &b;
                let bc = &b * &c;
                let left = &(&op_apply(&sym, &[ab.clone(), c.clone()]).unwrap() + &(&d1(&ab) * &c)) + &(&ab * &d1(&c));
                let right = &(&op_apply(&sym, &[a.clone(), bc.clone()]).unwrap() + &(&d1(&a) * &bc)) + &(&a * &d1(&bc));
                grouping &= left == right && left == d1(&(&ab * &c));
            }
        }
    }
    let (u, _) = skew_normalize(&s).map_err(|e| e.to_string())?;
    let b1u = u.b(1);
    let skew = b1u == b1u.transpose().unwrap().scale(&rat_int(-1)) && mc_residual(&u).is_zero();

    let mut r = common::rng(104);
    let mut restored = 0;
    const TRIALS: usize = 10;
    for _ in 0..TRIALS {
        let mut alpha = vec![vec![rat_int(0); 2]; 2];
        let v = rat(r.random_range(-3..=3), r.random_range(1..=2));
        alpha[0][1] = v.clone();
        alpha[1][0] = -v;
        let base = moyal(&alpha, 3).unwrap();
        let d = random_gauge(&mut r, 2, 3);
        let t = gauge_transform(&base, &d).unwrap();
        restored += (gauge_transform(&t, &d.inverse()).unwrap() == base) as usize;
    }
    check(
        grouping && skew && restored == TRIALS,
        format!("grouping independent: {grouping}, B1' skew: {skew}, gauge inverse restores {restored}/{TRIALS}"),
    )
}

fn formality() -> Outcome {
    let mut r = common::rng(105);
    let mut n1 = 0;
    const CASES: usize = 100;
    let source = WeightSource::mc(1_000_000, 42);
    for _ in 0..CASES {
        let (dim, x) = random_field(&mut r);
        let fs: Vec<Poly> = (0..x.grade() + 1).map(|_| common::poly(&mut r, dim, 3, 3)).collect();
        n1 += formality_residual(std::slice::from_ref(&x), &fs, &source).unwrap().is_zero() as usize;
    }
    let xs = [parse_multivector("x1 d1^d2", 2).unwrap(), parse_multivector("d1^d2", 2).unwrap()];
    let residual = formality_operator(&xs, &source).map_err(|e| e.to_string())?.max_abs_coeff();
    check(
        n1 == CASES && residual < 0.05,
        format!("n=1 zero on {n1}/{CASES}, n=2 max residual {residual:.5}"),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("fan weights 1/2 and 1/6 by Monte Carlo", fan_weights),
        ("Moyal product reproduced at order 2", moyal_reproduction),
        ("su(2) star product associative to order 2", su2_associativity),
        ("solved order-2 weights agree with Monte Carlo", weight_cross_check),
        ("Schouten and Gerstenhaber DGLA identities", dgla_suites),
        ("jacobiator vanishes iff Jacobi holds", maurer_cartan_jacobi),
        ("HKR chain map and closed defect", hkr_and_defect),
        ("gauge inverse and skew normalization", gauge_and_skew),
        ("formality residual for n = 1, 2", formality),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let dt = t.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS criterion {}: {name} ({d}) [{dt:.1}s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {}: {name} ({d}) [{dt:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
