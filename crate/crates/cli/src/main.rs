use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use stardq::graphs::{enumerate_graphs, star_product_graphs, AdmissibleGraph};
use stardq::multidiff::{GaugeOpJson, StarProductJson};
use stardq::poly::Rational;
use stardq::star::{
    assoc_residual, describe, formality_operator, gauge_transform, moyal, skew_normalize, solve_order2_weights,
    star_expand, WeightSource,
};
use stardq::weights::{known_weight, mc_weight, Provenance, WeightCache, WeightCacheEntry, WeightValue};
use stardq::{
    jacobiator, op_apply, parse_multivector, parse_poly, Error, GaugeOp, MultiDiffOp, MultiVectorField, Poly,
    StarProduct,
};

#[derive(Parser, Debug)]
#[command(name = "stardq", version, about = "Kontsevich star products on R^d with exact rational arithmetic")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,

    /// Weight cache file.
    #[arg(long, env = "STARDQ_CACHE", global = true)]
    cache: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Weights {
    /// Exact values, then cached estimates, then sampling.
    Hybrid,
    /// Exact values only.
    Cache,
    /// Sample every nontrivial weight.
    Mc,
}

#[derive(Args, Debug, Clone)]
struct Sampling {
    /// Monte Carlo samples per graph.
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Allowed deviation for checks involving estimated weights.
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct Product {
    #[arg(long)]
    dim: Option<usize>,
    /// Poisson bivector, e.g. "x3 d1^d2 + x1 d2^d3 + x2 d3^d1".
    #[arg(long, conflicts_with_all = ["alpha", "product"])]
    pi: Option<String>,
    /// Constant skew matrix for the Moyal product, rows separated by ';'.
    #[arg(long, conflicts_with = "product")]
    alpha: Option<String>,
    /// Star product JSON file ({dim, order, B}).
    #[arg(long)]
    product: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    order: usize,
    #[arg(long, value_enum, default_value_t = Weights::Hybrid)]
    weights: Weights,
    /// Expand a non-Poisson bivector anyway.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Enumerate admissible graphs.
    Graphs {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        nbar: usize,
        /// Edge count; defaults to 2n + nbar - 2.
        #[arg(long)]
        edges: Option<usize>,
    },
    /// Estimate one graph weight.
    Weight {
        /// Graph JSON, inline or as a file path.
        #[arg(long)]
        graph: String,
        /// Fail unless the estimate is within the tolerance (default 0.02) of this value.
        #[arg(long)]
        expect: Option<f64>,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Solve the order-2 weights from associativity and compare with Monte Carlo.
    WeightsSolve {
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Star product of a Poisson bivector, or f * g.
    Star {
        #[command(flatten)]
        product: Product,
        #[arg(long, requires = "g")]
        f: Option<String>,
        #[arg(long, requires = "f")]
        g: Option<String>,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Closed-form Moyal product.
    Moyal {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        alpha: String,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long, requires = "g")]
        f: Option<String>,
        #[arg(long, requires = "f")]
        g: Option<String>,
    },
    /// Associativity residual on monomial triples, or on one given triple.
    Assoc {
        #[command(flatten)]
        product: Product,
        /// Largest monomial degree checked.
        #[arg(long, default_value_t = 2)]
        max_deg: u32,
        #[arg(long, requires_all = ["g", "h"])]
        f: Option<String>,
        #[arg(long)]
        g: Option<String>,
        #[arg(long)]
        h: Option<String>,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Jacobiator [pi, pi] of a bivector.
    Jacobi {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        pi: String,
    },
    /// Apply a gauge transformation ({dim, order, D} JSON) to a star product.
    Gauge {
        #[command(flatten)]
        product: Product,
        #[arg(long = "gauge-op")]
        gauge_op: PathBuf,
        /// Also check that the inverse gauge restores the product.
        #[arg(long)]
        check_inverse: bool,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Gauge a star product so that B1 becomes skew.
    SkewNormalize {
        #[command(flatten)]
        product: Product,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Formality residual for one or two multivector fields.
    Formality {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: Option<String>,
        /// Functions to apply the residual to.
        #[arg(long = "fn", num_args = 1..)]
        fns: Vec<String>,
        #[arg(long, value_enum, default_value_t = Weights::Hybrid)]
        weights: Weights,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Merge known, solved and sampled weights into the cache file.
    CacheSync {
        /// Extra cache file whose entries are merged in.
        #[arg(long)]
        import: Option<PathBuf>,
        /// Also sample the star-product graphs of this order lacking exact values.
        #[arg(long)]
        mc_order: Option<usize>,
        #[command(flatten)]
        sampling: Sampling,
    },
}

#[derive(Debug)]
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure { code: 2, msg: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotPoisson | Error::Inconsistent(_) => 1,
            _ => 2,
        };
        Failure { code, msg: e.to_string() }
    }
}

/// What a command prints, and whether its check passed.
struct Report {
    text: String,
    json: Value,
    ok: bool,
}

impl Report {
    fn ok(text: String, json: Value) -> Self {
        Report { text, json, ok: true }
    }
}

type Outcome = Result<Report, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(r) => {
            match cli.format {
                Format::Text => println!("{}", r.text),
                Format::Json => println!("{}", serde_json::to_string_pretty(&r.json).expect("json value")),
            }
            ExitCode::from(if r.ok { 0 } else { 1 })
        }
        Err(f) => {
            eprintln!("stardq: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    let cache = || -> Result<WeightCache, Failure> {
        match &cli.cache {
            Some(p) => Ok(WeightCache::load(p)?),
            None => Ok(WeightCache::new()),
        }
    };
    match &cli.command {
        Command::Graphs { n, nbar, edges } => graphs(*n, *nbar, *edges),
        Command::Weight { graph, expect, sampling } => weight(graph, *expect, sampling, &cache()?),
        Command::WeightsSolve { sampling } => weights_solve(sampling),
        Command::Star { product, f, g, sampling } => {
            let s = build_product(product, sampling, cache()?)?;
            match (f, g) {
                (Some(f), Some(g)) => {
                    let r = s.star(&parse_poly(f, s.dim())?, &parse_poly(g, s.dim())?)?;
                    Ok(Report::ok(r.to_string(), json!({ "product": r.to_string() })))
                }
                _ => Ok(product_report(&s)),
            }
        }
        Command::Moyal { dim, alpha, order, f, g } => {
            let a = parse_matrix(alpha, *dim)?;
            let s = moyal(&a, *order)?;
            match (f, g) {
                (Some(f), Some(g)) => {
                    let r = s.star(&parse_poly(f, *dim)?, &parse_poly(g, *dim)?)?;
                    Ok(Report::ok(r.to_string(), json!({ "product": r.to_string() })))
                }
                _ => Ok(product_report(&s)),
            }
        }
        Command::Assoc { product, max_deg, f, g, h, sampling } => {
            let s = build_product(product, sampling, cache()?)?;
            let tol = sampling.tolerance.unwrap_or(0.0);
            match (f, g, h) {
                (Some(f), Some(g), Some(h)) => {
                    let d = s.dim();
                    let r = assoc_residual(&s, &parse_poly(f, d)?, &parse_poly(g, d)?, &parse_poly(h, d)?)?;
                    let worst = r.coeffs().iter().map(Poly::max_abs_coeff).fold(0.0, f64::max);
                    Ok(Report {
                        text: format!("associator = {r}"),
                        json: json!({ "residual": r.to_string(), "max": worst }),
                        ok: worst <= tol,
                    })
                }
                _ => assoc_monomials(&s, *max_deg, tol),
            }
        }
        Command::Jacobi { dim, pi } => {
            let pi = parse_multivector(pi, *dim)?;
            let j = jacobiator(&pi)?;
            Ok(Report {
                text: format!("jacobiator = {j}"),
                json: json!({ "jacobiator": j.to_string(), "poisson": j.is_zero() }),
                ok: j.is_zero(),
            })
        }
        Command::Gauge { product, gauge_op, check_inverse, sampling } => {
            let s = build_product(product, sampling, cache()?)?;
            let j: GaugeOpJson = read_json(gauge_op)?;
            let d = GaugeOp::from_json(&j)?;
            let t = gauge_transform(&s, &d)?;
            let mut r = product_report(&t);
            if *check_inverse {
                let back = gauge_transform(&t, &d.inverse())?;
                r.ok = back == s;
                r.text.push_str(&format!("\ninverse restores product: {}", r.ok));
                r.json = json!({ "product": r.json, "inverse_restores": r.ok });
            }
            Ok(r)
        }
        Command::SkewNormalize { product, sampling } => {
            let s = build_product(product, sampling, cache()?)?;
            let (u, d) = skew_normalize(&s)?;
            let text = format!("{}\n{}", ops_text("B", u.bidiff()), ops_text("D", d.diffops()));
            Ok(Report::ok(text, json!({ "product": u.to_json(), "gauge": d.to_json() })))
        }
        Command::Formality { dim, x, y, fns, weights, sampling } => {
            let mut xs = vec![parse_multivector(x, *dim)?];
            if let Some(y) = y {
                xs.push(parse_multivector(y, *dim)?);
            }
            let source = weight_source(*weights, sampling, cache()?);
            formality(&xs, fns, &source, sampling.tolerance)
        }
        Command::CacheSync { import, mc_order, sampling } => {
            let path = cli.cache.as_deref().ok_or_else(|| Failure::usage("cache-sync needs --cache or STARDQ_CACHE"))?;
            cache_sync(path, import.as_deref(), *mc_order, sampling)
        }
    }
}

fn graphs(n: usize, nbar: usize, edges: Option<usize>) -> Outcome {
    let edges = match edges {
        Some(e) => e,
        None => (2 * n + nbar)
            .checked_sub(2)
            .ok_or_else(|| Failure::usage("2n + nbar must be at least 2"))?,
    };
    let gs = enumerate_graphs(n, nbar, edges);
    let mut text: Vec<String> = gs.iter().map(|g| g.key().to_string()).collect();
    text.push(format!("{} graphs", gs.len()));
    let keys: Vec<Value> = gs.iter().map(|g| serde_json::to_value(g).expect("graph json")).collect();
    Ok(Report::ok(text.join("\n"), json!({ "count": gs.len(), "graphs": keys })))
}

fn read_graph(arg: &str) -> Result<AdmissibleGraph, Failure> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| Failure::usage(format!("{arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("graph: {e}")))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn weight(arg: &str, expect: Option<f64>, sampling: &Sampling, cache: &WeightCache) -> Outcome {
    let g = read_graph(arg)?;
    let e = mc_weight(&g, sampling.samples, sampling.seed);
    let known = known_weight(&g, Some(cache));
    let mut text = format!("{:.4} ± {:.4}", e.mean, e.stderr);
    if let Some(k) = &known {
        text.push_str(&format!(" (exact {})", describe(k)));
    }
    let ok = match expect {
        Some(x) => (e.mean - x).abs() <= sampling.tolerance.unwrap_or(0.02),
        None => true,
    };
    let json = json!({
        "graph": g.key(),
        "estimate": e,
        "exact": known.as_ref().map(describe),
    });
    Ok(Report { text, json, ok })
}

fn weights_solve(sampling: &Sampling) -> Outcome {
    let solve = solve_order2_weights(sampling.samples, sampling.seed)?;
    let mut lines = vec![format!("{} equations, rank {} of {}", solve.equations, solve.rank, solve.weights.len())];
    let mut rows = Vec::new();
    for w in &solve.weights {
        lines.push(format!(
            "{}  {:>6}  mc {:.5} ± {:.5}  {:.2} sigma{}",
            w.graph.key(),
            describe(&w.value),
            w.estimate.mean,
            w.estimate.stderr,
            w.sigmas(),
            if w.free { "  (free, from MC)" } else { "" }
        ));
        rows.push(json!({
            "graph": w.graph.key(),
            "value": describe(&w.value),
            "estimate": w.estimate,
            "sigmas": w.sigmas(),
            "free": w.free,
        }));
    }
    let ok = solve.all_within(3.0);
    let json = json!({ "equations": solve.equations, "rank": solve.rank, "weights": rows, "consistent": ok });
    Ok(Report { text: lines.join("\n"), json, ok })
}

fn parse_matrix(text: &str, dim: usize) -> Result<Vec<Vec<Rational>>, Failure> {
    let rows: Vec<&str> = text.split(';').collect();
    if rows.len() != dim {
        return Err(Failure::usage(format!("alpha has {} rows, expected {dim}", rows.len())));
    }
    rows.iter()
        .map(|row| {
            let entries: Vec<Rational> = row
                .split_whitespace()
                .map(|x| x.parse::<Rational>().map_err(|e| Failure::usage(format!("alpha entry {x:?}: {e}"))))
                .collect::<Result<_, _>>()?;
            if entries.len() != dim {
                return Err(Failure::usage(format!("alpha row {row:?} has {} entries, expected {dim}", entries.len())));
            }
            Ok(entries)
        })
        .collect()
}

fn weight_source(mode: Weights, sampling: &Sampling, cache: WeightCache) -> WeightSource {
    let s = match mode {
        Weights::Hybrid => WeightSource::hybrid(cache, sampling.samples, sampling.seed),
        Weights::Cache => WeightSource::cache(cache),
        Weights::Mc => WeightSource::mc(sampling.samples, sampling.seed),
    };
    match sampling.tolerance {
        Some(t) => s.with_tolerance(t),
        None => s,
    }
}

fn build_product(p: &Product, sampling: &Sampling, cache: WeightCache) -> Result<StarProduct, Failure> {
    if let Some(path) = &p.product {
        let j: StarProductJson = read_json(path)?;
        return Ok(StarProduct::from_json(&j)?);
    }
    let dim = p.dim.ok_or_else(|| Failure::usage("--dim is required with --pi or --alpha"))?;
    if let Some(alpha) = &p.alpha {
        return Ok(moyal(&parse_matrix(alpha, dim)?, p.order)?);
    }
    let pi = p.pi.as_ref().ok_or_else(|| Failure::usage("one of --pi, --alpha or --product is required"))?;
    let pi = parse_multivector(pi, dim)?;
    Ok(star_expand(&pi, p.order, &weight_source(p.weights, sampling, cache), p.force)?)
}

fn ops_text(name: &str, ops: &[MultiDiffOp]) -> String {
    ops.iter().enumerate().map(|(k, op)| format!("{name}{} = {op}", k + 1)).collect::<Vec<_>>().join("\n")
}

fn product_report(s: &StarProduct) -> Report {
    Report::ok(ops_text("B", s.bidiff()), serde_json::to_value(s.to_json()).expect("product json"))
}

fn monomials(dim: usize, max_deg: u32) -> Vec<Poly> {
    fn rec(i: usize, left: u32, e: &mut Vec<u32>, out: &mut Vec<Poly>) {
        if i == e.len() {
            out.push(Poly::monomial(e.clone(), Rational::from_integer(1.into())));
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
    out
}

fn assoc_monomials(s: &StarProduct, max_deg: u32, tol: f64) -> Outcome {
    let mons = monomials(s.dim(), max_deg);
    let mut worst = 0.0f64;
    let mut failing = 0usize;
    let mut first: Option<String> = None;
    let mut triples = 0usize;
    for f in &mons {
        for g in &mons {
            for h in &mons {
                triples += 1;
                let r = assoc_residual(s, f, g, h)?;
                let m = r.coeffs().iter().map(Poly::max_abs_coeff).fold(0.0, f64::max);
                worst = worst.max(m);
                if m > tol {
                    failing += 1;
                    first.get_or_insert_with(|| format!("({f}, {g}, {h}) -> {r}"));
                }
            }
        }
    }
    let mut text = if failing == 0 {
        format!("associator = 0 on {triples} monomial triples")
    } else {
        format!("associator nonzero on {failing} of {triples} monomial triples, max {worst:.3e}")
    };
    if let Some(f) = &first {
        text.push_str(&format!("\nfirst: {f}"));
    }
    let json = json!({ "triples": triples, "failing": failing, "max": worst, "first": first });
    Ok(Report { text, json, ok: failing == 0 })
}

fn formality(xs: &[MultiVectorField], fns: &[String], source: &WeightSource, tol: Option<f64>) -> Outcome {
    let op = formality_operator(xs, source)?;
    let dim = xs[0].dim();
    if !fns.is_empty() {
        if fns.len() != op.arity() {
            return Err(Failure::usage(format!("residual takes {} function(s), got {}", op.arity(), fns.len())));
        }
        let fs: Vec<Poly> = fns.iter().map(|f| parse_poly(f, dim)).collect::<Result<_, _>>()?;
        let r = op_apply(&op, &fs)?;
        let ok = r.max_abs_coeff() <= tol.unwrap_or(if xs.len() == 1 { 0.0 } else { 0.05 });
        return Ok(Report { text: format!("residual = {r}"), json: json!({ "residual": r.to_string() }), ok });
    }
    let worst = op.max_abs_coeff();
    let ok = worst <= tol.unwrap_or(if xs.len() == 1 { 0.0 } else { 0.05 });
    let text = if op.is_zero() { "residual = 0".to_string() } else { format!("residual max coefficient {worst:.5}") };
    Ok(Report { text, json: json!({ "max": worst, "terms": op.num_terms() }), ok })
}

fn cache_sync(path: &Path, import: Option<&Path>, mc_order: Option<usize>, sampling: &Sampling) -> Outcome {
    let mut cache = WeightCache::load(path)?;
    let before = cache.len();
    let mut warnings = Vec::new();
    let tol = sampling.tolerance.unwrap_or(0.02);
    let merge = |cache: &mut WeightCache, e: WeightCacheEntry, warnings: &mut Vec<String>| {
        if let Some(old) = cache.get(&e.key) {
            if old.value.exact().is_some() && e.value.exact().is_none() {
                let diff = (old.value.as_f64() - e.value.as_f64()).abs();
                if diff > tol {
                    warnings.push(format!(
                        "{}: estimate {:.5} disagrees with exact {} by {diff:.4}; keeping exact",
                        e.key,
                        e.value.as_f64(),
                        old.value.exact().map(describe).unwrap_or_default()
                    ));
                }
                return;
            }
            if old == &e {
                return;
            }
        }
        cache.insert(e);
    };
    for nbar in 2..=4 {
        let g = AdmissibleGraph::fan(nbar);
        let value = known_weight(&g, None).expect("fan weight");
        merge(
            &mut cache,
            WeightCacheEntry {
                key: g.key(),
                value: WeightValue::Exact(value),
                provenance: Provenance::ExactLemma,
                citation: Some(format!("fan with {nbar} ground points has weight 1/{nbar}!")),
                stderr: None,
            },
            &mut warnings,
        );
    }
    let solved = solve_order2_weights(sampling.samples, sampling.seed)?;
    for e in solved.to_cache().entries() {
        merge(&mut cache, e.clone(), &mut warnings);
    }
    if let Some(p) = import {
        for e in WeightCache::load(p)?.entries() {
            merge(&mut cache, e.clone(), &mut warnings);
        }
    }
    if let Some(order) = mc_order {
        for g in star_product_graphs(order) {
            if known_weight(&g, Some(&cache)).is_some() || cache.get(&g.key()).is_some() {
                continue;
            }
            let est = mc_weight(&g, sampling.samples, sampling.seed);
            merge(
                &mut cache,
                WeightCacheEntry {
                    key: g.key(),
                    value: WeightValue::Float(est.mean),
                    provenance: Provenance::Mc,
                    citation: None,
                    stderr: Some(est.stderr),
                },
                &mut warnings,
            );
        }
    }
    cache.save(path)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let exact = cache.entries().filter(|e| e.value.exact().is_some()).count();
    let text = format!(
        "{} entries ({exact} exact), {} new, written to {}",
        cache.len(),
        cache.len() - before,
        path.display()
    );
    let json = json!({
        "entries": cache.len(),
        "exact": exact,
        "added": cache.len() - before,
        "warnings": warnings,
    });
    Ok(Report::ok(text, json))
}
