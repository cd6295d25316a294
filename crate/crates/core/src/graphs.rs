//! Admissible graphs and the operators `B_Γ` they induce.
//!
//! Vertices `0..n` are of the first type (in the upper half plane), vertices
//! `n..n+nbar` of the second type (on the real line). Edges start at first-type
//! vertices only; `stars[v]` lists the targets of `v` in edge order.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multidiff::MultiDiffOp;
use crate::multivector::MultiVectorField;
use crate::poly::{rat_int, MultiIndex, Poly};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "GraphJson", into = "GraphJson")]
pub struct AdmissibleGraph {
    n: usize,
    nbar: usize,
    stars: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    n: usize,
    nbar: usize,
    stars: Vec<Vec<usize>>,
}

impl TryFrom<GraphJson> for AdmissibleGraph {
    type Error = Error;
    fn try_from(g: GraphJson) -> Result<Self> {
        AdmissibleGraph::new(g.n, g.nbar, g.stars)
    }
}

impl From<AdmissibleGraph> for GraphJson {
    fn from(g: AdmissibleGraph) -> Self {
        GraphJson { n: g.n, nbar: g.nbar, stars: g.stars }
    }
}

impl AdmissibleGraph {
    /// Checks the structural clauses: one star per first-type vertex, targets in range,
    /// no small loops, and `2n + nbar − 2 ≥ 0`. Parallel edges are representable
    /// (their weight is zero) but never produced by [`enumerate_graphs`].
    pub fn new(n: usize, nbar: usize, stars: Vec<Vec<usize>>) -> Result<Self> {
        if 2 * n + nbar < 2 {
            return Err(Error::InvalidGraph(format!("2n + nbar - 2 < 0 for n={n}, nbar={nbar}")));
        }
        if stars.len() != n {
            return Err(Error::InvalidGraph(format!("expected {n} stars, got {}", stars.len())));
        }
        for (v, star) in stars.iter().enumerate() {
            for &t in star {
                if t >= n + nbar {
                    return Err(Error::InvalidGraph(format!("edge {v} -> {t} targets no vertex")));
                }
                if t == v {
                    return Err(Error::InvalidGraph(format!("small loop at vertex {v}")));
                }
            }
        }
        Ok(AdmissibleGraph { n, nbar, stars })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nbar(&self) -> usize {
        self.nbar
    }

    pub fn stars(&self) -> &[Vec<usize>] {
        &self.stars
    }

    pub fn edge_count(&self) -> usize {
        self.stars.iter().map(Vec::len).sum()
    }

    /// `2n + nbar − 2`, the dimension of the configuration space.
    pub fn expected_edges(&self) -> usize {
        2 * self.n + self.nbar - 2
    }

    /// Edges `(source, target)` in canonical order: by source, then star position.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.stars.iter().enumerate().flat_map(|(v, s)| s.iter().map(move |&t| (v, t))).collect()
    }

    pub fn has_parallel_edges(&self) -> bool {
        self.stars.iter().any(|s| {
            let mut t = s.clone();
            t.sort_unstable();
            t.windows(2).any(|w| w[0] == w[1])
        })
    }

    /// Connectivity of the underlying undirected graph.
    pub fn is_connected(&self) -> bool {
        let total = self.n + self.nbar;
        let mut parent: Vec<usize> = (0..total).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (v, t) in self.edges() {
            let (a, b) = (find(&mut parent, v), find(&mut parent, t));
            parent[a] = b;
        }
        let root = find(&mut parent, 0);
        (1..total).all(|x| find(&mut parent, x) == root)
    }

    /// The fan `Γ_nbar`: one first-type vertex pointing at every ground vertex.
    pub fn fan(nbar: usize) -> Self {
        AdmissibleGraph { n: 1, nbar, stars: vec![(1..=nbar).collect()] }
    }

    pub fn is_fan(&self) -> bool {
        let mut s = self.stars.first().cloned().unwrap_or_default();
        s.sort_unstable();
        self.n == 1 && s == (1..=self.nbar).collect::<Vec<_>>()
    }

    /// Same graph with every star sorted ascending.
    pub fn canonical(&self) -> AdmissibleGraph {
        let mut g = self.clone();
        for s in &mut g.stars {
            s.sort_unstable();
        }
        g
    }

    /// Applies `perm[v]` to star `v`: new position `p` holds old position `perm[v][p]`.
    pub fn reorder(&self, perm: &[Vec<usize>]) -> Result<AdmissibleGraph> {
        check_reordering(self, perm)?;
        let stars = self.stars.iter().zip(perm).map(|(s, p)| p.iter().map(|&i| s[i]).collect()).collect();
        Ok(AdmissibleGraph { n: self.n, nbar: self.nbar, stars })
    }

    pub fn key(&self) -> GraphKey {
        let c = self.canonical();
        GraphKey(serde_json::to_string(&GraphJson { n: c.n, nbar: c.nbar, stars: c.stars }).expect("plain data"))
    }

    /// Human-readable label, e.g. `[[2,3],[0,3]]`.
    pub fn label(&self) -> String {
        serde_json::to_string(&self.stars).expect("plain data")
    }
}

impl fmt::Display for AdmissibleGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.key().0)
    }
}

/// Canonical whitespace-free JSON with sorted stars; the weight-cache index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GraphKey(pub String);

impl GraphKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn graph(&self) -> Result<AdmissibleGraph> {
        Ok(serde_json::from_str(&self.0)?)
    }
}

impl fmt::Display for GraphKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn check_reordering(g: &AdmissibleGraph, perm: &[Vec<usize>]) -> Result<()> {
    if perm.len() != g.n {
        return Err(Error::InvalidGraph(format!("reordering has {} stars, graph has {}", perm.len(), g.n)));
    }
    for (s, p) in g.stars.iter().zip(perm) {
        let mut q = p.clone();
        q.sort_unstable();
        if q != (0..s.len()).collect::<Vec<_>>() {
            return Err(Error::InvalidGraph(format!("{p:?} is not a permutation of a star of size {}", s.len())));
        }
    }
    Ok(())
}

fn signature(p: &[usize]) -> i32 {
    let inv = (0..p.len()).flat_map(|a| (a + 1..p.len()).map(move |b| (a, b))).filter(|&(a, b)| p[a] > p[b]).count();
    if inv % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Product of the per-star signatures of `perm`.
pub fn permutation_sign(g: &AdmissibleGraph, perm: &[Vec<usize>]) -> Result<i32> {
    check_reordering(g, perm)?;
    Ok(perm.iter().map(|p| signature(p)).product())
}

fn subsets(pool: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if pool.len() < k {
        return vec![];
    }
    let mut out = Vec::new();
    for (i, &x) in pool.iter().enumerate() {
        for mut rest in subsets(&pool[i + 1..], k - 1) {
            rest.insert(0, x);
            out.push(rest);
        }
    }
    out
}

/// All connected admissible graphs with `edges` edges and no parallel edges, stars
/// sorted ascending, in lexicographic order of the star lists.
pub fn enumerate_graphs(n: usize, nbar: usize, edges: usize) -> Vec<AdmissibleGraph> {
    if 2 * n + nbar < 2 {
        return vec![];
    }
    let total = n + nbar;
    let choices: Vec<Vec<Vec<usize>>> = (0..n)
        .map(|v| {
            let pool: Vec<usize> = (0..total).filter(|&t| t != v).collect();
            (0..=pool.len()).flat_map(|k| subsets(&pool, k)).collect()
        })
        .collect();
    let mut out = Vec::new();
    let mut current: Vec<Vec<usize>> = Vec::with_capacity(n);
    fn rec(
        v: usize,
        left: usize,
        choices: &[Vec<Vec<usize>>],
        current: &mut Vec<Vec<usize>>,
        out: &mut Vec<AdmissibleGraph>,
        n: usize,
        nbar: usize,
    ) {
        if v == choices.len() {
            if left == 0 {
                let g = AdmissibleGraph { n, nbar, stars: current.clone() };
                if g.is_connected() {
                    out.push(g);
                }
            }
            return;
        }
        for s in &choices[v] {
            if s.len() <= left {
                current.push(s.clone());
                rec(v + 1, left - s.len(), choices, current, out, n, nbar);
                current.pop();
            }
        }
    }
    rec(0, edges, &choices, &mut current, &mut out, n, nbar);
    out.sort();
    out
}

/// `B_Γ(ξ_0, …, ξ_{n−1})`: sum over edge labels `1..d`; vertex `v` contributes the
/// tensor entry of `ξ_v` indexed by its outgoing labels, differentiated by the labels
/// of its incoming edges; ground vertex `j` receives those derivatives on `f_j`.
pub fn assemble_operator(g: &AdmissibleGraph, xs: &[MultiVectorField]) -> Result<MultiDiffOp> {
    if xs.len() != g.n {
        return Err(Error::ArityMismatch { expected: g.n, got: xs.len() });
    }
    let dim = match xs.first() {
        Some(x) => x.dim(),
        None => return Err(Error::Unsupported("graphs without first-type vertices carry no operator".into())),
    };
    for (v, x) in xs.iter().enumerate() {
        if x.dim() != dim {
            return Err(Error::DimMismatch(dim, x.dim()));
        }
        if x.grade() != g.stars[v].len() {
            return Err(Error::StarGradeMismatch { vertex: v, star: g.stars[v].len(), grade: x.grade() });
        }
    }
    // Each vertex contributes (coefficient, labels of outgoing edges, sign) choices:
    // a stored component together with one of its permutations.
    let choices: Vec<Vec<(&Poly, Vec<usize>, i32)>> = xs
        .iter()
        .map(|x| {
            let perms = permutations(x.grade());
            x.components()
                .flat_map(|(idx, c)| perms.iter().map(move |p| (c, p.iter().map(|&i| idx[i]).collect(), signature(p))))
                .collect()
        })
        .collect();
    let mut out = MultiDiffOp::zero(dim, g.nbar);
    let mut pick = vec![0usize; g.n];
    if choices.iter().any(Vec::is_empty) {
        return Ok(out);
    }
    loop {
        let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); g.n + g.nbar];
        let mut sign = 1;
        for (v, &k) in pick.iter().enumerate() {
            let (_, labels, s) = &choices[v][k];
            sign *= s;
            for (&t, &l) in g.stars[v].iter().zip(labels) {
                incoming[t].push(l);
            }
        }
        let mut coeff = Poly::constant(dim, rat_int(sign as i64));
        for (v, &k) in pick.iter().enumerate() {
            let d = choices[v][k].0.apply_multiindex(&MultiIndex::new(incoming[v].clone()))?;
            coeff = &coeff * &d;
            if coeff.is_zero() {
                break;
            }
        }
        if !coeff.is_zero() {
            let derivs = incoming[g.n..].iter().map(|l| MultiIndex::new(l.clone())).collect();
            out.add_term(coeff, derivs);
        }
        // odometer over the per-vertex choices
        let mut v = 0;
        loop {
            if v == g.n {
                return Ok(out);
            }
            pick[v] += 1;
            if pick[v] < choices[v].len() {
                break;
            }
            pick[v] = 0;
            v += 1;
        }
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Graphs grouped by `(n, nbar)` for a given order of the star product: `n` first-type
/// vertices, two ground vertices, `2n` edges, every star of size two.
pub fn star_product_graphs(order: usize) -> Vec<AdmissibleGraph> {
    enumerate_graphs(order, 2, 2 * order).into_iter().filter(|g| g.stars.iter().all(|s| s.len() == 2)).collect()
}

/// Counts of graphs per star-size profile; handy for diagnostics.
pub fn profile_counts(graphs: &[AdmissibleGraph]) -> BTreeMap<Vec<usize>, usize> {
    let mut m = BTreeMap::new();
    for g in graphs {
        *m.entry(g.stars.iter().map(Vec::len).collect()).or_insert(0) += 1;
    }
    m
}
