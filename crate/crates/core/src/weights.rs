//! Graph weights: the hyperbolic angle map, the top form `ω_Γ` as a Jacobian
//! determinant, randomized quasi-Monte Carlo integration over the gauge-fixed
//! configuration space, and a JSON cache of known values.
//!
//! Gauge fixing. For `nbar ≥ 2` the first and last ground points sit at `0` and
//! `span`; the others are ascending in between. For `nbar = 1` the ground point is
//! at `0` and the first air point on the unit half circle. For `nbar = 0` the first
//! air point is fixed at `i`. Remaining air points range over the upper half plane.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use num::complex::Complex64;
use num::{BigInt, One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{AdmissibleGraph, GraphKey};
use crate::poly::{rat_to_f64, Rational};

/// Pairwise distances below this are treated as coincident.
pub const CUTOFF: f64 = 1e-12;

/// Hyperbolic angle at `z1` from the vertical geodesic to the geodesic through `z2`,
/// counterclockwise, in `[0, 2π)`.
pub fn angle(z1: Complex64, z2: Complex64) -> Result<f64> {
    if z1.im <= 0.0 {
        return Err(Error::Degenerate(format!("{z1} is not in the upper half plane")));
    }
    if z2.im < 0.0 {
        return Err(Error::Degenerate(format!("{z2} is below the real line")));
    }
    if (z2 - z1).norm() < CUTOFF {
        return Err(Error::Degenerate("coincident points".into()));
    }
    let a = ((z2 - z1) / (z2 - z1.conj())).arg();
    Ok(if a < 0.0 { a + 2.0 * PI } else { a })
}

/// Gradient of `angle(p, q)` with respect to `(Re p, Im p, Re q, Im q)`.
pub fn angle_gradient(p: Complex64, q: Complex64) -> [f64; 4] {
    let (x, y, a, b) = (p.re, p.im, q.re, q.im);
    let dx = a - x;
    let dy = b - y;
    let dyc = b + y;
    let r2 = dx * dx + dy * dy;
    let r2c = dx * dx + dyc * dyc;
    [dy / r2 - dyc / r2c, -dx / r2 - dx / r2c, -dy / r2 + dyc / r2c, dx / r2 - dx / r2c]
}

/// Gauge fixing for `nbar ≥ 2`: the last ground point is pinned at `span`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gauge {
    pub span: f64,
}

impl Default for Gauge {
    fn default() -> Self {
        Gauge { span: 1.0 }
    }
}

/// Positions of all vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigPoint {
    pub air: Vec<Complex64>,
    pub ground: Vec<f64>,
}

impl ConfigPoint {
    pub fn new(air: Vec<Complex64>, ground: Vec<f64>) -> Result<Self> {
        if air.iter().any(|z| z.im <= 0.0) {
            return Err(Error::Degenerate("air point not in the upper half plane".into()));
        }
        if ground.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Degenerate("ground points not strictly ascending".into()));
        }
        Ok(ConfigPoint { air, ground })
    }

    fn position(&self, v: usize) -> Complex64 {
        if v < self.air.len() {
            self.air[v]
        } else {
            Complex64::new(self.ground[v - self.air.len()], 0.0)
        }
    }

    fn too_close(&self) -> bool {
        let total = self.air.len() + self.ground.len();
        (0..total).any(|a| (a + 1..total).any(|b| (self.position(a) - self.position(b)).norm() < CUTOFF))
    }
}

/// Number of free real coordinates after gauge fixing.
pub fn free_dimension(n: usize, nbar: usize) -> usize {
    (2 * n + nbar).saturating_sub(2)
}

fn check_gauge(g: &AdmissibleGraph, p: &ConfigPoint, gauge: Gauge) -> Result<()> {
    if p.air.len() != g.n() || p.ground.len() != g.nbar() {
        return Err(Error::InvalidGraph("configuration does not match the graph's vertex counts".into()));
    }
    let ok = match g.nbar() {
        0 => (p.air[0] - Complex64::i()).norm() < 1e-9,
        1 => p.ground[0] == 0.0 && (p.air[0].norm() - 1.0).abs() < 1e-9,
        k => p.ground[0] == 0.0 && p.ground[k - 1] == gauge.span,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Degenerate("configuration violates the gauge fixing".into()))
    }
}

/// Density of `ω_Γ = ⋀_e dφ_e` in the free coordinates (air real, air imaginary,
/// then free ground points; for `nbar = 1` the first air point contributes only its
/// polar angle, for `nbar = 0` nothing).
pub fn omega_density(g: &AdmissibleGraph, p: &ConfigPoint, gauge: Gauge) -> Result<f64> {
    let e = g.edge_count();
    let d = free_dimension(g.n(), g.nbar());
    if e != d {
        return Err(Error::InvalidGraph(format!("{e} edges but {d} free coordinates")));
    }
    check_gauge(g, p, gauge)?;
    if p.too_close() {
        return Err(Error::Degenerate("points closer than the cutoff".into()));
    }
    Ok(density_unchecked(g, p, e))
}

/// Column offset of each air point's coordinates and of each free ground point.
struct Layout {
    n: usize,
    nbar: usize,
}

impl Layout {
    /// Adds `(∂/∂Re, ∂/∂Im)` of air point `v` into row `row`.
    fn air(&self, row: &mut [f64], v: usize, z: Complex64, gx: f64, gy: f64) {
        match (self.nbar, v) {
            (0, 0) => {}
            (1, 0) => {
                // z = e^{iθ}: dz/dθ = (−sin θ, cos θ)
                let (s, c) = (z.im, z.re);
                row[0] += -gx * s + gy * c;
            }
            (1, _) => {
                row[2 * v - 1] += gx;
                row[2 * v] += gy;
            }
            (0, _) => {
                row[2 * v - 2] += gx;
                row[2 * v - 1] += gy;
            }
            _ => {
                row[2 * v] += gx;
                row[2 * v + 1] += gy;
            }
        }
    }

    fn ground(&self, row: &mut [f64], j: usize, ga: f64) {
        if self.nbar >= 3 && j >= 1 && j + 1 < self.nbar {
            row[2 * self.n + j - 1] += ga;
        }
    }
}

fn density_unchecked(g: &AdmissibleGraph, p: &ConfigPoint, e: usize) -> f64 {
    let layout = Layout { n: g.n(), nbar: g.nbar() };
    let mut m = vec![0.0; e * e];
    for (r, (v, t)) in g.edges().into_iter().enumerate() {
        let row = &mut m[r * e..(r + 1) * e];
        let zv = p.air[v];
        let zt = p.position(t);
        let [gx, gy, ga, gb] = angle_gradient(zv, zt);
        layout.air(row, v, zv, gx, gy);
        if t < g.n() {
            layout.air(row, t, zt, ga, gb);
        } else {
            layout.ground(row, t - g.n(), ga);
        }
    }
    determinant(&mut m, e)
}

/// In-place LU with partial pivoting.
fn determinant(m: &mut [f64], n: usize) -> f64 {
    let mut det = 1.0;
    for c in 0..n {
        let piv = (c..n).max_by(|&a, &b| m[a * n + c].abs().total_cmp(&m[b * n + c].abs())).unwrap();
        if m[piv * n + c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            for k in 0..n {
                m.swap(piv * n + k, c * n + k);
            }
            det = -det;
        }
        let d = m[c * n + c];
        det *= d;
        for r in c + 1..n {
            let f = m[r * n + c] / d;
            if f != 0.0 {
                for k in c..n {
                    m[r * n + k] -= f * m[c * n + k];
                }
            }
        }
    }
    det
}

/// Sign that makes the fan weights positive (`(−1)^nbar` for `nbar ≥ 2`).
pub fn orientation_sign(nbar: usize) -> f64 {
    if nbar >= 2 && nbar % 2 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// A Monte Carlo estimate of a weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
}

impl WeightEstimate {
    pub fn exact(value: f64, seed: u64) -> Self {
        WeightEstimate { mean: value, stderr: 0.0, samples: 0, seed }
    }

    /// `|mean − target| ≤ k·stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Maps a point of the unit square to the upper half plane, returning the Jacobian.
/// The square goes to the unit disc by area-preserving polar coordinates, the disc to
/// the half plane by `w ↦ i(1+w)/(1−w)`.
fn cayley(u1: f64, u2: f64) -> (Complex64, f64) {
    let w = Complex64::from_polar(u1.sqrt(), 2.0 * PI * u2);
    let one = Complex64::one();
    let z = Complex64::i() * (one + w) / (one - w);
    (z, PI * 4.0 / (one - w).norm_sqr().powi(2))
}

/// Integrand at a point of the unit cube `[0,1)^D`, Jacobian included.
fn integrand(g: &AdmissibleGraph, u: &[f64], gauge: Gauge) -> f64 {
    let (n, nbar) = (g.n(), g.nbar());
    let mut air = Vec::with_capacity(n);
    let mut jac = 1.0;
    let mut ground = Vec::with_capacity(nbar);
    let mut k = 0;
    match nbar {
        0 => air.push(Complex64::i()),
        1 => {
            let th = PI * u[0];
            air.push(Complex64::from_polar(1.0, th));
            jac *= PI;
            k = 1;
            ground.push(0.0);
        }
        _ => {}
    }
    while air.len() < n {
        let (z, j) = cayley(u[k], u[k + 1]);
        air.push(z);
        jac *= j;
        k += 2;
    }
    if nbar >= 2 {
        let mut inner: Vec<f64> = u[k..].iter().map(|t| t * gauge.span).collect();
        inner.sort_by(f64::total_cmp);
        let m = inner.len();
        jac *= gauge.span.powi(m as i32) / (1..=m).map(|i| i as f64).product::<f64>();
        ground.push(0.0);
        ground.extend(inner);
        ground.push(gauge.span);
    }
    if !jac.is_finite() || air.iter().any(|z| !z.re.is_finite() || !z.im.is_finite() || z.im <= 0.0) {
        return 0.0;
    }
    let p = ConfigPoint { air, ground };
    if p.too_close() || p.ground.windows(2).any(|w| w[0] >= w[1]) {
        return 0.0;
    }
    let v = density_unchecked(g, &p, g.edge_count()) * jac;
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// Number of chunks used to split `samples`.
fn chunk_count(samples: u64) -> u64 {
    (samples / 8192).clamp(8, 256).min(samples.max(1))
}

/// Integral of `ω_Γ / (2π)^E` over the gauge-fixed configuration space, with the
/// orientation sign applied; exact `0` when the edge count is wrong.
///
/// The estimate is split into chunks, each an Owen-scrambled Sobol sequence with its
/// own seed; the mean is over all samples and the standard error comes from the
/// spread of chunk means. Chunks run in parallel and are reduced in index order.
pub fn mc_weight_gauged(g: &AdmissibleGraph, samples: u64, seed: u64, gauge: Gauge) -> WeightEstimate {
    let e = g.edge_count();
    if e != free_dimension(g.n(), g.nbar()) || g.has_parallel_edges() {
        return WeightEstimate::exact(0.0, seed);
    }
    let scale = orientation_sign(g.nbar()) / (2.0 * PI).powi(e as i32);
    let dims = match g.nbar() {
        0 => 2 * g.n() - 2,
        1 => 2 * g.n() - 1,
        k => 2 * g.n() + k - 2,
    };
    if dims == 0 {
        let v = if g.n() == 0 { 1.0 } else { integrand(g, &[], gauge) };
        return WeightEstimate::exact(v * scale, seed);
    }
    let samples = samples.max(2);
    let chunks = chunk_count(samples);
    let base = samples / chunks;
    let extra = samples % chunks;
    let sums: Vec<(f64, u64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = base + u64::from(c < extra);
            let s = splitmix64(seed ^ splitmix64(c)) as u32;
            let mut u = vec![0.0; dims];
            let mut acc = 0.0;
            for i in 0..len {
                for (d, x) in u.iter_mut().enumerate() {
                    *x = f64::from(sobol_burley::sample(i as u32, d as u32, s));
                }
                acc += integrand(g, &u, gauge);
            }
            (acc * scale, len)
        })
        .collect();
    let total: f64 = sums.iter().map(|s| s.0).sum();
    let mean = total / samples as f64;
    let k = sums.len() as f64;
    let var: f64 = sums.iter().map(|&(s, l)| (s / l as f64 - mean).powi(2)).sum::<f64>() / (k - 1.0);
    WeightEstimate { mean, stderr: (var / k).sqrt(), samples, seed }
}

pub fn mc_weight(g: &AdmissibleGraph, samples: u64, seed: u64) -> WeightEstimate {
    mc_weight_gauged(g, samples, seed, Gauge::default())
}

fn factorial(k: usize) -> BigInt {
    (1..=k).map(BigInt::from).product()
}

/// Sign taking `g` to its canonical (sorted-star) form.
pub fn ordering_sign(g: &AdmissibleGraph) -> i32 {
    g.stars()
        .iter()
        .map(|s| {
            let inv = (0..s.len()).flat_map(|a| (a + 1..s.len()).map(move |b| (a, b))).filter(|&(a, b)| s[a] > s[b]).count();
            if inv % 2 == 0 {
                1
            } else {
                -1
            }
        })
        .product()
}

/// Every air vertex points at exactly the two ground vertices. With the ground
/// pinned, the air points are independent and the weight is `(1/2)^n`.
fn is_wedge_product(g: &AdmissibleGraph) -> bool {
    let n = g.n();
    g.nbar() == 2 && g.stars().iter().all(|s| s.len() == 2 && s.contains(&n) && s.contains(&(n + 1)))
}

/// Exact value if known: wrong edge count or parallel edges (`0`), fans (`1/nbar!`),
/// products of wedges (`2^{-n}`), or an exact cache entry. Values refer to the graph's
/// own star ordering; cache entries are stored for the canonical ordering.
pub fn known_weight(g: &AdmissibleGraph, cache: Option<&WeightCache>) -> Option<Rational> {
    if g.edge_count() != free_dimension(g.n(), g.nbar()) || g.has_parallel_edges() {
        return Some(Rational::zero());
    }
    if g.n() == 0 {
        return Some(Rational::one());
    }
    let canonical = if g.is_fan() {
        Rational::new(BigInt::one(), factorial(g.nbar()))
    } else if is_wedge_product(g) {
        Rational::new(BigInt::one(), BigInt::from(2).pow(g.n() as u32))
    } else {
        cache?.get(&g.key()).and_then(|e| e.value.exact().cloned())?
    };
    Some(canonical * Rational::from_integer(BigInt::from(ordering_sign(g))))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ExactLemma,
    Mc,
    AssociativitySolve,
}

/// Exact rationals are stored as strings (`"-1/12"`), estimates as numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightValue {
    #[serde(with = "rational_string")]
    Exact(Rational),
    Float(f64),
}

impl WeightValue {
    pub fn exact(&self) -> Option<&Rational> {
        match self {
            WeightValue::Exact(r) => Some(r),
            WeightValue::Float(_) => None,
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            WeightValue::Exact(r) => rat_to_f64(r),
            WeightValue::Float(x) => *x,
        }
    }
}

mod rational_string {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    use crate::poly::Rational;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        s.parse::<Rational>().map_err(|e| D::Error::custom(format!("bad rational {s:?}: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightCacheEntry {
    pub key: GraphKey,
    pub value: WeightValue,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub citation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
}

/// Weight cache keyed by [`GraphKey`]; exact entries are never replaced.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightCache {
    entries: BTreeMap<GraphKey, WeightCacheEntry>,
}

impl WeightCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Ok(Self::new());
        }
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let list: Vec<WeightCacheEntry> =
            serde_json::from_str(text).map_err(|e| Error::Cache(format!("malformed cache: {e}")))?;
        let mut c = Self::new();
        for e in list {
            if e.value.exact().is_some() && e.provenance != Provenance::Mc && e.citation.is_none() {
                return Err(Error::Cache(format!("exact entry {} has no citation", e.key)));
            }
            c.insert(e);
        }
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        let list: Vec<&WeightCacheEntry> = self.entries.values().collect();
        serde_json::to_string_pretty(&list).expect("plain data")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_json())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn get(&self, key: &GraphKey) -> Option<&WeightCacheEntry> {
        self.entries.get(key)
    }

    /// Inserts `e` unless an exact entry is already present; returns whether it was stored.
    pub fn insert(&mut self, e: WeightCacheEntry) -> bool {
        if let Some(old) = self.entries.get(&e.key) {
            if old.value.exact().is_some() {
                return false;
            }
        }
        self.entries.insert(e.key.clone(), e);
        true
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &WeightCacheEntry> {
        self.entries.values()
    }
}
