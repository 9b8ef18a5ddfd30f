//! Exact enumeration of weighted paths from the origin.
//!
//! A single depth-first pass ([`PathCensus`]) records, for every length and
//! endpoint, the log of `Σ e^{−Φ}` over all paths and over first-hit paths.
//! Partition functions for any drift, generating functions for any `λ` and
//! endpoint laws are then read off without re-enumerating.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logspace::{log_count, LogAccumulator};
use crate::path::{LatticePath, Locality, Pattern, Site};
use crate::potential::PhiSpec;
use crate::tracker::LocalTimeTracker;

/// Length caps for exhaustive enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumCaps {
    pub general: usize,
    /// For potentials forbidding any revisit.
    pub hard_core: usize,
    /// For `φ ≡ 0`, which uses counting instead of enumeration.
    pub free: usize,
}

impl EnumCaps {
    pub fn default_for(dim: usize) -> EnumCaps {
        let (general, hard_core, free) = match dim {
            1 => (24, 24, 126),
            2 => (14, 18, 62),
            3 => (10, 12, 24),
            _ => (8, 10, 12),
        };
        EnumCaps {
            general,
            hard_core,
            free,
        }
    }

    pub fn cap_for(&self, spec: &PhiSpec) -> usize {
        if spec.is_zero() {
            self.free
        } else if spec.hard_limit() == Some(2) {
            self.hard_core
        } else {
            self.general
        }
    }
}

/// Check a requested length against the default cap.
pub fn check_cap(spec: &PhiSpec, dim: usize, n: usize) -> Result<()> {
    let cap = EnumCaps::default_for(dim).cap_for(spec);
    if n > cap {
        return Err(Error::CapExceeded {
            what: "enumeration length",
            requested: n,
            cap,
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Depth-first walker

/// The current path during a depth-first pass.
pub(crate) struct Node<'a> {
    pub sites: &'a [Site],
    /// `Φ` of the current path (finite).
    pub phi: f64,
    /// The endpoint had not been visited before the last step.
    pub first_hit: bool,
}

impl Node<'_> {
    pub fn depth(&self) -> usize {
        self.sites.len() - 1
    }

    pub fn end(&self) -> Site {
        *self.sites.last().unwrap()
    }
}

/// Callback for [`walk`]. `visit` returns whether to descend below the node.
pub(crate) trait Visitor: Send + Sized {
    fn visit(&mut self, node: &Node<'_>) -> bool;
    /// An empty visitor with the same configuration.
    fn fork(&self) -> Self;
    fn merge(&mut self, other: Self);
}

struct Walker<'s> {
    spec: &'s PhiSpec,
    dim: usize,
    n_max: usize,
    tracker: LocalTimeTracker,
    sites: Vec<Site>,
    phis: Vec<f64>,
    first: Vec<bool>,
}

impl<'s> Walker<'s> {
    fn new(spec: &'s PhiSpec, dim: usize, n_max: usize) -> Self {
        let mut tracker = LocalTimeTracker::new(dim, n_max.max(1), spec.locality());
        tracker.visit(Site::ORIGIN);
        let phi0 = match spec.locality() {
            Locality::Site => spec.increment(0).expect("phi(1) is finite"),
            _ => 0.0,
        };
        let mut sites = Vec::with_capacity(n_max + 1);
        sites.push(Site::ORIGIN);
        Walker {
            spec,
            dim,
            n_max,
            tracker,
            sites,
            phis: vec![phi0],
            first: vec![true],
        }
    }

    #[inline]
    fn push(&mut self, k: usize) -> bool {
        let from = *self.sites.last().unwrap();
        let to = from + Site::unit(k);
        let seen = self.tracker.site_count(to);
        let inc = match self.spec.locality() {
            Locality::Site => self.spec.increment(seen as u32),
            _ => self.spec.increment(self.tracker.bond_count(from, to) as u32),
        };
        let Some(inc) = inc else { return false };
        self.tracker.visit(to);
        self.tracker.traverse(from, to);
        let phi = self.phis.last().unwrap() + inc;
        self.phis.push(phi);
        self.first.push(seen == 0);
        self.sites.push(to);
        true
    }

    #[inline]
    fn pop(&mut self) {
        let to = self.sites.pop().unwrap();
        let from = *self.sites.last().unwrap();
        self.tracker.untraverse(from, to);
        self.tracker.unvisit(to);
        self.phis.pop();
        self.first.pop();
    }

    fn node(&self) -> Node<'_> {
        Node {
            sites: &self.sites,
            phi: *self.phis.last().unwrap(),
            first_hit: *self.first.last().unwrap(),
        }
    }

    fn dfs<V: Visitor>(&mut self, v: &mut V) {
        if !v.visit(&self.node()) || self.sites.len() > self.n_max {
            return;
        }
        for k in 0..2 * self.dim {
            if self.push(k) {
                self.dfs(v);
                self.pop();
            }
        }
    }

    /// Visit nodes shallower than `split`; collect the step sequences of
    /// nodes at depth `split`.
    fn prefixes<V: Visitor>(&mut self, v: &mut V, split: usize, out: &mut Vec<Vec<usize>>) {
        if self.sites.len() - 1 == split {
            out.push(self.sites.windows(2).map(|w| (w[1] - w[0]).step_index().unwrap()).collect());
            return;
        }
        if !v.visit(&self.node()) {
            return;
        }
        for k in 0..2 * self.dim {
            if self.push(k) {
                self.prefixes(v, split, out);
                self.pop();
            }
        }
    }
}

/// Depth-first pass over all paths from the origin with at most `n_max`
/// steps and finite `Φ`. Subtrees below a fixed split depth are processed
/// in parallel and merged in a fixed order, so the result does not depend
/// on the number of worker threads.
pub(crate) fn walk<V: Visitor>(spec: &PhiSpec, dim: usize, n_max: usize, mut visitor: V) -> Result<V> {
    spec.ensure_range(n_max as u32 + 1)?;
    let mut split = 0;
    while split < n_max.saturating_sub(4) && (2 * dim).pow(split as u32) < 64 {
        split += 1;
    }
    let mut root = Walker::new(spec, dim, n_max);
    if split == 0 {
        root.dfs(&mut visitor);
        return Ok(visitor);
    }
    let mut prefixes = Vec::new();
    root.prefixes(&mut visitor, split, &mut prefixes);
    for chunk in prefixes.chunks(64) {
        let forks: Vec<V> = chunk.iter().map(|_| visitor.fork()).collect();
        let parts: Vec<V> = chunk
            .par_iter()
            .zip(forks)
            .map(|(steps, mut v)| {
                let mut w = Walker::new(spec, dim, n_max);
                for &k in steps {
                    let ok = w.push(k);
                    debug_assert!(ok);
                }
                w.dfs(&mut v);
                v
            })
            .collect();
        for p in parts {
            visitor.merge(p);
        }
    }
    Ok(visitor)
}

// ---------------------------------------------------------------------------
// Census

/// Dense per-endpoint storage for paths of length `n` (`|x_i| ≤ n`).
#[derive(Clone, Debug)]
struct Layer {
    radius: i32,
    side: usize,
    cells: Vec<LogAccumulator>,
}

impl Layer {
    fn new(dim: usize, radius: usize) -> Self {
        let side = 2 * radius + 1;
        Layer {
            radius: radius as i32,
            side,
            cells: vec![LogAccumulator::new(); side.pow(dim as u32)],
        }
    }

    #[inline]
    fn index(&self, dim: usize, x: Site) -> Option<usize> {
        let mut idx = 0usize;
        for i in (0..dim).rev() {
            if x.0[i].abs() > self.radius {
                return None;
            }
            idx = idx * self.side + (x.0[i] + self.radius) as usize;
        }
        Some(idx)
    }

    fn site(&self, dim: usize, mut idx: usize) -> Site {
        let mut s = Site::ORIGIN;
        for i in 0..dim {
            s.0[i] = (idx % self.side) as i32 - self.radius;
            idx /= self.side;
        }
        s
    }

    fn get(&self, dim: usize, x: Site) -> Option<f64> {
        self.index(dim, x).and_then(|i| self.cells[i].value())
    }

    fn entries(&self, dim: usize) -> impl Iterator<Item = (Site, f64)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter_map(move |(i, a)| a.value().map(|v| (self.site(dim, i), v)))
    }

    fn merge(&mut self, other: &Layer) {
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            a.merge(b);
        }
    }
}

/// Log-masses `Σ e^{−Φ}` per length and endpoint, over all paths and over
/// paths whose endpoint is hit for the first time at the last step.
#[derive(Clone, Debug)]
pub struct PathCensus {
    dim: usize,
    n_max: usize,
    phi1: f64,
    all: Vec<Layer>,
    first: Vec<Layer>,
    counts: Vec<u128>,
}

struct CensusVisitor(PathCensus);

impl Visitor for CensusVisitor {
    #[inline]
    fn visit(&mut self, node: &Node<'_>) -> bool {
        let c = &mut self.0;
        let n = node.depth();
        let x = node.end();
        let i = c.all[n].index(c.dim, x).unwrap();
        c.all[n].cells[i].add(-node.phi);
        if node.first_hit {
            c.first[n].cells[i].add(-node.phi);
        }
        c.counts[n] += 1;
        true
    }

    fn fork(&self) -> Self {
        CensusVisitor(PathCensus::empty(self.0.dim, self.0.n_max, self.0.phi1))
    }

    fn merge(&mut self, other: Self) {
        let c = &mut self.0;
        for n in 0..=c.n_max {
            c.all[n].merge(&other.0.all[n]);
            c.first[n].merge(&other.0.first[n]);
            c.counts[n] += other.0.counts[n];
        }
    }
}

impl PathCensus {
    fn empty(dim: usize, n_max: usize, phi1: f64) -> Self {
        PathCensus {
            dim,
            n_max,
            phi1,
            all: (0..=n_max).map(|n| Layer::new(dim, n)).collect(),
            first: (0..=n_max).map(|n| Layer::new(dim, n)).collect(),
            counts: vec![0; n_max + 1],
        }
    }

    /// Census up to the default cap for the potential.
    pub fn build(spec: &PhiSpec, dim: usize, n_max: usize) -> Result<Self> {
        Self::build_capped(spec, dim, n_max, EnumCaps::default_for(dim))
    }

    pub fn build_capped(spec: &PhiSpec, dim: usize, n_max: usize, caps: EnumCaps) -> Result<Self> {
        if dim == 0 || dim > crate::path::MAX_DIM {
            return Err(Error::Dimension(dim));
        }
        let cap = caps.cap_for(spec);
        if n_max > cap {
            return Err(Error::CapExceeded {
                what: "enumeration length",
                requested: n_max,
                cap,
            });
        }
        if spec.is_zero() {
            return Ok(Self::free_walk(dim, n_max, spec.phi1()));
        }
        let v = walk(spec, dim, n_max, CensusVisitor(Self::empty(dim, n_max, spec.phi1())))?;
        Ok(v.0)
    }

    /// Exact counting for `φ ≡ 0`. First-hit counts use the renewal identity
    /// `a_n(x) = Σ_k f_k(x) a_{n−k}(0)` for `x ≠ 0`; at the origin only the
    /// empty path is a first hit.
    fn free_walk(dim: usize, n_max: usize, phi1: f64) -> Self {
        let side = 2 * n_max + 1;
        let cells = side.pow(dim as u32);
        let idx = |x: Site| {
            let mut i = 0usize;
            for k in (0..dim).rev() {
                i = i * side + (x.0[k] + n_max as i32) as usize;
            }
            i
        };
        let big = Layer::new(dim, n_max);
        let mut all_counts: Vec<Vec<u128>> = Vec::with_capacity(n_max + 1);
        let mut cur = vec![0u128; cells];
        cur[idx(Site::ORIGIN)] = 1;
        all_counts.push(cur.clone());
        for n in 1..=n_max {
            let mut next = vec![0u128; cells];
            for (i, &c) in cur.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let x = big.site(dim, i);
                for k in 0..2 * dim {
                    let y = x + Site::unit(k);
                    if y.0.iter().all(|c| c.unsigned_abs() as usize <= n) {
                        next[idx(y)] += c;
                    }
                }
            }
            all_counts.push(next.clone());
            cur = next;
        }
        let o = idx(Site::ORIGIN);
        let returns: Vec<u128> = all_counts.iter().map(|a| a[o]).collect();
        let mut first_counts: Vec<Vec<u128>> = vec![vec![0; cells]; n_max + 1];
        first_counts[0][o] = 1;
        for i in 0..cells {
            if i == o {
                continue;
            }
            for n in 1..=n_max {
                let mut f = all_counts[n][i];
                for k in 1..n {
                    f -= first_counts[k][i] * returns[n - k];
                }
                first_counts[n][i] = f;
            }
        }
        let mut census = Self::empty(dim, n_max, phi1);
        for n in 0..=n_max {
            for i in 0..cells {
                let x = big.site(dim, i);
                if let Some(j) = census.all[n].index(dim, x) {
                    census.all[n].cells[j].add_opt(log_count(all_counts[n][i]));
                    census.first[n].cells[j].add_opt(log_count(first_counts[n][i]));
                }
            }
            census.counts[n] = (2 * dim as u128).pow(n as u32);
        }
        census
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Number of paths of length `n` with finite `Φ`.
    pub fn path_count(&self, n: usize) -> u128 {
        self.counts[n]
    }

    fn check_n(&self, n: usize) -> Result<()> {
        if n > self.n_max {
            return Err(Error::CapExceeded {
                what: "census length",
                requested: n,
                cap: self.n_max,
            });
        }
        Ok(())
    }

    fn check_h(&self, h: &[f64]) -> Result<()> {
        if h.len() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "vector has {} components, dimension is {}",
                h.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// `log Σ_{|γ|=n} e^{−Φ(γ) + (h, D(γ))}`, `None` if every path is rejected.
    pub fn log_z(&self, n: usize, h: &[f64]) -> Result<Option<f64>> {
        self.check_n(n)?;
        self.check_h(h)?;
        let mut acc = LogAccumulator::new();
        for (x, v) in self.all[n].entries(self.dim) {
            acc.add(v + x.dot(h));
        }
        Ok(acc.value())
    }

    /// Endpoint log-masses at length `n` under drift `h`, sorted by site.
    pub fn endpoint_masses(&self, n: usize, h: &[f64]) -> Result<Vec<(Site, f64)>> {
        self.check_n(n)?;
        self.check_h(h)?;
        Ok(self.all[n]
            .entries(self.dim)
            .map(|(x, v)| (x, v + x.dot(h)))
            .collect())
    }

    /// `log Σ_{γ: 0→x, |γ| ≤ N} e^{−Φ(γ) − λ|γ|}`.
    pub fn log_d(&self, x: Site, lambda: f64, n_max: usize) -> Result<Option<f64>> {
        self.gf(&self.all, x, lambda, n_max)
    }

    /// As [`PathCensus::log_d`], restricted to paths hitting `x` first at
    /// their last step. The empty path counts at `x = 0`.
    pub fn log_h(&self, x: Site, lambda: f64, n_max: usize) -> Result<Option<f64>> {
        self.gf(&self.first, x, lambda, n_max)
    }

    fn gf(&self, layers: &[Layer], x: Site, lambda: f64, n_max: usize) -> Result<Option<f64>> {
        self.check_n(n_max)?;
        let mut acc = LogAccumulator::new();
        for (n, layer) in layers.iter().enumerate().take(n_max + 1) {
            if let Some(v) = layer.get(self.dim, x) {
                acc.add(v - lambda * n as f64);
            }
        }
        Ok(acc.value())
    }

    /// All endpoints reachable within `n_max` steps.
    pub fn support(&self, n_max: usize) -> Vec<Site> {
        let mut set = std::collections::BTreeSet::new();
        for layer in self.all.iter().take(n_max + 1) {
            for (x, _) in layer.entries(self.dim) {
                set.insert(x);
            }
        }
        set.into_iter().collect()
    }

    pub fn phi1(&self) -> f64 {
        self.phi1
    }
}

// ---------------------------------------------------------------------------
// Result types and operations

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointMass {
    pub x: Vec<i32>,
    pub log_mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnumerationResult {
    pub n: usize,
    pub h: Vec<f64>,
    pub log_z: Option<f64>,
    /// Number of `n`-step paths with finite `Φ`.
    pub paths: u128,
    pub by_endpoint: Vec<EndpointMass>,
}

pub fn partition_function(spec: &PhiSpec, dim: usize, h: &[f64], n: usize) -> Result<EnumerationResult> {
    let census = PathCensus::build(spec, dim, n)?;
    enumeration_result(&census, h, n)
}

pub fn enumeration_result(census: &PathCensus, h: &[f64], n: usize) -> Result<EnumerationResult> {
    Ok(EnumerationResult {
        n,
        h: h.to_vec(),
        log_z: census.log_z(n, h)?,
        paths: census.path_count(n),
        by_endpoint: census
            .endpoint_masses(n, h)?
            .into_iter()
            .map(|(x, v)| EndpointMass {
                x: x.coords(census.dim()).to_vec(),
                log_mass: v,
            })
            .collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointProb {
    pub x: Vec<i32>,
    pub p: f64,
}

/// Law of `D(γ)` under the canonical measure at length `n`.
pub fn endpoint_distribution(spec: &PhiSpec, dim: usize, h: &[f64], n: usize) -> Result<Vec<EndpointProb>> {
    endpoint_law(&PathCensus::build(spec, dim, n)?, h, n)
}

pub fn endpoint_law(census: &PathCensus, h: &[f64], n: usize) -> Result<Vec<EndpointProb>> {
    let Some(log_z) = census.log_z(n, h)? else {
        return Err(Error::DegenerateModel(format!("every {n}-step path has infinite energy")));
    };
    Ok(census
        .endpoint_masses(n, h)?
        .into_iter()
        .map(|(x, v)| EndpointProb {
            x: x.coords(census.dim()).to_vec(),
            p: (v - log_z).exp(),
        })
        .collect())
}

/// Bound on the part of a generating function carried by paths longer than
/// the truncation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TailBound {
    Bound { log: f64 },
    Unavailable,
}

/// `log Σ_{n > N} e^{(μ − λ) n}` where `Z_n ≤ e^{μ n}`; `μ = log 2d` unless
/// a model-specific growth rate is supplied.
pub fn tail_bound(dim: usize, lambda: f64, n_max: usize, growth: Option<f64>) -> TailBound {
    let mu = growth.unwrap_or(((2 * dim) as f64).ln());
    let log_r = mu - lambda;
    if log_r >= 0.0 {
        return TailBound::Unavailable;
    }
    TailBound::Bound {
        log: (n_max + 1) as f64 * log_r - (-(log_r.exp())).ln_1p(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GFResult {
    pub target: Vec<i32>,
    pub lambda: f64,
    pub log_h: Option<f64>,
    pub log_d: Option<f64>,
    pub n_max: usize,
    pub tail_bound: TailBound,
}

pub fn gf_result(census: &PathCensus, x: Site, lambda: f64, n_max: usize, growth: Option<f64>) -> Result<GFResult> {
    Ok(GFResult {
        target: x.coords(census.dim()).to_vec(),
        lambda,
        log_h: census.log_h(x, lambda, n_max)?,
        log_d: census.log_d(x, lambda, n_max)?,
        n_max,
        tail_bound: tail_bound(census.dim(), lambda, n_max, growth),
    })
}

/// Truncated first-hit generating function `H_λ(x)`.
pub fn hitting_gf(spec: &PhiSpec, x: &[i32], lambda: f64, n_max: usize) -> Result<GFResult> {
    let census = PathCensus::build(spec, x.len(), n_max)?;
    gf_result(&census, Site::from_slice(x), lambda, n_max, None)
}

/// Truncated two-point generating function `D_λ(x)`.
pub fn all_paths_gf(spec: &PhiSpec, x: &[i32], lambda: f64, n_max: usize) -> Result<GFResult> {
    hitting_gf(spec, x, lambda, n_max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    /// `log Z_n / n` for `n = 1, 2, …`.
    pub series: Vec<f64>,
}

/// Bracket on `lim log Z_n^h / n` from sub- or super-additivity.
///
/// Repulsive potentials give `hi = min_n`, attractive ones `lo = max_n`.
/// The other edge is the a priori bound: `max_e (h,e) − φ(1)` below,
/// `log Σ_e e^{(h,e)}` above.
pub fn fekete_bracket(census: &PathCensus, spec: &PhiSpec, h: &[f64], n_max: usize) -> Result<Bracket> {
    let dim = census.dim();
    let mut series = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let lz = census
            .log_z(n, h)?
            .ok_or_else(|| Error::DegenerateModel(format!("Z_{n} = 0")))?;
        series.push(lz / n as f64);
    }
    let steps: Vec<f64> = (0..2 * dim).map(|k| Site::unit(k).dot(h)).collect();
    let mut lo = steps.iter().cloned().fold(f64::MIN, f64::max) - spec.phi1();
    let mut hi = crate::logspace::log_sum_exp(steps.iter().cloned()).unwrap();
    if spec.is_repulsive() {
        hi = hi.min(series.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    if spec.is_attractive() {
        lo = lo.max(series.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }
    Ok(Bracket { lo, hi, series })
}

pub fn connectivity_constant(spec: &PhiSpec, dim: usize, n_max: usize) -> Result<Bracket> {
    let census = PathCensus::build(spec, dim, n_max)?;
    fekete_bracket(&census, spec, &vec![0.0; dim], n_max)
}

// ---------------------------------------------------------------------------
// Restricted partition functions

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Observable {
    Length,
    PatternCount { pattern: Pattern },
    /// Number of unoriented bonds traversed more than once.
    DoubledBonds,
}

impl Observable {
    pub fn evaluate(&self, path: &LatticePath) -> i64 {
        match self {
            Observable::Length => path.len() as i64,
            Observable::PatternCount { pattern } => path.count_pattern(pattern) as i64,
            Observable::DoubledBonds => path
                .local_times(Locality::UnorientedBond)
                .counts
                .values()
                .filter(|&&c| c > 1)
                .count() as i64,
        }
    }
}

struct RestrictedVisitor<'a> {
    dim: usize,
    n: usize,
    h: &'a [f64],
    obs: &'a Observable,
    masses: BTreeMap<i64, LogAccumulator>,
}

impl Visitor for RestrictedVisitor<'_> {
    fn visit(&mut self, node: &Node<'_>) -> bool {
        if node.depth() < self.n {
            return true;
        }
        let path = LatticePath::from_sites_unchecked(self.dim, node.sites.to_vec());
        let f = self.obs.evaluate(&path);
        self.masses
            .entry(f)
            .or_default()
            .add(-node.phi + node.end().dot(self.h));
        false
    }

    fn fork(&self) -> Self {
        RestrictedVisitor {
            dim: self.dim,
            n: self.n,
            h: self.h,
            obs: self.obs,
            masses: BTreeMap::new(),
        }
    }

    fn merge(&mut self, other: Self) {
        for (k, v) in other.masses {
            self.masses.entry(k).or_default().merge(&v);
        }
    }
}

/// `f ↦ log Σ_{|γ|=n, F(γ)=f} W^h(γ)` over every value `f` that occurs.
pub fn restricted_masses(
    spec: &PhiSpec,
    dim: usize,
    h: &[f64],
    n: usize,
    obs: &Observable,
) -> Result<BTreeMap<i64, f64>> {
    check_cap(spec, dim, n)?;
    if h.len() != dim {
        return Err(Error::InvalidParameter("drift dimension mismatch".into()));
    }
    let v = walk(
        spec,
        dim,
        n,
        RestrictedVisitor {
            dim,
            n,
            h,
            obs,
            masses: BTreeMap::new(),
        },
    )?;
    Ok(v.masses
        .into_iter()
        .filter_map(|(k, a)| a.value().map(|v| (k, v)))
        .collect())
}

pub fn restricted_pf(
    spec: &PhiSpec,
    dim: usize,
    h: &[f64],
    n: usize,
    obs: &Observable,
    f: i64,
) -> Result<Option<f64>> {
    Ok(restricted_masses(spec, dim, h, n, obs)?.get(&f).copied())
}

// ---------------------------------------------------------------------------
// Bubble bound

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BubbleReport {
    /// `log H(x) + log H(y)`, each truncated at `N/2`.
    pub lhs: Option<f64>,
    /// `log 2 + φ(1) + log Σ_z D(z)² + log H(x+y)`, truncated at `N`.
    pub rhs: Option<f64>,
    pub log_bubble: Option<f64>,
    pub holds: bool,
    /// `rhs − lhs` in log scale.
    pub slack: Option<f64>,
    /// Bound on what truncation removed from `H(x+y)`.
    pub rhs_tail: TailBound,
}

pub fn bubble_check(census: &PathCensus, x: Site, y: Site, lambda: f64, n_max: usize) -> Result<BubbleReport> {
    let half = n_max / 2;
    let hx = census.log_h(x, lambda, half)?;
    let hy = census.log_h(y, lambda, half)?;
    let lhs = match (hx, hy) {
        (Some(a), Some(b)) => Some(a + b),
        _ => None,
    };
    let mut bubble = LogAccumulator::new();
    for z in census.support(n_max) {
        if let Some(d) = census.log_d(z, lambda, n_max)? {
            bubble.add(2.0 * d);
        }
    }
    let log_bubble = bubble.value();
    let hxy = census.log_h(x + y, lambda, n_max)?;
    let rhs = match (log_bubble, hxy) {
        (Some(b), Some(h)) => Some(std::f64::consts::LN_2 + census.phi1() + b + h),
        _ => None,
    };
    let holds = match (lhs, rhs) {
        (None, _) => true,
        (Some(_), None) => false,
        (Some(l), Some(r)) => l <= r + 1e-12 * r.abs().max(1.0),
    };
    Ok(BubbleReport {
        lhs,
        rhs,
        log_bubble,
        holds,
        slack: lhs.zip(rhs).map(|(l, r)| r - l),
        rhs_tail: tail_bound(census.dim(), lambda, n_max, None),
    })
}
