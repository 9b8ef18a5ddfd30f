//! Truncated mass of the weight `W̄^{h,λ}` on irreducible paths.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::enumerate::{check_cap, walk, EnumCaps, Node, Visitor};
use crate::error::{Error, Result};
use crate::geometry::{CachedNorm, ConeSpec, LatticeNorm};
use crate::logspace::{log_add, log_sum_exp, LogAccumulator};
use crate::path::{LatticePath, Locality, Site};
use crate::potential::{PerturbationSpec, PhiSpec};
use crate::stats::{linear_fit, LineFit};

/// Masses above `1 + QMASS_TOLERANCE` signal a drift outside `K_λ`.
pub const QMASS_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QMethod {
    /// Depth-first enumeration inside the forward cone.
    Enumeration,
    /// Exact renewal recursion for the free walk on `Z`.
    Renewal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QMass {
    pub n_max: usize,
    pub h: Vec<f64>,
    pub lambda: f64,
    pub delta: f64,
    pub method: QMethod,
    /// `Σ_{|ω| ≤ N} W̄(ω)` for `N = 0..=n_max`.
    pub cumulative: Vec<f64>,
    /// `log Σ_{|ω| = n} W̄(ω)`.
    pub by_length: Vec<Option<f64>>,
    /// `‖D(ω)‖₁ ↦ log Σ W̄(ω)`.
    pub by_distance: BTreeMap<i64, f64>,
    pub mass: f64,
    pub exceeds_one: bool,
}

/// Per-length record of a perturbation over the enumerated pieces.
#[derive(Clone, Debug, Default)]
struct RateTrack {
    /// `log Σ e^{(g, D) − Φ − R}` over pieces of this length.
    weight: LogAccumulator,
    /// The common value of `R` when every piece of this length shares it.
    common: Option<f64>,
    uniform: bool,
    seen: bool,
}

impl RateTrack {
    fn add(&mut self, w: f64, r: f64) {
        self.weight.add(w - r);
        if !self.seen {
            self.seen = true;
            self.uniform = true;
            self.common = Some(r);
        } else if self.common != Some(r) {
            self.uniform = false;
        }
    }

    fn merge(&mut self, other: &RateTrack) {
        if !other.seen {
            return;
        }
        self.weight.merge(&other.weight);
        if !self.seen {
            *self = other.clone();
        } else {
            self.uniform &= other.uniform && self.common == other.common;
        }
    }
}

/// Cone-membership state along the current branch of the depth-first pass.
struct QVisitor<'a> {
    dim: usize,
    norm: &'a dyn LatticeNorm,
    cone: ConeSpec,
    tilt: &'a [f64],
    lambda: f64,
    junction: f64,
    perturbation: Option<&'a PerturbationSpec>,
    /// `fwd[n][k]`: every point after `k` up to depth `n` is in the forward
    /// cone of point `k`.
    fwd: Vec<Vec<bool>>,
    /// Every point before `k` is in the backward cone of point `k`.
    bwd: Vec<bool>,
    by_length: Vec<LogAccumulator>,
    by_distance: BTreeMap<i64, LogAccumulator>,
    rates: Vec<RateTrack>,
    error: Option<Error>,
}

impl QVisitor<'_> {
    fn extend(&mut self, sites: &[Site]) {
        let n = self.fwd.len();
        let p = sites[n];
        let mut flags = match self.fwd.last() {
            Some(prev) => prev
                .iter()
                .enumerate()
                .map(|(k, &f)| f && self.cone.forward(self.norm, p - sites[k]))
                .collect(),
            None => Vec::new(),
        };
        flags.push(true);
        self.fwd.push(flags);
        let b = sites[..n].iter().all(|&q| self.cone.backward(self.norm, q - p));
        self.bwd.truncate(n);
        self.bwd.push(b);
    }
}

impl Visitor for QVisitor<'_> {
    fn visit(&mut self, node: &Node<'_>) -> bool {
        if self.error.is_some() {
            return false;
        }
        let n = node.depth();
        self.fwd.truncate(n);
        while self.fwd.len() <= n {
            self.extend(node.sites);
        }
        let flags = &self.fwd[n];
        if n == 0 {
            return true;
        }
        if !flags[0] {
            return false;
        }
        let irreducible = self.bwd[n] && (1..n).all(|k| !(self.bwd[k] && flags[k]));
        if irreducible {
            let end = node.end();
            let w = -node.phi + end.dot(self.tilt) - self.lambda * n as f64 + self.junction;
            self.by_length[n].add(w);
            self.by_distance.entry(end.l1()).or_default().add(w);
            if let Some(pert) = self.perturbation {
                let r = LatticePath::new(self.dim, node.sites.to_vec()).and_then(|p| pert.evaluate(&p, self.tilt));
                match r {
                    Ok(r) => self.rates[n].add(w, r),
                    Err(e) => {
                        self.error = Some(e);
                        return false;
                    }
                }
            }
        }
        true
    }

    fn fork(&self) -> Self {
        QVisitor {
            dim: self.dim,
            norm: self.norm,
            cone: self.cone.clone(),
            tilt: self.tilt,
            lambda: self.lambda,
            junction: self.junction,
            perturbation: self.perturbation,
            fwd: Vec::new(),
            bwd: Vec::new(),
            by_length: vec![LogAccumulator::new(); self.by_length.len()],
            by_distance: BTreeMap::new(),
            rates: vec![RateTrack::default(); self.rates.len()],
            error: None,
        }
    }

    fn merge(&mut self, other: Self) {
        for (a, b) in self.by_length.iter_mut().zip(&other.by_length) {
            a.merge(b);
        }
        for (k, v) in other.by_distance {
            self.by_distance.entry(k).or_default().merge(&v);
        }
        for (a, b) in self.rates.iter_mut().zip(&other.rates) {
            a.merge(b);
        }
        if self.error.is_none() {
            self.error = other.error;
        }
    }
}

struct Profile {
    method: QMethod,
    by_length: Vec<Option<f64>>,
    by_distance: BTreeMap<i64, f64>,
    rates: Option<Vec<RateTrack>>,
}

fn profile(
    spec: &PhiSpec,
    tilt: &[f64],
    lambda: f64,
    n_max: usize,
    norm: &dyn LatticeNorm,
    cone: &ConeSpec,
    perturbation: Option<&PerturbationSpec>,
) -> Result<Profile> {
    let dim = norm.dim();
    if cone.h.len() != dim || tilt.len() != dim {
        return Err(Error::InvalidParameter("drift dimension mismatch".into()));
    }
    if dim == 1 && spec.is_zero() && perturbation.is_none() {
        let (by_length, by_distance) = renewal_d1(tilt[0], lambda, n_max, norm, cone)?;
        return Ok(Profile {
            method: QMethod::Renewal,
            by_length,
            by_distance,
            rates: None,
        });
    }
    if perturbation.is_some() {
        // every piece is rebuilt and evaluated, so counting caps do not apply
        let cap = EnumCaps::default_for(dim).general;
        if n_max > cap {
            return Err(Error::CapExceeded {
                what: "perturbed enumeration length",
                requested: n_max,
                cap,
            });
        }
    } else {
        check_cap(spec, dim, n_max)?;
    }
    let junction = match spec.locality() {
        Locality::Site => spec.phi1(),
        _ => 0.0,
    };
    let cached = CachedNorm::new(norm, n_max);
    let v = walk(
        spec,
        dim,
        n_max,
        QVisitor {
            dim,
            norm: &cached,
            cone: cone.with_multiplier(3),
            tilt,
            lambda,
            junction,
            perturbation,
            fwd: Vec::new(),
            bwd: Vec::new(),
            by_length: vec![LogAccumulator::new(); n_max + 1],
            by_distance: BTreeMap::new(),
            rates: vec![RateTrack::default(); if perturbation.is_some() { n_max + 1 } else { 0 }],
            error: None,
        },
    )?;
    if let Some(e) = v.error {
        return Err(e);
    }
    let by_length = v.by_length.iter().map(LogAccumulator::value).collect();
    let by_distance = v
        .by_distance
        .into_iter()
        .filter_map(|(k, a)| a.value().map(|x| (k, x)))
        .collect();
    Ok(Profile {
        method: QMethod::Enumeration,
        by_length,
        by_distance,
        rates: perturbation.map(|_| v.rates),
    })
}

/// `Σ W̄^{h,λ}(ω)` over irreducible `ω` with `|ω| ≤ n_max`, with the cone
/// drift taken from `cone.h`. The free walk on `Z` uses an exact renewal
/// recursion; everything else is enumerated.
pub fn q_measure_mass(
    spec: &PhiSpec,
    lambda: f64,
    n_max: usize,
    norm: &dyn LatticeNorm,
    cone: &ConeSpec,
) -> Result<QMass> {
    let p = profile(spec, &cone.h, lambda, n_max, norm, cone, None)?;
    let mut cumulative = Vec::with_capacity(n_max + 1);
    let mut acc = 0.0;
    for v in &p.by_length {
        acc += v.map_or(0.0, f64::exp);
        cumulative.push(acc);
    }
    Ok(QMass {
        n_max,
        h: cone.h.clone(),
        lambda,
        delta: cone.delta,
        method: p.method,
        mass: acc,
        exceeds_one: acc > 1.0 + QMASS_TOLERANCE,
        cumulative,
        by_length: p.by_length,
        by_distance: p.by_distance,
    })
}

/// Irreducible pieces for a fixed cone, weighted by `e^{(g, D(ω))} W̄(ω)`
/// with no length penalty, so that any `μ` is applied afterwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrreducibleProfile {
    pub n_max: usize,
    pub tilt: Vec<f64>,
    pub cone_h: Vec<f64>,
    pub delta: f64,
    pub method: QMethod,
    /// `log Σ_{|ω| = n} e^{(g, D(ω))} W̄(ω)`.
    pub by_length: Vec<Option<f64>>,
    /// The same with an extra factor `e^{−R(ω, g)}`, when a perturbation is
    /// given.
    pub perturbed: Option<Vec<Option<f64>>>,
    /// `c` when every piece has `R(ω, g) = c|ω|` exactly.
    pub common_rate: Option<f64>,
}

impl IrreducibleProfile {
    /// `log Σ_{|ω| ≤ N} e^{(g, D(ω)) − μ|ω|} W̄(ω)` for `N = 0..=n_max`;
    /// `−∞` before the first piece.
    pub fn log_mass_by_cutoff(&self, mu: f64) -> Vec<f64> {
        let mut acc = None;
        self.by_length
            .iter()
            .enumerate()
            .map(|(n, v)| {
                acc = log_add(acc, v.map(|v| v - mu * n as f64));
                acc.unwrap_or(f64::NEG_INFINITY)
            })
            .collect()
    }

    pub fn log_mass(&self, mu: f64) -> f64 {
        *self.log_mass_by_cutoff(mu).last().unwrap()
    }
}

pub fn irreducible_profile(
    spec: &PhiSpec,
    tilt: &[f64],
    n_max: usize,
    norm: &dyn LatticeNorm,
    cone: &ConeSpec,
    perturbation: Option<&PerturbationSpec>,
) -> Result<IrreducibleProfile> {
    let p = profile(spec, tilt, 0.0, n_max, norm, cone, perturbation)?;
    let (perturbed, common_rate) = match &p.rates {
        None => (None, None),
        Some(rates) => {
            let weights = rates.iter().map(|r| r.weight.value()).collect();
            (Some(weights), common_rate(rates))
        }
    };
    Ok(IrreducibleProfile {
        n_max,
        tilt: tilt.to_vec(),
        cone_h: cone.h.clone(),
        delta: cone.delta,
        method: p.method,
        by_length: p.by_length,
        perturbed,
        common_rate,
    })
}

/// The rate read off the shortest length, if it reproduces `R` on every
/// length as `c · n`.
fn common_rate(rates: &[RateTrack]) -> Option<f64> {
    let seen: Vec<(usize, &RateTrack)> = rates.iter().enumerate().filter(|(_, r)| r.seen).collect();
    let &(n0, first) = seen.first()?;
    let c = first.common? / n0 as f64;
    seen.iter()
        .all(|(n, r)| r.uniform && r.common == Some(c * *n as f64))
        .then_some(c)
}

type Masses = (Vec<Option<f64>>, BTreeMap<i64, f64>);

/// On `Z` the aperture-`3δ` cones are half-lines, so a path is irreducible
/// iff it is a strict bridge (interior strictly between its endpoints) with
/// no interior cut point. Bridges are renewal sequences of irreducible
/// pieces, which inverts to a recursion in `(|ω|, D(ω))`.
fn renewal_d1(tilt: f64, lambda: f64, n_max: usize, norm: &dyn LatticeNorm, cone: &ConeSpec) -> Result<Masses> {
    let wide = cone.with_multiplier(3);
    let up = wide.forward(norm, Site::unit(0));
    let down = wide.forward(norm, Site::unit(1));
    let sign = match (up, down) {
        (true, false) => 1.0,
        (false, true) => -1.0,
        _ => {
            return Err(Error::InvalidParameter(
                "the forward cone must contain exactly one direction on Z".into(),
            ))
        }
    };
    let h = sign * tilt;
    let log_p = h - lambda;
    let log_q = -h - lambda;
    let n = n_max;
    // bridges[len][x] in log scale; x ≥ 1, interior confined to 1..x−1
    let mut bridge = vec![vec![None::<f64>; n + 1]; n + 1];
    for x in 1..=n {
        if x == 1 {
            bridge[1][1] = Some(log_p);
            continue;
        }
        // walk from 1 to x−1 inside [1, x−1], framed by two up-steps
        let width = x - 1;
        let mut cur = vec![None::<f64>; width + 2];
        cur[1] = Some(0.0);
        for m in 0..=n.saturating_sub(2) {
            if let Some(v) = cur[width] {
                bridge[m + 2][x] = Some(v + 2.0 * log_p);
            }
            let mut next = vec![None::<f64>; width + 2];
            for y in 1..=width {
                let Some(v) = cur[y] else { continue };
                if y < width {
                    next[y + 1] = Some(add(next[y + 1], v + log_p));
                }
                if y > 1 {
                    next[y - 1] = Some(add(next[y - 1], v + log_q));
                }
            }
            cur = next;
        }
    }
    // B = I + I * B on paths of positive length
    let mut irr = vec![vec![None::<f64>; n + 1]; n + 1];
    for len in 1..=n {
        for x in 1..=len {
            let Some(b) = bridge[len][x] else { continue };
            let mut sub = LogAccumulator::new();
            for l1 in 1..len {
                for x1 in 1..x.min(l1 + 1) {
                    if let (Some(a), Some(c)) = (irr[l1][x1], bridge[len - l1][x - x1]) {
                        sub.add(a + c);
                    }
                }
            }
            irr[len][x] = match sub.value() {
                None => Some(b),
                Some(s) => {
                    let d = b.exp() - s.exp();
                    (d > 0.0).then(|| d.ln())
                }
            };
        }
    }
    let by_length = (0..=n)
        .map(|len| {
            log_sum_exp(irr[len].iter().flatten().copied())
        })
        .collect();
    let mut by_distance = BTreeMap::new();
    for x in 1..=n {
        if let Some(v) = log_sum_exp((1..=n).filter_map(|len| irr[len][x])) {
            by_distance.insert(x as i64, v);
        }
    }
    Ok((by_length, by_distance))
}

fn add(a: Option<f64>, b: f64) -> f64 {
    log_add(a, Some(b)).unwrap()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QTailStats {
    /// Fit of `log Q(|ω| = n)` against `n` over the upper half of lengths.
    pub length: Option<LineFit>,
    /// Fit of `log Q(‖D(ω)‖₁ = ℓ)` against `ℓ` over `ℓ ≤ n_max / 2`, where
    /// truncation in length removes little mass.
    pub distance: Option<LineFit>,
    pub violations: Vec<String>,
}

pub fn q_tail_stats(q: &QMass) -> QTailStats {
    let half = (q.n_max / 2).max(1);
    let len_pts: Vec<(f64, f64)> = q
        .by_length
        .iter()
        .enumerate()
        .filter(|&(n, _)| n >= half)
        .filter_map(|(n, v)| v.map(|v| (n as f64, v)))
        .collect();
    let dist_pts: Vec<(f64, f64)> = q
        .by_distance
        .iter()
        .filter(|&(&l, _)| l >= 1 && l as usize <= half)
        .map(|(&l, &v)| (l as f64, v))
        .collect();
    let length = linear_fit(&len_pts);
    let distance = linear_fit(&dist_pts);
    let mut violations = Vec::new();
    for (name, fit) in [("length", &length), ("distance", &distance)] {
        match fit {
            Some(f) if f.slope >= 0.0 => violations.push(format!("{name} tail slope {} is not negative", f.slope)),
            None => violations.push(format!("{name} tail has too few points to fit")),
            _ => {}
        }
    }
    QTailStats {
        length,
        distance,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{free_walk_table, free_walk_xi, WulffShape, DEFAULT_TOLERANCE};

    fn line(lambda: f64) -> (WulffShape, f64) {
        let xi = free_walk_xi(lambda, &[1.0]).unwrap();
        let t = free_walk_table(1, lambda, 1).unwrap();
        (WulffShape::from_table(t, DEFAULT_TOLERANCE).unwrap(), xi)
    }

    /// Direct enumeration over all ±1 sequences with the strict cone rule.
    fn brute(h: f64, lambda: f64, n_max: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_max + 1];
        for n in 1..=n_max {
            for bits in 0u32..(1 << n) {
                let mut s = vec![0i32];
                for i in 0..n {
                    s.push(s[i] + if bits >> i & 1 == 1 { 1 } else { -1 });
                }
                let cone = |k: usize| (0..=n).all(|j| j == k || (j < k && s[j] < s[k]) || (j > k && s[j] > s[k]));
                if cone(0) && cone(n) && (1..n).all(|k| !cone(k)) {
                    out[n] += (h * s[n] as f64 - lambda * n as f64).exp();
                }
            }
        }
        out
    }

    #[test]
    fn renewal_matches_enumeration_and_brute_force() {
        let lambda = 2.5f64.ln();
        let (t, xi) = line(lambda);
        for h in [xi, 0.8 * xi] {
            let cone = ConeSpec::new(&t, vec![h], 0.1, 1).unwrap();
            let r = q_measure_mass(&PhiSpec::free(Locality::Site), lambda, 14, &t, &cone).unwrap();
            assert_eq!(r.method, QMethod::Renewal);
            let b = brute(h, lambda, 14);
            let e = q_measure_mass(&PhiSpec::saw(Locality::Site).sl_normalized(), lambda, 6, &t, &cone).unwrap();
            assert_eq!(e.method, QMethod::Enumeration);
            for n in 1..=14 {
                let got = r.by_length[n].map_or(0.0, f64::exp);
                assert!((got - b[n]).abs() < 1e-12, "n={n}: {got} vs {}", b[n]);
            }
            assert!(r.cumulative.windows(2).all(|w| w[1] >= w[0]));
            // on Z the only self-avoiding irreducible piece is one step
            assert!((e.mass - (h - lambda).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_mass_tends_to_one() {
        let lambda = 2.5f64.ln();
        let (t, xi) = line(lambda);
        let cone = ConeSpec::new(&t, vec![xi], 0.1, 1).unwrap();
        let r = q_measure_mass(&PhiSpec::free(Locality::Site), lambda, 40, &t, &cone).unwrap();
        assert!((1.0 - r.mass) < 1e-3 && r.mass <= 1.0 + 1e-9, "{}", r.mass);
        let inner = ConeSpec::new(&t, vec![0.8 * xi], 0.1, 1).unwrap();
        let r = q_measure_mass(&PhiSpec::free(Locality::Site), lambda, 40, &t, &inner).unwrap();
        assert!(r.mass < 0.95);
        let stats = q_tail_stats(&r);
        assert!(stats.violations.is_empty(), "{:?}", stats.violations);
    }

    #[test]
    fn enumeration_in_two_dimensions() {
        let lambda = 1.8;
        let s = WulffShape::from_table(free_walk_table(2, lambda, 4).unwrap(), DEFAULT_TOLERANCE).unwrap();
        let h = s.dual_drift(&[1.0, 0.0]).unwrap().h;
        let cone = ConeSpec::new(&s, h, 0.1, 1).unwrap();
        let spec = PhiSpec::free(Locality::Site);
        let r = q_measure_mass(&spec, lambda, 8, &s, &cone).unwrap();
        assert!(r.cumulative.windows(2).all(|w| w[1] >= w[0]));
        assert!(r.mass > 0.0 && !r.exceeds_one);
        // one-step pieces: only +e₁ lies in the forward cone
        let one = r.by_length[1].unwrap().exp();
        assert!((one - (r.h[0] - lambda).exp()).abs() < 1e-12);
    }

    #[test]
    fn profile_shifts_to_the_q_measure() {
        let lambda = 1.8;
        let s = WulffShape::from_table(free_walk_table(2, lambda, 4).unwrap(), DEFAULT_TOLERANCE).unwrap();
        let h = s.dual_drift(&[1.0, 0.0]).unwrap().h;
        let cone = ConeSpec::new(&s, h.clone(), 0.1, 1).unwrap();
        let spec = PhiSpec::saw(Locality::Site);
        let q = q_measure_mass(&spec, lambda, 8, &s, &cone).unwrap();
        let p = irreducible_profile(&spec, &h, 8, &s, &cone, Some(&PerturbationSpec::linear(0.05))).unwrap();
        assert!((p.log_mass(lambda) - q.mass.ln()).abs() < 1e-12);
        assert_eq!(p.common_rate, Some(0.05));
        let pert = p.perturbed.as_ref().unwrap();
        for n in 1..=8 {
            if let (Some(a), Some(b)) = (p.by_length[n], pert[n]) {
                assert!((a - 0.05 * n as f64 - b).abs() < 1e-12);
            }
        }
        let z = irreducible_profile(&spec, &h, 8, &s, &cone, Some(&PerturbationSpec::zero())).unwrap();
        assert_eq!(z.common_rate, Some(0.0));
        let r = irreducible_profile(&spec, &h, 8, &s, &cone, Some(&PerturbationSpec::edge_reinforcement(0.05))).unwrap();
        assert_eq!(r.common_rate, None);
    }
}
