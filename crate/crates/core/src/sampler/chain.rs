//! Metropolis chain on `n`-step paths targeting `P_n^h ∝ e^{−Φ(γ)+(h,D(γ))}`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::diagnostics::sokal_tau;
use crate::error::{Error, Result};
use crate::path::{LatticePath, Locality, Site, MAX_DIM};
use crate::potential::{GCParams, PhiSpec};

/// Probabilities of the three move families. The local family splits
/// evenly between kink swaps and single-step replacements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveMix {
    pub local: f64,
    pub regrowth: f64,
    pub pivot: f64,
}

impl Default for MoveMix {
    fn default() -> Self {
        MoveMix {
            local: 0.4,
            regrowth: 0.3,
            pivot: 0.3,
        }
    }
}

/// Longest head or tail segment redrawn by a regrowth move.
pub const MAX_REGROWTH: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n: usize,
    pub params: GCParams,
    #[serde(default)]
    pub mix: MoveMix,
    /// A sweep is `n` proposals; one sample is kept every `thinning` sweeps
    /// after `burn_in`.
    pub sweeps: usize,
    pub burn_in: usize,
    #[serde(default = "one")]
    pub thinning: usize,
    pub seed: u64,
    #[serde(default = "one")]
    pub chains: usize,
    #[serde(default)]
    pub keep_paths: bool,
    /// Starting path; a straight path along the strongest drift otherwise.
    #[serde(default)]
    pub initial: Option<LatticePath>,
}

fn one() -> usize {
    1
}

impl ChainConfig {
    pub fn new(n: usize, h: Vec<f64>, sweeps: usize, burn_in: usize, seed: u64) -> Self {
        ChainConfig {
            n,
            params: GCParams::drift(h),
            mix: MoveMix::default(),
            sweeps,
            burn_in,
            thinning: 1,
            seed,
            chains: 1,
            keep_paths: false,
            initial: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.params.h.len()
    }

    pub fn samples_per_chain(&self) -> usize {
        (self.sweeps - self.burn_in) / self.thinning
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 || d > MAX_DIM {
            return Err(Error::Dimension(d));
        }
        if self.n == 0 || self.n > COORD_RANGE {
            return Err(Error::InvalidParameter(format!("path length {} out of range", self.n)));
        }
        let m = self.mix;
        if [m.local, m.regrowth, m.pivot].iter().any(|p| !(*p >= 0.0)) || (m.local + m.regrowth + m.pivot - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("move mix must be non-negative and sum to 1".into()));
        }
        if self.burn_in >= self.sweeps || self.thinning == 0 || self.chains == 0 {
            return Err(Error::InvalidParameter(
                "need burn_in < sweeps, thinning ≥ 1 and at least one chain".into(),
            ));
        }
        if let Some(p) = &self.initial {
            if p.dim() != d || p.len() != self.n || p.start() != Site::ORIGIN {
                return Err(Error::InvalidParameter(
                    "initial path must start at the origin with the configured length".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MoveStats {
    pub attempted: u64,
    pub accepted: u64,
}

impl MoveStats {
    pub fn rate(&self) -> f64 {
        if self.attempted == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempted as f64
        }
    }

    fn merge(&mut self, o: &MoveStats) {
        self.attempted += o.attempted;
        self.accepted += o.accepted;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Acceptance {
    pub kink: MoveStats,
    pub replace: MoveStats,
    pub regrowth: MoveStats,
    pub pivot: MoveStats,
}

impl Acceptance {
    fn merge(&mut self, o: &Acceptance) {
        self.kink.merge(&o.kink);
        self.replace.merge(&o.replace);
        self.regrowth.merge(&o.regrowth);
        self.pivot.merge(&o.pivot);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub n: usize,
    pub dim: usize,
    pub h: Vec<f64>,
    pub seed: u64,
    pub chains: usize,
    pub per_chain: usize,
    pub thinning: usize,
    pub sweeps: usize,
    /// Endpoints of the thinned samples, `dim` integers each, chain after
    /// chain.
    pub endpoints: Vec<i32>,
    pub acceptance: Acceptance,
    /// Integrated autocorrelation time of each endpoint coordinate, in
    /// samples.
    pub tau: Vec<f64>,
    /// Fewer than 50 autocorrelation times (in sweeps) were run.
    pub flagged: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub paths: Vec<LatticePath>,
}

impl ChainStats {
    pub fn len(&self) -> usize {
        self.endpoints.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.endpoints.is_empty()
    }

    pub fn endpoint(&self, i: usize) -> &[i32] {
        &self.endpoints[i * self.dim..(i + 1) * self.dim]
    }

    /// Endpoint coordinate `axis` of every sample.
    pub fn coordinate(&self, axis: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.endpoint(i)[axis] as f64).collect()
    }

    /// `(h, D)` of every sample, with `h` normalized; the first axis when
    /// `h = 0`.
    pub fn projection(&self) -> Vec<f64> {
        let norm = self.h.iter().map(|x| x * x).sum::<f64>().sqrt();
        let dir: Vec<f64> = if norm > 0.0 {
            self.h.iter().map(|x| x / norm).collect()
        } else {
            (0..self.dim).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect()
        };
        (0..self.len())
            .map(|i| {
                self.endpoint(i)
                    .iter()
                    .zip(&dir)
                    .map(|(&c, d)| c as f64 * d)
                    .sum()
            })
            .collect()
    }
}

/// Coordinates are packed into 15-bit fields for local-time bookkeeping.
const COORD_RANGE: usize = (1 << 14) - 1;

fn pack(s: Site) -> u64 {
    s.0.iter()
        .fold(0u64, |acc, &c| (acc << 15) | (c + (1 << 14)) as u64)
}

/// Evaluates `−Φ(γ) + (h, D(γ))` from scratch with a tabulated `φ`.
struct Energy<'a> {
    locality: Locality,
    /// `φ(l)` for `l ≤ n + 1`; `None` for `+∞`.
    phi: Vec<Option<f64>>,
    h: &'a [f64],
    keys: Vec<u64>,
}

impl<'a> Energy<'a> {
    fn new(spec: &PhiSpec, h: &'a [f64], n: usize) -> Result<Self> {
        spec.ensure_range(n as u32 + 1)?;
        let phi = (0..=n as u32 + 1)
            .map(|l| spec.phi(l).map(|e| e.finite()))
            .collect::<Result<_>>()?;
        Ok(Energy {
            locality: spec.locality(),
            phi,
            h,
            keys: Vec::with_capacity(n + 1),
        })
    }

    fn log_weight(&mut self, sites: &[Site]) -> Option<f64> {
        self.keys.clear();
        match self.locality {
            Locality::Site => self.keys.extend(sites.iter().map(|&s| pack(s))),
            kind => self.keys.extend(sites.windows(2).map(|w| {
                let (mut a, mut k) = (w[0], (w[1] - w[0]).step_index().unwrap());
                if kind == Locality::UnorientedBond && k % 2 == 1 {
                    a = w[1];
                    k -= 1;
                }
                (pack(a) << 3) | k as u64
            })),
        }
        self.keys.sort_unstable();
        let mut total = 0.0;
        let mut i = 0;
        while i < self.keys.len() {
            let mut j = i + 1;
            while j < self.keys.len() && self.keys[j] == self.keys[i] {
                j += 1;
            }
            total += self.phi[j - i]?;
            i = j;
        }
        let end = *sites.last().unwrap();
        Some(-total + end.dot(self.h))
    }
}

/// A signed permutation of the axes acting on step indices.
#[derive(Clone, Copy, Debug)]
struct Symmetry {
    perm: [usize; MAX_DIM],
    flip: [bool; MAX_DIM],
}

impl Symmetry {
    fn random(dim: usize, rng: &mut ChaCha8Rng) -> Symmetry {
        loop {
            let mut perm = [0, 1, 2, 3];
            perm[..dim].shuffle(rng);
            let mut flip = [false; MAX_DIM];
            for f in flip.iter_mut().take(dim) {
                *f = rng.gen();
            }
            let identity = (0..dim).all(|i| perm[i] == i && !flip[i]);
            if !identity {
                return Symmetry { perm, flip };
            }
        }
    }

    #[inline]
    fn apply(&self, k: u8) -> u8 {
        let axis = (k / 2) as usize;
        let neg = (k % 2 == 1) ^ self.flip[axis];
        (2 * self.perm[axis] + usize::from(neg)) as u8
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Move {
    Kink,
    Replace,
    Regrowth,
    Pivot,
}

struct Chain<'a> {
    dim: usize,
    mix: MoveMix,
    rng: ChaCha8Rng,
    energy: Energy<'a>,
    steps: Vec<u8>,
    sites: Vec<Site>,
    log_w: f64,
    new_steps: Vec<u8>,
    new_sites: Vec<Site>,
    acceptance: Acceptance,
}

fn fill_sites(steps: &[u8], sites: &mut Vec<Site>) {
    sites.clear();
    sites.push(Site::ORIGIN);
    let mut cur = Site::ORIGIN;
    for &k in steps {
        cur = cur + Site::unit(k as usize);
        sites.push(cur);
    }
}

impl<'a> Chain<'a> {
    fn propose(&mut self) -> Move {
        let n = self.steps.len();
        let two_d = 2 * self.dim as u8;
        self.new_steps.clear();
        self.new_steps.extend_from_slice(&self.steps);
        let u: f64 = self.rng.gen();
        if u < self.mix.local {
            if n >= 2 && self.rng.gen::<bool>() {
                let j = self.rng.gen_range(0..n - 1);
                self.new_steps.swap(j, j + 1);
                Move::Kink
            } else {
                let j = self.rng.gen_range(0..n);
                self.new_steps[j] = self.rng.gen_range(0..two_d);
                Move::Replace
            }
        } else if u < self.mix.local + self.mix.regrowth {
            let k = self.rng.gen_range(1..=MAX_REGROWTH.min(n));
            let range = if self.rng.gen::<bool>() { 0..k } else { n - k..n };
            for j in range {
                self.new_steps[j] = self.rng.gen_range(0..two_d);
            }
            Move::Regrowth
        } else {
            let i = self.rng.gen_range(0..n);
            let g = Symmetry::random(self.dim, &mut self.rng);
            for s in &mut self.new_steps[i..] {
                *s = g.apply(*s);
            }
            Move::Pivot
        }
    }

    fn step(&mut self) {
        let mv = self.propose();
        let stats = match mv {
            Move::Kink => &mut self.acceptance.kink,
            Move::Replace => &mut self.acceptance.replace,
            Move::Regrowth => &mut self.acceptance.regrowth,
            Move::Pivot => &mut self.acceptance.pivot,
        };
        stats.attempted += 1;
        fill_sites(&self.new_steps, &mut self.new_sites);
        let Some(new_w) = self.energy.log_weight(&self.new_sites) else {
            return;
        };
        let delta = new_w - self.log_w;
        if delta >= 0.0 || self.rng.gen::<f64>() < delta.exp() {
            stats.accepted += 1;
            std::mem::swap(&mut self.steps, &mut self.new_steps);
            std::mem::swap(&mut self.sites, &mut self.new_sites);
            self.log_w = new_w;
            debug_assert!(crate::path::validate(self.dim, &self.sites));
        }
    }
}

struct ChainOutput {
    endpoints: Vec<i32>,
    paths: Vec<LatticePath>,
    acceptance: Acceptance,
}

fn initial_steps(config: &ChainConfig) -> Vec<u8> {
    if let Some(p) = &config.initial {
        return p.steps().into_iter().map(|k| k as u8).collect();
    }
    let h = &config.params.h;
    let axis = (0..h.len())
        .max_by(|&a, &b| h[a].abs().total_cmp(&h[b].abs()))
        .unwrap();
    let k = 2 * axis + usize::from(h[axis] < 0.0);
    vec![k as u8; config.n]
}

fn run_chain(spec: &PhiSpec, config: &ChainConfig, chain_id: usize) -> Result<ChainOutput> {
    let dim = config.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(chain_id as u64);
    let mut energy = Energy::new(spec, &config.params.h, config.n)?;
    let steps = initial_steps(config);
    let mut sites = Vec::with_capacity(config.n + 1);
    fill_sites(&steps, &mut sites);
    let log_w = energy.log_weight(&sites).ok_or_else(|| {
        Error::DegenerateModel("the starting path has infinite energy".into())
    })?;
    let mut chain = Chain {
        dim,
        mix: config.mix,
        rng,
        energy,
        new_steps: steps.clone(),
        new_sites: sites.clone(),
        steps,
        sites,
        log_w,
        acceptance: Acceptance::default(),
    };
    let per_chain = config.samples_per_chain();
    let mut endpoints = Vec::with_capacity(per_chain * dim);
    let mut paths = Vec::new();
    for sweep in 1..=config.sweeps {
        for _ in 0..config.n {
            chain.step();
        }
        if sweep > config.burn_in && (sweep - config.burn_in) % config.thinning == 0 {
            let end = chain.sites[config.n];
            endpoints.extend_from_slice(end.coords(dim));
            if config.keep_paths {
                paths.push(LatticePath::new(dim, chain.sites.clone())?);
            }
        }
    }
    Ok(ChainOutput {
        endpoints,
        paths,
        acceptance: chain.acceptance,
    })
}

/// Runs `config.chains` independent chains (in parallel, merged in chain
/// order) and collects thinned endpoints.
pub fn mcmc_sample(spec: &PhiSpec, config: &ChainConfig) -> Result<ChainStats> {
    config.validate()?;
    let outputs: Vec<Result<ChainOutput>> = (0..config.chains)
        .into_par_iter()
        .map(|id| run_chain(spec, config, id))
        .collect();
    let dim = config.dim();
    let mut stats = ChainStats {
        n: config.n,
        dim,
        h: config.params.h.clone(),
        seed: config.seed,
        chains: config.chains,
        per_chain: config.samples_per_chain(),
        thinning: config.thinning,
        sweeps: config.sweeps,
        endpoints: Vec::new(),
        acceptance: Acceptance::default(),
        tau: Vec::new(),
        flagged: false,
        paths: Vec::new(),
    };
    for out in outputs {
        let out = out?;
        stats.endpoints.extend(out.endpoints);
        stats.paths.extend(out.paths);
        stats.acceptance.merge(&out.acceptance);
    }
    stats.tau = (0..dim)
        .map(|a| {
            let xs = stats.coordinate(a);
            let per = stats.per_chain;
            // average over chains so that chain boundaries do not leak in
            let taus: Vec<f64> = xs.chunks(per.max(1)).map(sokal_tau).collect();
            taus.iter().sum::<f64>() / taus.len().max(1) as f64
        })
        .collect();
    let tau_sweeps = stats.tau.iter().cloned().fold(0.0, f64::max) * config.thinning as f64;
    stats.flagged = (config.sweeps as f64) < 50.0 * tau_sweeps;
    Ok(stats)
}

/// Metropolis acceptance probability for a symmetric proposal.
pub fn acceptance_probability(log_w: f64, log_w_new: Option<f64>) -> f64 {
    match log_w_new {
        None => 0.0,
        Some(w) => (w - log_w).exp().min(1.0),
    }
}

/// `−Φ(γ) + (h, D(γ))` as the chain evaluates it.
pub fn chain_log_weight(spec: &PhiSpec, h: &[f64], path: &LatticePath) -> Result<Option<f64>> {
    let mut e = Energy::new(spec, h, path.len())?;
    Ok(e.log_weight(path.sites()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{catalog, ModelParams};

    #[test]
    fn chain_weight_matches_potential() {
        let h = [0.3, -0.2];
        let paths = [
            vec![0, 2, 1, 3, 0, 0, 2],
            vec![0, 1, 0, 1, 2],
            vec![0, 0, 2, 1, 3, 0],
        ];
        for (_, spec) in catalog() {
            for steps in &paths {
                let p = LatticePath::from_steps(2, Site::ORIGIN, steps).unwrap();
                let exact = spec
                    .log_weight(&GCParams::drift(h.to_vec()), &p)
                    .unwrap();
                let got = chain_log_weight(&spec, &h, &p).unwrap();
                match (exact, got) {
                    (None, None) => {}
                    (Some(a), Some(b)) => assert!((a - b).abs() < 1e-12, "{}", spec.name()),
                    other => panic!("{}: {other:?}", spec.name()),
                }
            }
        }
    }

    #[test]
    fn symmetries_act_as_signed_permutations() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for dim in 1..=4 {
            for _ in 0..50 {
                let g = Symmetry::random(dim, &mut rng);
                let image: Vec<u8> = (0..2 * dim as u8).map(|k| g.apply(k)).collect();
                let mut sorted = image.clone();
                sorted.sort_unstable();
                assert_eq!(sorted, (0..2 * dim as u8).collect::<Vec<_>>());
                // opposite steps stay opposite
                for k in (0..2 * dim as u8).step_by(2) {
                    assert_eq!(image[k as usize] ^ 1, image[k as usize + 1]);
                }
                assert!(image.iter().enumerate().any(|(i, &v)| i as u8 != v));
            }
        }
    }

    #[test]
    fn reproducible_and_valid() {
        let spec = ModelParams::Saw { locality: Locality::Site }.build().unwrap();
        let mut cfg = ChainConfig::new(20, vec![0.3, 0.0], 300, 50, 7);
        cfg.keep_paths = true;
        cfg.chains = 2;
        let a = mcmc_sample(&spec, &cfg).unwrap();
        let b = mcmc_sample(&spec, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2 * 250);
        for p in &a.paths {
            assert!(spec.potential_of_path(p).unwrap().finite().is_some());
        }
        for m in [a.acceptance.kink, a.acceptance.replace, a.acceptance.regrowth, a.acceptance.pivot] {
            assert!(m.attempted > 0 && (0.0..=1.0).contains(&m.rate()));
        }
        let mut other = cfg.clone();
        other.seed = 8;
        assert_ne!(mcmc_sample(&spec, &other).unwrap().endpoints, a.endpoints);
    }

    #[test]
    fn detailed_balance_identity() {
        let spec = ModelParams::DombJoyce { beta: 0.5, locality: Locality::Site }.build().unwrap();
        let h = [0.4, 0.1];
        let a = LatticePath::from_steps(2, Site::ORIGIN, &[0, 2, 1, 3, 0]).unwrap();
        let b = LatticePath::from_steps(2, Site::ORIGIN, &[0, 2, 0, 3, 0]).unwrap();
        let wa = chain_log_weight(&spec, &h, &a).unwrap().unwrap();
        let wb = chain_log_weight(&spec, &h, &b).unwrap().unwrap();
        let flow_ab = wa.exp() * acceptance_probability(wa, Some(wb));
        let flow_ba = wb.exp() * acceptance_probability(wb, Some(wa));
        assert!((flow_ab / flow_ba - 1.0).abs() < 1e-12);
        assert_eq!(acceptance_probability(wa, None), 0.0);
    }

    #[test]
    fn rejects_bad_configs() {
        let spec = PhiSpec::free(Locality::Site);
        let mut cfg = ChainConfig::new(5, vec![0.0], 10, 10, 1);
        assert!(mcmc_sample(&spec, &cfg).is_err());
        cfg.burn_in = 2;
        cfg.mix.pivot = 0.5;
        assert!(mcmc_sample(&spec, &cfg).is_err());
    }
}
