//! Nearest-neighbour paths on `Z^d`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 4;

/// Coordinates are kept well inside `i32` so that differences of two sites
/// never overflow.
const COORD_LIMIT: i64 = (i32::MAX / 2) as i64;

/// A lattice site. Coordinates beyond the working dimension are zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site(pub [i32; MAX_DIM]);

impl Site {
    pub const ORIGIN: Site = Site([0; MAX_DIM]);

    pub fn from_slice(coords: &[i32]) -> Site {
        assert!(coords.len() <= MAX_DIM, "too many coordinates");
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Site(c)
    }

    /// Unit step number `k` in `0..2d`: axis `k / 2`, positive for even `k`.
    #[inline]
    pub fn unit(k: usize) -> Site {
        let mut c = [0; MAX_DIM];
        c[k / 2] = if k % 2 == 0 { 1 } else { -1 };
        Site(c)
    }

    pub fn axis(axis: usize, value: i32) -> Site {
        let mut c = [0; MAX_DIM];
        c[axis] = value;
        Site(c)
    }

    #[inline]
    pub fn coords(&self, dim: usize) -> &[i32] {
        &self.0[..dim]
    }

    pub fn l1(&self) -> i64 {
        self.0.iter().map(|&c| (c as i64).abs()).sum()
    }

    pub fn dot(&self, h: &[f64]) -> f64 {
        h.iter().zip(self.0.iter()).map(|(a, &b)| a * b as f64).sum()
    }

    pub fn to_f64(&self, dim: usize) -> Vec<f64> {
        self.0[..dim].iter().map(|&c| c as f64).collect()
    }

    /// Index `k` of the unit step `self`, if it is one.
    pub fn step_index(&self) -> Option<usize> {
        if self.l1() != 1 {
            return None;
        }
        let axis = self.0.iter().position(|&c| c != 0)?;
        Some(2 * axis + usize::from(self.0[axis] < 0))
    }
}

impl Add for Site {
    type Output = Site;
    #[inline]
    fn add(self, o: Site) -> Site {
        let mut c = self.0;
        for (a, b) in c.iter_mut().zip(o.0) {
            *a += b;
        }
        Site(c)
    }
}

impl Sub for Site {
    type Output = Site;
    #[inline]
    fn sub(self, o: Site) -> Site {
        let mut c = self.0;
        for (a, b) in c.iter_mut().zip(o.0) {
            *a -= b;
        }
        Site(c)
    }
}

impl Neg for Site {
    type Output = Site;
    fn neg(self) -> Site {
        Site(self.0.map(|c| -c))
    }
}

/// Which local times a potential is built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Locality {
    Site,
    OrientedBond,
    UnorientedBond,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LocalKey {
    Site(Site),
    /// Oriented bonds are `(from, to)`; unoriented ones use the
    /// lexicographically smaller endpoint first.
    Bond(Site, Site),
}

impl LocalKey {
    pub fn bond(kind: Locality, from: Site, to: Site) -> LocalKey {
        match kind {
            Locality::UnorientedBond if to < from => LocalKey::Bond(to, from),
            _ => LocalKey::Bond(from, to),
        }
    }
}

/// Visit counts per site or per bond. Keys with zero count are absent.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalTimeMap {
    pub kind: Locality,
    pub counts: BTreeMap<LocalKey, u32>,
}

impl LocalTimeMap {
    pub fn total(&self) -> u64 {
        self.counts.values().map(|&c| c as u64).sum()
    }

    pub fn get(&self, key: &LocalKey) -> u32 {
        self.counts.get(key).copied().unwrap_or(0)
    }
}

/// `true` iff consecutive sites differ by exactly one unit step.
pub fn validate(dim: usize, sites: &[Site]) -> bool {
    if dim == 0 || dim > MAX_DIM || sites.is_empty() {
        return false;
    }
    sites.iter().all(|s| s.0[dim..].iter().all(|&c| c == 0))
        && sites.windows(2).all(|w| (w[1] - w[0]).l1() == 1)
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct LatticePath {
    dim: usize,
    sites: Vec<Site>,
}

impl fmt::Debug for LatticePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pts: Vec<&[i32]> = self.sites.iter().map(|s| s.coords(self.dim)).collect();
        write!(f, "LatticePath(d={}, {:?})", self.dim, pts)
    }
}

impl LatticePath {
    pub fn new(dim: usize, sites: Vec<Site>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Dimension(dim));
        }
        if sites.is_empty() {
            return Err(Error::InvalidPath("a path has at least one site".into()));
        }
        if sites
            .iter()
            .any(|s| s.0.iter().any(|&c| (c as i64).abs() > COORD_LIMIT))
        {
            return Err(Error::InvalidPath("coordinate out of range".into()));
        }
        if !validate(dim, &sites) {
            return Err(Error::InvalidPath(
                "consecutive sites must differ by one unit step".into(),
            ));
        }
        Ok(LatticePath { dim, sites })
    }

    /// Unchecked constructor for internal callers that build paths step by step.
    pub(crate) fn from_sites_unchecked(dim: usize, sites: Vec<Site>) -> Self {
        debug_assert!(validate(dim, &sites), "invalid path {sites:?}");
        LatticePath { dim, sites }
    }

    pub fn from_coords(dim: usize, coords: &[Vec<i32>]) -> Result<Self> {
        if coords.iter().any(|c| c.len() != dim) {
            return Err(Error::InvalidPath(format!(
                "every site needs exactly {dim} coordinates"
            )));
        }
        Self::new(dim, coords.iter().map(|c| Site::from_slice(c)).collect())
    }

    pub fn point(dim: usize, at: Site) -> Self {
        LatticePath {
            dim,
            sites: vec![at],
        }
    }

    /// Path from `start` following unit-step indices (see [`Site::unit`]).
    pub fn from_steps(dim: usize, start: Site, steps: &[usize]) -> Result<Self> {
        if let Some(&k) = steps.iter().find(|&&k| k >= 2 * dim) {
            return Err(Error::InvalidPath(format!("step index {k} out of range")));
        }
        let mut sites = Vec::with_capacity(steps.len() + 1);
        sites.push(start);
        let mut cur = start;
        for &k in steps {
            cur = cur + Site::unit(k);
            sites.push(cur);
        }
        Self::new(dim, sites)
    }

    pub fn straight(dim: usize, step: usize, len: usize) -> Result<Self> {
        Self::from_steps(dim, Site::ORIGIN, &vec![step; len])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of steps.
    pub fn len(&self) -> usize {
        self.sites.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.sites.len() == 1
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn start(&self) -> Site {
        self.sites[0]
    }

    pub fn end(&self) -> Site {
        *self.sites.last().unwrap()
    }

    pub fn displacement(&self) -> Site {
        self.end() - self.start()
    }

    pub fn steps(&self) -> Vec<usize> {
        self.sites
            .windows(2)
            .map(|w| (w[1] - w[0]).step_index().expect("validated path"))
            .collect()
    }

    pub fn reverse(&self) -> LatticePath {
        let mut sites = self.sites.clone();
        sites.reverse();
        LatticePath {
            dim: self.dim,
            sites,
        }
    }

    pub fn translate(&self, by: Site) -> LatticePath {
        LatticePath {
            dim: self.dim,
            sites: self.sites.iter().map(|&s| s + by).collect(),
        }
    }

    /// Sub-path over the index range `from..=to`.
    pub fn slice(&self, from: usize, to: usize) -> LatticePath {
        assert!(from <= to && to < self.sites.len(), "bad slice {from}..={to}");
        LatticePath {
            dim: self.dim,
            sites: self.sites[from..=to].to_vec(),
        }
    }

    /// Split at the given interior indices; the pieces share their junction
    /// sites.
    pub fn split_at(&self, cuts: &[usize]) -> Vec<LatticePath> {
        let mut pieces = Vec::with_capacity(cuts.len() + 1);
        let mut from = 0;
        for &c in cuts {
            pieces.push(self.slice(from, c));
            from = c;
        }
        pieces.push(self.slice(from, self.len()));
        pieces
    }

    pub fn concatenate(pieces: &[LatticePath]) -> Result<LatticePath> {
        let first = pieces
            .first()
            .ok_or_else(|| Error::InvalidPath("nothing to concatenate".into()))?;
        let dim = first.dim;
        let mut sites = first.sites.clone();
        for (i, p) in pieces.iter().enumerate().skip(1) {
            if p.dim != dim {
                return Err(Error::InvalidPath("mixed dimensions".into()));
            }
            if p.start() != *sites.last().unwrap() {
                return Err(Error::Junction { index: i - 1, next: i });
            }
            sites.extend_from_slice(&p.sites[1..]);
        }
        Ok(LatticePath { dim, sites })
    }

    pub fn local_times(&self, kind: Locality) -> LocalTimeMap {
        let mut counts = BTreeMap::new();
        match kind {
            Locality::Site => {
                for &s in &self.sites {
                    *counts.entry(LocalKey::Site(s)).or_insert(0) += 1;
                }
            }
            Locality::OrientedBond | Locality::UnorientedBond => {
                for w in self.sites.windows(2) {
                    *counts.entry(LocalKey::bond(kind, w[0], w[1])).or_insert(0) += 1;
                }
            }
        }
        LocalTimeMap { kind, counts }
    }

    /// Number of starting indices at which `pattern` occurs up to a lattice
    /// shift. Overlapping occurrences are counted separately.
    pub fn count_pattern(&self, pattern: &Pattern) -> usize {
        let p = pattern.len();
        if p > self.len() {
            return 0;
        }
        (0..=self.len() - p)
            .filter(|&l| {
                let base = self.sites[l];
                pattern
                    .sites
                    .iter()
                    .enumerate()
                    .all(|(j, &u)| self.sites[l + j] - base == u)
            })
            .count()
    }

    pub fn coords(&self) -> Vec<Vec<i32>> {
        self.sites.iter().map(|s| s.coords(self.dim).to_vec()).collect()
    }
}

impl Serialize for LatticePath {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LatticePath {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let coords: Vec<Vec<i32>> = Vec::deserialize(d)?;
        let dim = coords
            .first()
            .map(Vec::len)
            .ok_or_else(|| D::Error::custom("empty path"))?;
        LatticePath::from_coords(dim, &coords).map_err(D::Error::custom)
    }
}

/// A fixed nearest-neighbour path, stored shifted so that it starts at the
/// origin.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LatticePath", into = "LatticePath")]
pub struct Pattern {
    dim: usize,
    sites: Vec<Site>,
}

impl Pattern {
    pub fn new(path: &LatticePath) -> Result<Self> {
        if path.is_empty() {
            return Err(Error::InvalidPath("a pattern needs at least one step".into()));
        }
        let base = path.start();
        Ok(Pattern {
            dim: path.dim,
            sites: path.sites.iter().map(|&s| s - base).collect(),
        })
    }

    /// `(0, e1, e1 + e2, e2)`.
    pub fn elementary_loop(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Dimension(dim));
        }
        Self::new(&LatticePath::from_steps(dim, Site::ORIGIN, &[0, 2, 1])?)
    }

    pub fn single_step(dim: usize, k: usize) -> Result<Self> {
        Self::new(&LatticePath::from_steps(dim, Site::ORIGIN, &[k])?)
    }

    pub fn len(&self) -> usize {
        self.sites.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }
}

impl TryFrom<LatticePath> for Pattern {
    type Error = Error;
    fn try_from(p: LatticePath) -> Result<Self> {
        Pattern::new(&p)
    }
}

impl From<Pattern> for LatticePath {
    fn from(p: Pattern) -> LatticePath {
        LatticePath {
            dim: p.dim,
            sites: p.sites,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1(xs: &[i32]) -> LatticePath {
        LatticePath::from_coords(1, &xs.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    fn p2(xs: &[(i32, i32)]) -> LatticePath {
        LatticePath::from_coords(2, &xs.iter().map(|&(a, b)| vec![a, b]).collect::<Vec<_>>())
            .unwrap()
    }

    #[test]
    fn validate_examples() {
        let s = |a, b| Site::from_slice(&[a, b]);
        assert!(validate(2, &[s(0, 0), s(1, 0)]));
        assert!(!validate(2, &[s(0, 0), s(1, 1)]));
        assert!(validate(2, &[s(0, 0)]));
        assert!(!validate(2, &[]));
        assert!(!validate(1, &[s(0, 0), s(0, 1)]));
    }

    #[test]
    fn displacement_examples() {
        assert_eq!(p2(&[(0, 0), (1, 0)]).displacement(), Site::from_slice(&[1, 0]));
        let lp = p2(&[(0, 0), (1, 0), (1, 1), (0, 1), (0, 0)]);
        assert_eq!(lp.displacement(), Site::ORIGIN);
        let straight = LatticePath::straight(2, 0, 5).unwrap();
        assert_eq!(straight.displacement(), Site::from_slice(&[5, 0]));
    }

    #[test]
    fn local_time_examples() {
        let straight = LatticePath::straight(2, 0, 3).unwrap();
        let lt = straight.local_times(Locality::Site);
        assert_eq!(lt.counts.len(), 4);
        assert!(lt.counts.values().all(|&c| c == 1));

        let back = p1(&[0, 1, 0]);
        let un = back.local_times(Locality::UnorientedBond);
        assert_eq!(un.counts.len(), 1);
        assert_eq!(un.total(), 2);
        let or = back.local_times(Locality::OrientedBond);
        assert_eq!(or.counts.len(), 2);
        assert!(or.counts.values().all(|&c| c == 1));
        let site = back.local_times(Locality::Site);
        assert_eq!(site.get(&LocalKey::Site(Site::ORIGIN)), 2);
    }

    #[test]
    fn concatenate_examples() {
        let a = p1(&[0, 1]);
        let b = p1(&[1, 2]);
        assert_eq!(LatticePath::concatenate(&[a.clone(), b]).unwrap(), p1(&[0, 1, 2]));
        let empty = LatticePath::point(1, a.end());
        assert_eq!(LatticePath::concatenate(&[a.clone(), empty]).unwrap(), a);
        let bad = p1(&[5, 6]);
        assert_eq!(
            LatticePath::concatenate(&[a, bad]),
            Err(Error::Junction { index: 0, next: 1 })
        );
    }

    #[test]
    fn reverse_examples() {
        assert_eq!(p1(&[0, 1, 2]).reverse(), p1(&[2, 1, 0]));
        let single = LatticePath::point(2, Site::from_slice(&[3, 4]));
        assert_eq!(single.reverse(), single);
    }

    #[test]
    fn pattern_examples() {
        let eta = Pattern::elementary_loop(2).unwrap();
        let as_path: LatticePath = eta.clone().into();
        assert_eq!(as_path.count_pattern(&eta), 1);
        assert_eq!(LatticePath::straight(2, 0, 5).unwrap().count_pattern(&eta), 0);

        // two copies of the loop joined by a three-step bridge along e1
        let mut steps = vec![0, 2, 1];
        steps.extend([0, 0, 0]);
        steps.extend([0, 2, 1]);
        let twice = LatticePath::from_steps(2, Site::ORIGIN, &steps).unwrap();
        let brute = (0..=twice.len() - 3)
            .filter(|&l| {
                let w = &twice.sites()[l..=l + 3];
                w.iter().zip(eta.sites()).all(|(&s, &u)| s - w[0] == u)
            })
            .count();
        assert_eq!(brute, 2);
        assert_eq!(twice.count_pattern(&eta), brute);
    }

    #[test]
    fn serde_round_trip_as_nested_arrays() {
        let p = p2(&[(0, 0), (0, 1), (-1, 1)]);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, "[[0,0],[0,1],[-1,1]]");
        let back: LatticePath = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<LatticePath>("[[0,0],[1,1]]").is_err());
    }

    #[test]
    fn decompose_then_concatenate_all_short_paths() {
        // every d = 2 path with n <= 8 steps, split at every interior index
        fn rec(steps: &mut Vec<usize>, n: usize) {
            let path = LatticePath::from_steps(2, Site::ORIGIN, steps).unwrap();
            let cuts: Vec<usize> = (1..path.len()).collect();
            let pieces = path.split_at(&cuts);
            assert_eq!(pieces.iter().map(LatticePath::len).sum::<usize>(), path.len());
            assert_eq!(LatticePath::concatenate(&pieces).unwrap(), path);
            if steps.len() < n {
                for k in 0..4 {
                    steps.push(k);
                    rec(steps, n);
                    steps.pop();
                }
            }
        }
        rec(&mut Vec::new(), 8);
    }
}
