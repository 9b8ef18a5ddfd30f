//! `K`-skeletons: repulsive trunks and attractive trunk-plus-hairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::LatticeNorm;
use crate::path::{LatticePath, Site};

/// A skeletonized backtracking excursion. `indices` are the path indices of
/// the hair vertices in construction order, without the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hair {
    /// Trunk index of the root.
    pub attach: usize,
    /// The excursion after the last trunk vertex that returns to its ball.
    pub terminal: bool,
    pub indices: Vec<usize>,
    pub sites: Vec<Vec<i32>>,
}

impl Hair {
    pub fn steps(&self) -> usize {
        self.indices.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    pub k: f64,
    pub dim: usize,
    /// `max_i ξ(±e_i)`: how far one step can overshoot the ball.
    pub overshoot: f64,
    /// Path indices `τ_l` of the trunk vertices, starting with 0.
    pub trunk_indices: Vec<usize>,
    /// Path indices `σ_l` of the first exits (attractive case only).
    pub exit_indices: Vec<usize>,
    pub trunk: Vec<Vec<i32>>,
    pub hairs: Vec<Hair>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkeletonStats {
    /// Number of full trunk steps.
    pub m: usize,
    /// Total `K`-length of the hairs.
    pub r: usize,
}

impl Skeleton {
    pub fn trunk_sites(&self) -> Vec<Site> {
        self.trunk.iter().map(|c| Site::from_slice(c)).collect()
    }

    pub fn stats(&self) -> SkeletonStats {
        SkeletonStats {
            m: self.trunk_indices.len() - 1,
            r: self.hairs.iter().map(Hair::steps).sum(),
        }
    }

    /// Path indices of every vertex (trunk and hairs), sorted.
    pub fn vertex_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.trunk_indices.clone();
        for h in &self.hairs {
            v.extend_from_slice(&h.indices);
        }
        v.sort_unstable();
        v.dedup();
        v
    }
}

pub fn skeleton_stats(skeleton: &Skeleton) -> SkeletonStats {
    skeleton.stats()
}

pub fn overshoot(norm: &dyn LatticeNorm) -> f64 {
    (0..2 * norm.dim())
        .map(|k| norm.xi(Site::unit(k)))
        .fold(0.0, f64::max)
}

#[inline]
fn inside(norm: &dyn LatticeNorm, k: f64, center: Site, y: Site) -> bool {
    norm.xi(y - center) <= k
}

fn check(path: &LatticePath, k: f64, norm: &dyn LatticeNorm) -> Result<f64> {
    if path.dim() != norm.dim() {
        return Err(Error::InvalidParameter(format!(
            "path dimension {} does not match the norm's {}",
            path.dim(),
            norm.dim()
        )));
    }
    let c = overshoot(norm);
    if !(k.is_finite() && k >= c) {
        return Err(Error::InvalidParameter(format!(
            "skeleton scale {k} is below the one-step bound {c}"
        )));
    }
    Ok(c)
}

/// Repulsive construction on a site sequence: successive first exits from
/// the ball around the current vertex. Returns positions in `sites`.
fn first_exits(sites: &[Site], k: f64, norm: &dyn LatticeNorm) -> Vec<usize> {
    let mut out = vec![0];
    let mut t = 0;
    while let Some(j) = (t + 1..sites.len()).find(|&j| !inside(norm, k, sites[t], sites[j])) {
        out.push(j);
        t = j;
    }
    out
}

fn coords(path: &LatticePath, idx: &[usize]) -> Vec<Vec<i32>> {
    idx.iter()
        .map(|&i| path.sites()[i].coords(path.dim()).to_vec())
        .collect()
}

pub fn skeleton_repulsive(path: &LatticePath, k: f64, norm: &dyn LatticeNorm) -> Result<Skeleton> {
    let overshoot = check(path, k, norm)?;
    let trunk_indices = first_exits(path.sites(), k, norm);
    Ok(Skeleton {
        k,
        dim: path.dim(),
        overshoot,
        trunk: coords(path, &trunk_indices),
        trunk_indices,
        exit_indices: Vec::new(),
        hairs: Vec::new(),
    })
}

pub fn skeleton_attractive(path: &LatticePath, k: f64, norm: &dyn LatticeNorm) -> Result<Skeleton> {
    let overshoot = check(path, k, norm)?;
    let sites = path.sites();
    let n = path.len();
    let mut trunk_indices = vec![0];
    let mut exit_indices = Vec::new();
    let mut hairs = Vec::new();
    let mut t = 0;
    loop {
        let u = sites[t];
        let Some(sigma) = (t + 1..=n).find(|&j| !inside(norm, k, u, sites[j])) else {
            exit_indices.push(n);
            break;
        };
        exit_indices.push(sigma);
        let last_in = (t + 1..=n)
            .rev()
            .find(|&j| inside(norm, k, u, sites[j]))
            .unwrap_or(t);
        let l = trunk_indices.len() - 1;
        if last_in == n {
            // the path leaves and comes back to end inside the current ball
            let idx: Vec<usize> = first_exits(&sites[t..], k, norm)
                .into_iter()
                .skip(1)
                .map(|j| t + j)
                .collect();
            hairs.push(Hair {
                attach: l,
                terminal: true,
                sites: coords(path, &idx),
                indices: idx,
            });
            break;
        }
        let tau = last_in + 1;
        let eta: Vec<Site> = sites[sigma..=tau].iter().rev().copied().collect();
        let idx: Vec<usize> = first_exits(&eta, k, norm)
            .into_iter()
            .skip(1)
            .map(|j| tau - j)
            .collect();
        if !idx.is_empty() {
            hairs.push(Hair {
                attach: l + 1,
                terminal: false,
                sites: coords(path, &idx),
                indices: idx,
            });
        }
        trunk_indices.push(tau);
        t = tau;
    }
    Ok(Skeleton {
        k,
        dim: path.dim(),
        overshoot,
        trunk: coords(path, &trunk_indices),
        trunk_indices,
        exit_indices,
        hairs,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SkeletonReport {
    /// Vertices whose recorded site differs from the path at its index.
    pub p1: Vec<usize>,
    /// Consecutive vertex indices `(a, b)` with a path site in between
    /// outside both balls.
    pub p2: Vec<(usize, usize)>,
    /// Trunk steps `l` with `ξ(u_{l+1} − u_l) ∉ (K, K + c]`.
    pub increments: Vec<usize>,
    /// The portion after the last vertex leaves that vertex's ball.
    pub tail: bool,
}

impl SkeletonReport {
    pub fn is_clean(&self) -> bool {
        self.p1.is_empty() && self.p2.is_empty() && self.increments.is_empty() && !self.tail
    }
}

/// Checks (P1), (P2) between consecutive vertices in path order, the trunk
/// increment bounds and the final portion.
#[allow(non_snake_case)]
pub fn verify_P1_P2(path: &LatticePath, skeleton: &Skeleton, norm: &dyn LatticeNorm) -> SkeletonReport {
    let sites = path.sites();
    let dim = path.dim();
    let k = skeleton.k;
    let mut report = SkeletonReport::default();
    let recorded = skeleton
        .trunk_indices
        .iter()
        .zip(&skeleton.trunk)
        .chain(skeleton.hairs.iter().flat_map(|h| h.indices.iter().zip(&h.sites)));
    for (&i, c) in recorded {
        if i > path.len() || sites[i].coords(dim) != c.as_slice() {
            report.p1.push(i);
        }
    }
    let vs: Vec<usize> = skeleton
        .vertex_indices()
        .into_iter()
        .filter(|&i| i <= path.len())
        .collect();
    for w in vs.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a..=b).any(|j| !inside(norm, k, sites[a], sites[j]) && !inside(norm, k, sites[b], sites[j])) {
            report.p2.push((a, b));
        }
    }
    if let Some(&last) = vs.last() {
        report.tail = (last..=path.len()).any(|j| !inside(norm, k, sites[last], sites[j]));
    }
    let trunk = skeleton.trunk_sites();
    for (l, w) in trunk.windows(2).enumerate() {
        let d = norm.xi(w[1] - w[0]);
        if !(d > k && d <= k + skeleton.overshoot + 1e-12) {
            report.increments.push(l);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{free_walk_table, WulffShape, DEFAULT_TOLERANCE};

    fn norm() -> WulffShape {
        WulffShape::from_table(free_walk_table(2, 1.8, 4).unwrap(), DEFAULT_TOLERANCE).unwrap()
    }

    fn all_paths(n: usize) -> Vec<LatticePath> {
        let mut out = Vec::new();
        let mut steps = vec![0usize; n];
        loop {
            out.push(LatticePath::from_steps(2, Site::ORIGIN, &steps).unwrap());
            let mut i = 0;
            while i < n {
                steps[i] += 1;
                if steps[i] < 4 {
                    break;
                }
                steps[i] = 0;
                i += 1;
            }
            if i == n {
                return out;
            }
        }
    }

    #[test]
    fn short_path_has_trivial_skeleton() {
        let s = norm();
        let p = LatticePath::from_steps(2, Site::ORIGIN, &[0, 2, 1]).unwrap();
        for sk in [skeleton_repulsive(&p, 3.0, &s).unwrap(), skeleton_attractive(&p, 3.0, &s).unwrap()] {
            assert_eq!(sk.trunk_indices, vec![0]);
            assert_eq!(sk.stats(), SkeletonStats { m: 0, r: 0 });
        }
    }

    #[test]
    fn straight_path_trunk_count() {
        let s = norm();
        let xi1 = s.xi(Site::unit(0));
        for (len, k) in [(40, 3.0), (60, 5.0), (25, 4.0)] {
            let p = LatticePath::straight(2, 0, len).unwrap();
            // first exit from a ball of radius K along the axis happens after
            // floor(K / ξ(e₁)) + 1 steps
            let per = (k / xi1).floor() as usize + 1;
            let rep = skeleton_repulsive(&p, k, &s).unwrap();
            assert_eq!(rep.stats().m, len / per);
            let att = skeleton_attractive(&p, k, &s).unwrap();
            assert_eq!(att.trunk_indices, rep.trunk_indices);
            assert!(att.hairs.is_empty());
            assert!(verify_P1_P2(&p, &att, &s).is_clean());
        }
    }

    #[test]
    fn returning_loop_grows_a_hair() {
        let s = norm();
        let k = 3.0;
        // out 12 along e₁, a long detour up and back, then onward
        let mut steps = vec![0; 12];
        steps.extend(vec![2; 8]);
        steps.extend(vec![3; 8]);
        steps.extend(vec![0; 12]);
        let p = LatticePath::from_steps(2, Site::ORIGIN, &steps).unwrap();
        let att = skeleton_attractive(&p, k, &s).unwrap();
        assert!(verify_P1_P2(&p, &att, &s).is_clean());
        assert!(att.hairs.iter().any(|h| h.steps() > 0));
        let rep = skeleton_repulsive(&p, k, &s).unwrap();
        assert!(verify_P1_P2(&p, &rep, &s).is_clean());
        // a short wiggle that never leaves the ball produces no hair
        let mut steps = vec![0; 12];
        steps.extend([2, 3]);
        steps.extend(vec![0; 12]);
        let p = LatticePath::from_steps(2, Site::ORIGIN, &steps).unwrap();
        assert!(skeleton_attractive(&p, k, &s).unwrap().hairs.is_empty());
    }

    #[test]
    fn terminal_excursion() {
        let s = norm();
        let mut steps = vec![0; 10];
        steps.extend(vec![1; 10]);
        let p = LatticePath::from_steps(2, Site::ORIGIN, &steps).unwrap();
        let att = skeleton_attractive(&p, 3.0, &s).unwrap();
        assert_eq!(att.trunk_indices, vec![0]);
        assert!(att.hairs[0].terminal);
        assert!(verify_P1_P2(&p, &att, &s).is_clean());
    }

    #[test]
    fn exhaustive_p1_p2_small() {
        let s = norm();
        for n in 0..=7 {
            for p in all_paths(n) {
                for k in [3.0, 5.0] {
                    let a = skeleton_attractive(&p, k, &s).unwrap();
                    assert!(verify_P1_P2(&p, &a, &s).is_clean(), "{p:?}");
                    let r = skeleton_repulsive(&p, k, &s).unwrap();
                    assert!(verify_P1_P2(&p, &r, &s).is_clean(), "{p:?}");
                }
            }
        }
    }

    #[test]
    fn rejects_tiny_scale() {
        let s = norm();
        let p = LatticePath::straight(2, 0, 3).unwrap();
        assert!(skeleton_repulsive(&p, 0.01, &s).is_err());
    }

    #[test]
    fn detects_violations() {
        let s = norm();
        let p = LatticePath::straight(2, 0, 30).unwrap();
        let mut sk = skeleton_repulsive(&p, 3.0, &s).unwrap();
        sk.trunk[1][1] += 1;
        assert!(!verify_P1_P2(&p, &sk, &s).p1.is_empty());
        let mut sk = skeleton_repulsive(&p, 3.0, &s).unwrap();
        sk.trunk_indices.truncate(1);
        sk.trunk.truncate(1);
        assert!(verify_P1_P2(&p, &sk, &s).tail);
    }
}
