//! Cone points at the trunk, skeleton and path levels, and the splitting
//! of a path at its cone points.

use serde::{Deserialize, Serialize};

use super::skeleton::Skeleton;
use crate::error::Result;
use crate::geometry::{ConeSpec, LatticeNorm};
use crate::path::{LatticePath, Locality, Site};
use crate::potential::{GCParams, PhiSpec};

/// Indices `k` such that every later point lies in `p_k + Y^>` and every
/// earlier one in `p_k + Y^<`.
fn cone_indices(points: &[Site], norm: &dyn LatticeNorm, cone: &ConeSpec) -> Vec<usize> {
    (0..points.len())
        .filter(|&k| {
            let p = points[k];
            points[k + 1..].iter().all(|&q| cone.forward(norm, q - p))
                && points[..k].iter().all(|&q| cone.backward(norm, q - p))
        })
        .collect()
}

/// Cone points of a trunk at aperture `δ`.
pub fn cone_points_trunk(trunk: &[Site], norm: &dyn LatticeNorm, cone: &ConeSpec) -> Vec<usize> {
    cone_indices(trunk, norm, &cone.with_multiplier(1))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SkeletonConePoints {
    /// Trunk indices whose aperture-`2δ` double cone holds the whole
    /// skeleton.
    pub cone: Vec<usize>,
    /// Trunk cone points at `δ` that lose the property because of hairs.
    pub blocked: Vec<usize>,
}

/// Skeleton cone points at aperture `2δ`. Past and future are decided by
/// path index, so a hair vertex counts as later than a trunk vertex it
/// follows along the path.
pub fn cone_points_skeleton(skeleton: &Skeleton, norm: &dyn LatticeNorm, cone: &ConeSpec) -> SkeletonConePoints {
    let trunk = skeleton.trunk_sites();
    let wide = cone.with_multiplier(2);
    let trunk_wide = cone_indices(&trunk, norm, &wide);
    let hair_points: Vec<(usize, Site)> = skeleton
        .hairs
        .iter()
        .flat_map(|h| h.indices.iter().zip(&h.sites))
        .map(|(&i, c)| (i, Site::from_slice(c)))
        .collect();
    let hairs_fit = |k: usize| {
        let (tk, u) = (skeleton.trunk_indices[k], trunk[k]);
        hair_points.iter().all(|&(i, q)| {
            if i > tk {
                wide.forward(norm, q - u)
            } else {
                wide.backward(norm, q - u)
            }
        })
    };
    let cone_set: Vec<usize> = trunk_wide.into_iter().filter(|&k| hairs_fit(k)).collect();
    let blocked = cone_points_trunk(&trunk, norm, cone)
        .into_iter()
        .filter(|k| cone_set.binary_search(k).is_err())
        .collect();
    SkeletonConePoints {
        cone: cone_set,
        blocked,
    }
}

/// Cone points of a path at aperture `3δ`.
pub fn cone_points_path(path: &LatticePath, norm: &dyn LatticeNorm, cone: &ConeSpec) -> Vec<usize> {
    cone_indices(path.sites(), norm, &cone.with_multiplier(3))
}

/// Which endpoints must be the only cone points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Irreducibility {
    /// Only the last point (`Ω_L`).
    Backward,
    /// Only the first point (`Ω_R`).
    Forward,
    /// Only the two endpoints (`Ω`).
    Both,
}

pub fn is_irreducible(path: &LatticePath, norm: &dyn LatticeNorm, cone: &ConeSpec, kind: Irreducibility) -> bool {
    let n = path.len();
    let cps = cone_points_path(path, norm, cone);
    let expected: Vec<usize> = match kind {
        Irreducibility::Backward => vec![n],
        Irreducibility::Forward => vec![0],
        Irreducibility::Both if n == 0 => vec![0],
        Irreducibility::Both => vec![0, n],
    };
    cps == expected
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrreducibleDecomposition {
    pub omega_l: LatticePath,
    pub pieces: Vec<LatticePath>,
    pub omega_r: LatticePath,
    /// Path indices of the cone points used as cuts.
    pub breakpoints: Vec<usize>,
    /// No cone point away from the endpoints: the whole path is one block.
    pub flagged: bool,
}

impl IrreducibleDecomposition {
    pub fn reassemble(&self) -> Result<LatticePath> {
        let mut all = Vec::with_capacity(self.pieces.len() + 2);
        all.push(self.omega_l.clone());
        all.extend(self.pieces.iter().cloned());
        all.push(self.omega_r.clone());
        LatticePath::concatenate(&all)
    }
}

pub fn irreducible_decompose(path: &LatticePath, norm: &dyn LatticeNorm, cone: &ConeSpec) -> IrreducibleDecomposition {
    let n = path.len();
    let cps = cone_points_path(path, norm, cone);
    if cps.iter().all(|&k| k == 0 || k == n) || n == 0 {
        return IrreducibleDecomposition {
            omega_l: path.slice(0, 0),
            pieces: vec![path.clone()],
            omega_r: path.slice(n, n),
            breakpoints: cps,
            flagged: true,
        };
    }
    let (first, last) = (cps[0], *cps.last().unwrap());
    let pieces = cps.windows(2).map(|w| path.slice(w[0], w[1])).collect();
    IrreducibleDecomposition {
        omega_l: path.slice(0, first),
        pieces,
        omega_r: path.slice(last, n),
        breakpoints: cps,
        flagged: false,
    }
}

/// `log W̄(ω)`: the weight with the junction correction `e^{φ(1)}` for
/// site-local potentials on pieces that are followed by another piece.
pub fn log_piece_weight(spec: &PhiSpec, params: &GCParams, piece: &LatticePath, followed: bool) -> Result<Option<f64>> {
    let w = spec.log_weight(params, piece)?;
    Ok(w.map(|w| match spec.locality() {
        Locality::Site if followed => w + spec.phi1(),
        _ => w,
    }))
}

/// `log W(γ) − Σ log W̄(pieces)`; `None` when `Φ(γ) = ∞`.
pub fn piece_weight_identity(
    spec: &PhiSpec,
    decomposition: &IrreducibleDecomposition,
    params: &GCParams,
) -> Result<Option<f64>> {
    let whole = decomposition.reassemble()?;
    let Some(total) = spec.log_weight(params, &whole)? else {
        return Ok(None);
    };
    let mut sum = 0.0;
    let parts = std::iter::once((&decomposition.omega_l, true))
        .chain(decomposition.pieces.iter().map(|p| (p, true)))
        .chain(std::iter::once((&decomposition.omega_r, false)));
    for (p, followed) in parts {
        match log_piece_weight(spec, params, p, followed)? {
            Some(w) => sum += w,
            // a finite path cannot contain a piece of infinite energy
            None => return Ok(None),
        }
    }
    Ok(Some(total - sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarse::skeleton::{skeleton_attractive, skeleton_repulsive};
    use crate::geometry::{free_walk_table, WulffShape, DEFAULT_TOLERANCE};
    use crate::potential::ModelParams;

    fn setup(x: &[f64]) -> (WulffShape, ConeSpec) {
        let s = WulffShape::from_table(free_walk_table(2, 1.8, 4).unwrap(), DEFAULT_TOLERANCE).unwrap();
        let h = s.dual_drift(x).unwrap().h;
        let c = ConeSpec::new(&s, h, 0.1, 1).unwrap();
        (s, c)
    }

    #[test]
    fn straight_path_all_cone_points() {
        let (s, c) = setup(&[1.0, 0.0]);
        let p = LatticePath::straight(2, 0, 6).unwrap();
        assert_eq!(cone_points_path(&p, &s, &c), (0..=6).collect::<Vec<_>>());
        let d = irreducible_decompose(&LatticePath::straight(2, 0, 3).unwrap(), &s, &c);
        assert_eq!(d.pieces.len(), 3);
        assert!(d.pieces.iter().all(|p| p.len() == 1));
        assert!(!d.flagged);
        assert_eq!(d.omega_l.len(), 0);
    }

    #[test]
    fn elementary_loop_blocks_interior_cone_points() {
        let (s, c) = setup(&[1.0, 0.0]);
        let mut steps = vec![0, 0, 0];
        steps.extend([0, 2, 1]);
        steps.extend([0, 0, 0]);
        let p = LatticePath::from_steps(2, Site::ORIGIN, &steps).unwrap();
        let cps = cone_points_path(&p, &s, &c);
        for k in 4..=5 {
            assert!(!cps.contains(&k));
        }
        let d = irreducible_decompose(&p, &s, &c);
        assert_eq!(d.reassemble().unwrap(), p);
    }

    #[test]
    fn trunk_cone_points() {
        let (s, c) = setup(&[1.0, 0.0]);
        let trunk: Vec<Site> = (0..6).map(|i| Site::from_slice(&[3 * i, 0])).collect();
        assert_eq!(cone_points_trunk(&trunk, &s, &c), (0..6).collect::<Vec<_>>());
        let mut bent = trunk.clone();
        bent[3] = Site::from_slice(&[9, 8]);
        let cps = cone_points_trunk(&bent, &s, &c);
        assert!(!cps.contains(&3));
        // monotone in aperture
        let wide = cone_indices(&bent, &s, &c.with_multiplier(2));
        assert!(cps.iter().all(|k| wide.contains(k)));
    }

    #[test]
    fn skeleton_cone_points_and_blocking() {
        let (s, c) = setup(&[1.0, 0.0]);
        let p = LatticePath::straight(2, 0, 40).unwrap();
        let sk = skeleton_repulsive(&p, 3.0, &s).unwrap();
        let r = cone_points_skeleton(&sk, &s, &c);
        assert!(r.blocked.is_empty());
        let trunk = cone_points_trunk(&sk.trunk_sites(), &s, &c);
        assert!(trunk.iter().all(|k| r.cone.contains(k)));

        let mut steps = vec![0; 12];
        steps.extend(vec![2; 14]);
        steps.extend(vec![3; 14]);
        steps.extend(vec![0; 12]);
        let p = LatticePath::from_steps(2, Site::ORIGIN, &steps).unwrap();
        let sk = skeleton_attractive(&p, 3.0, &s).unwrap();
        assert!(!sk.hairs.is_empty());
        let r = cone_points_skeleton(&sk, &s, &c);
        assert!(!r.blocked.is_empty());
    }

    #[test]
    fn degenerate_split_is_flagged() {
        let (s, c) = setup(&[1.0, 0.0]);
        let p = LatticePath::from_steps(2, Site::ORIGIN, &[2, 0, 3]).unwrap();
        let d = irreducible_decompose(&p, &s, &c);
        assert!(d.flagged);
        assert_eq!(d.pieces, vec![p.clone()]);
        assert_eq!(d.reassemble().unwrap(), p);
    }

    #[test]
    fn weight_identity_on_site_and_bond_models() {
        let (s, c) = setup(&[2.0, 1.0]);
        let params = GCParams::new(c.h.clone(), 1.8);
        let specs = [
            ModelParams::Saw { locality: Locality::UnorientedBond }.build().unwrap(),
            ModelParams::Saw { locality: Locality::Site }.build().unwrap(),
            ModelParams::DombJoyce { beta: 0.5, locality: Locality::Site }.build().unwrap(),
            ModelParams::DombJoyce { beta: 0.5, locality: Locality::UnorientedBond }.build().unwrap(),
        ];
        let paths = [
            vec![0, 2, 0, 2, 0, 0, 2],
            vec![0, 0, 2, 1, 3, 0, 0, 2, 2, 0],
            vec![0, 2, 0, 3, 0, 2, 0],
        ];
        for steps in paths {
            let p = LatticePath::from_steps(2, Site::ORIGIN, &steps).unwrap();
            let d = irreducible_decompose(&p, &s, &c);
            for spec in &specs {
                if let Some(r) = piece_weight_identity(spec, &d, &params).unwrap() {
                    assert!(r.abs() < 1e-10, "{} {steps:?}: {r}", spec.name());
                }
            }
        }
    }

    #[test]
    fn irreducibility_kinds() {
        let (s, c) = setup(&[1.0, 0.0]);
        let p = LatticePath::straight(2, 0, 1).unwrap();
        assert!(is_irreducible(&p, &s, &c, Irreducibility::Both));
        let p = LatticePath::straight(2, 0, 2).unwrap();
        assert!(!is_irreducible(&p, &s, &c, Irreducibility::Both));
    }
}
