//! Lyapunov exponents `ξ_λ`, their Wulff shapes, dual drifts and cones.

mod cone;
mod shape;

pub use cone::{cone_contains, ConeSpec};
pub use shape::{
    free_walk_table, free_walk_xi, k_lambda0, DualDrift, LambdaSlice, Membership, ShapeLimit,
    ShapeLimitReport, WulffShape, DEFAULT_TOLERANCE,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::enumerate::PathCensus;
use crate::error::{Error, Result};
use crate::path::Site;

/// A norm evaluated on lattice vectors.
pub trait LatticeNorm: Send + Sync {
    fn dim(&self) -> usize;
    fn xi(&self, y: Site) -> f64;
    /// Uncertainty of `ξ(y)` per unit Euclidean length of `y`.
    fn error_per_unit(&self) -> f64 {
        0.0
    }
}

/// Primitive lattice vectors with coordinates bounded by `height`, sorted.
pub fn direction_grid(dim: usize, height: i32) -> Vec<Site> {
    fn gcd(a: i32, b: i32) -> i32 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }
    let mut out = Vec::new();
    let side = (2 * height + 1) as usize;
    for mut i in 0..side.pow(dim as u32) {
        let mut c = [0i32; crate::path::MAX_DIM];
        for slot in c.iter_mut().take(dim) {
            *slot = (i % side) as i32 - height;
            i /= side;
        }
        let g = c.iter().fold(0, |g, &x| gcd(g, x));
        if g == 1 {
            out.push(Site(c));
        }
    }
    out.sort();
    out
}

pub fn default_height(dim: usize) -> i32 {
    match dim {
        1 => 1,
        2 => 8,
        _ => 2,
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiEstimate {
    pub value: f64,
    pub error: f64,
    /// `(r, −log H(x_r) / r)` pairs used in the fit.
    pub points: Vec<(f64, f64)>,
    pub flagged: bool,
}

/// Fit `−log H_λ(round(M x̂)) / r = a + b/r` over the given radii, where
/// `r` is the Euclidean length of the rounded target. Returns `a`; the
/// error is the RMS residual, or the distance from `a` to the outermost
/// raw value when fewer than three points are available.
pub fn xi_estimate(census: &PathCensus, direction: &[f64], lambda: f64, radii: &[f64]) -> Result<XiEstimate> {
    let dim = census.dim();
    if direction.len() != dim {
        return Err(Error::InvalidParameter("direction dimension mismatch".into()));
    }
    let len = norm2(direction);
    if len == 0.0 {
        return Err(Error::InvalidParameter("zero direction".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut points = Vec::new();
    for &m in radii {
        let t: Vec<i32> = direction.iter().map(|c| (m * c / len).round() as i32).collect();
        let l1: usize = t.iter().map(|c| c.unsigned_abs() as usize).sum();
        if l1 == 0 || l1 > census.n_max() || !seen.insert(t.clone()) {
            continue;
        }
        let site = Site::from_slice(&t);
        if let Some(lh) = census.log_h(site, lambda, census.n_max())? {
            let r = norm2(&site.to_f64(dim));
            points.push((r, -lh / r));
        }
    }
    let flagged_base = points.len() < 4;
    let (a, err) = match points.len() {
        0 => {
            return Ok(XiEstimate {
                value: 0.0,
                error: f64::INFINITY,
                points,
                flagged: true,
            })
        }
        1 => (points[0].1, 0.0),
        _ => {
            let n = points.len() as f64;
            let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
            for &(r, y) in &points {
                let x = 1.0 / r;
                sx += x;
                sy += y;
                sxx += x * x;
                sxy += x * y;
            }
            let det = n * sxx - sx * sx;
            let (a, b) = if det.abs() < 1e-300 {
                (sy / n, 0.0)
            } else {
                ((sy * sxx - sx * sxy) / det, (n * sxy - sx * sy) / det)
            };
            let rms = (points
                .iter()
                .map(|&(r, y)| (y - a - b / r).powi(2))
                .sum::<f64>()
                / n)
                .sqrt();
            (a, rms)
        }
    };
    let error = if points.len() < 3 {
        (points.last().unwrap().1 - a).abs()
    } else {
        err
    };
    Ok(XiEstimate {
        value: a,
        error,
        flagged: flagged_base || a <= 0.0 || error > 0.1 * a.abs(),
        points,
    })
}

/// Estimated `ξ_λ` on a grid of lattice directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormTable {
    pub lambda: f64,
    pub dim: usize,
    /// Primitive lattice vector of each direction.
    pub lattice: Vec<Vec<i32>>,
    /// The same directions normalized to unit length.
    pub directions: Vec<Vec<f64>>,
    /// `ξ_λ` of the unit directions.
    pub xi: Vec<f64>,
    pub errors: Vec<f64>,
    pub flagged: Vec<bool>,
    /// Radii used per direction.
    pub radii: Vec<Vec<f64>>,
    pub max_min_ratio: f64,
}

impl NormTable {
    /// Table from known values on unit directions.
    pub fn from_values(lambda: f64, lattice: Vec<Site>, dim: usize, xi: Vec<f64>, errors: Vec<f64>) -> Result<Self> {
        if lattice.len() != xi.len() || xi.len() != errors.len() || xi.is_empty() {
            return Err(Error::InvalidParameter("table columns differ in length".into()));
        }
        if xi.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter("xi values must be finite and >= 0".into()));
        }
        let directions = lattice
            .iter()
            .map(|v| {
                let f = v.to_f64(dim);
                let l = norm2(&f);
                f.into_iter().map(|c| c / l).collect()
            })
            .collect();
        let n = xi.len();
        Ok(NormTable {
            lambda,
            dim,
            lattice: lattice.iter().map(|v| v.coords(dim).to_vec()).collect(),
            directions,
            max_min_ratio: ratio(&xi),
            xi,
            errors,
            flagged: vec![false; n],
            radii: vec![Vec::new(); n],
        })
    }

    /// Estimate along every grid direction reachable by at least two
    /// multiples within the census length.
    pub fn estimate(census: &PathCensus, lambda: f64, height: i32) -> Result<Self> {
        let dim = census.dim();
        let grid: Vec<Site> = direction_grid(dim, height)
            .into_iter()
            .filter(|v| 2 * v.l1() as usize <= census.n_max())
            .collect();
        if grid.is_empty() {
            return Err(Error::InvalidParameter("census too short for any direction".into()));
        }
        let fits: Vec<Result<(Site, Vec<f64>, XiEstimate)>> = grid
            .par_iter()
            .map(|&v| {
                let f = v.to_f64(dim);
                let l = norm2(&f);
                let radii: Vec<f64> = (1..)
                    .take_while(|k| k * v.l1() as usize <= census.n_max())
                    .map(|k| k as f64 * l)
                    .collect();
                let est = xi_estimate(census, &f, lambda, &radii)?;
                Ok((v, radii, est))
            })
            .collect();
        let mut lattice = Vec::new();
        let mut xi = Vec::new();
        let mut errors = Vec::new();
        let mut flagged = Vec::new();
        let mut radii = Vec::new();
        for f in fits {
            let (v, r, est) = f?;
            lattice.push(v);
            xi.push(est.value.max(0.0));
            errors.push(est.error);
            flagged.push(est.flagged);
            radii.push(r);
        }
        let mut t = NormTable::from_values(lambda, lattice, dim, xi, errors)?;
        t.flagged = flagged;
        t.radii = radii;
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn max_error(&self) -> f64 {
        self.errors.iter().cloned().fold(0.0, f64::max)
    }

    pub fn min_xi(&self) -> f64 {
        self.xi.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Value on the grid direction with this lattice vector, if present.
    pub fn lookup(&self, v: &[i32]) -> Option<f64> {
        self.lattice.iter().position(|l| l == v).map(|i| self.xi[i])
    }

    /// `max_i (h, x_i) / ξ_i`, or `None` when the maximum is unbounded.
    pub fn polar_norm(&self, h: &[f64]) -> Option<f64> {
        let mut best: f64 = 0.0;
        for (d, &x) in self.directions.iter().zip(&self.xi) {
            let p = dot(h, d);
            if p <= 0.0 {
                continue;
            }
            if x <= 0.0 {
                return None;
            }
            best = best.max(p / x);
        }
        Some(best)
    }
}

fn ratio(xi: &[f64]) -> f64 {
    let max = xi.iter().cloned().fold(0.0, f64::max);
    let min = xi.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Values of another norm cached on a box around the origin.
pub struct CachedNorm<'a> {
    inner: &'a dyn LatticeNorm,
    dim: usize,
    radius: i32,
    side: usize,
    values: Vec<f64>,
}

impl<'a> CachedNorm<'a> {
    pub fn new(inner: &'a dyn LatticeNorm, radius: usize) -> Self {
        let dim = inner.dim();
        let side = 2 * radius + 1;
        let mut values = Vec::with_capacity(side.pow(dim as u32));
        for mut i in 0..side.pow(dim as u32) {
            let mut s = Site::ORIGIN;
            for k in 0..dim {
                s.0[k] = (i % side) as i32 - radius as i32;
                i /= side;
            }
            values.push(inner.xi(s));
        }
        CachedNorm {
            inner,
            dim,
            radius: radius as i32,
            side,
            values,
        }
    }
}

impl LatticeNorm for CachedNorm<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn xi(&self, y: Site) -> f64 {
        let mut idx = 0usize;
        for k in (0..self.dim).rev() {
            let c = y.0[k];
            if c.abs() > self.radius {
                return self.inner.xi(y);
            }
            idx = idx * self.side + (c + self.radius) as usize;
        }
        self.values[idx]
    }

    fn error_per_unit(&self) -> f64 {
        self.inner.error_per_unit()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::Locality;
    use crate::potential::PhiSpec;

    #[test]
    fn grid_is_symmetric_and_primitive() {
        let g = direction_grid(2, 3);
        assert!(g.contains(&Site::from_slice(&[1, 0])));
        assert!(g.contains(&Site::from_slice(&[-3, 2])));
        assert!(!g.contains(&Site::from_slice(&[2, 2])));
        for v in &g {
            assert!(g.contains(&-*v));
            assert!(g.contains(&Site::from_slice(&[v.0[1], v.0[0]])));
        }
        assert_eq!(direction_grid(1, 1).len(), 2);
    }

    #[test]
    fn one_dimensional_free_walk() {
        let c = PathCensus::build(&PhiSpec::free(Locality::Site), 1, 120).unwrap();
        let lambda = -(0.4f64).ln();
        let radii: Vec<f64> = (1..=40).map(|m| m as f64).collect();
        let e = xi_estimate(&c, &[1.0], lambda, &radii).unwrap();
        assert!((e.value - 2f64.ln()).abs() < 1e-4, "{e:?}");
        let t = NormTable::estimate(&c, lambda, 1).unwrap();
        assert_eq!(t.len(), 2);
        let p = t.polar_norm(&[0.3]).unwrap();
        assert!((p - 0.3 / t.xi[1]).abs() < 1e-12);
        assert_eq!(t.polar_norm(&[0.0]), Some(0.0));
    }

    #[test]
    fn polar_norm_homogeneous_and_guarded() {
        let lat = vec![Site::from_slice(&[-1]), Site::from_slice(&[1])];
        let t = NormTable::from_values(1.0, lat.clone(), 1, vec![0.5, 2.0], vec![0.0; 2]).unwrap();
        let a = t.polar_norm(&[0.7]).unwrap();
        assert!((t.polar_norm(&[1.4]).unwrap() - 2.0 * a).abs() < 1e-12);
        let z = NormTable::from_values(1.0, lat, 1, vec![0.5, 0.0], vec![0.0; 2]).unwrap();
        assert_eq!(z.polar_norm(&[0.1]), None);
        assert!(z.polar_norm(&[-0.1]).is_some());
    }
}
