//! The Wulff shape `K_λ = {h : (h, x) ≤ ξ_λ(x)}` as a polytope.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{direction_grid, dot, norm2, LatticeNorm, NormTable};
use crate::enumerate::PathCensus;
use crate::error::{Error, Result};
use crate::path::Site;
use crate::potential::PhiSpec;

pub const DEFAULT_TOLERANCE: f64 = 5e-3;

const FEAS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Membership {
    Inside,
    Boundary,
    Outside,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualDrift {
    pub h: Vec<f64>,
    /// `false` when `x` is normal to a facet and `h` was chosen as the
    /// minimum-norm maximizer.
    pub unique: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WulffShape {
    pub lambda: f64,
    pub table: NormTable,
    pub vertices: Vec<Vec<f64>>,
    pub tolerance: f64,
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn subsets(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    if k > n {
        return;
    }
    loop {
        f(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

impl WulffShape {
    pub fn from_table(table: NormTable, tolerance: f64) -> Result<Self> {
        let d = table.dim;
        let m = table.len();
        let mut vertices: Vec<Vec<f64>> = Vec::new();
        subsets(m, d, |sel| {
            let a = DMatrix::from_fn(d, d, |r, c| table.directions[sel[r]][c]);
            let b = DVector::from_fn(d, |r, _| table.xi[sel[r]]);
            let Some(sol) = a.lu().solve(&b) else { return };
            let v: Vec<f64> = sol.iter().cloned().collect();
            if v.iter().any(|c| !c.is_finite()) {
                return;
            }
            let feasible = table
                .directions
                .iter()
                .zip(&table.xi)
                .all(|(dir, &x)| dot(&v, dir) <= x + FEAS * x.max(1.0));
            if feasible && !vertices.iter().any(|w| dist(w, &v) < 1e-9) {
                vertices.push(v);
            }
        });
        if vertices.is_empty() {
            return Err(Error::DegenerateModel("Wulff shape has no vertices".into()));
        }
        vertices.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(WulffShape {
            lambda: table.lambda,
            table,
            vertices,
            tolerance,
        })
    }

    pub fn dim(&self) -> usize {
        self.table.dim
    }

    /// Support function `max_{v ∈ K} (v, y)`, the convex interpolation of
    /// the tabulated `ξ`.
    pub fn support(&self, y: &[f64]) -> f64 {
        self.vertices
            .iter()
            .map(|v| dot(v, y))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn polar_norm(&self, h: &[f64]) -> Option<f64> {
        self.table.polar_norm(h)
    }

    pub fn membership(&self, h: &[f64]) -> Membership {
        match self.polar_norm(h) {
            None => Membership::Outside,
            Some(p) if (p - 1.0).abs() <= self.tolerance => Membership::Boundary,
            Some(p) if p < 1.0 => Membership::Inside,
            Some(_) => Membership::Outside,
        }
    }

    /// A drift `h ∈ ∂K` with `(h, x) = ξ(x)`.
    pub fn dual_drift(&self, x: &[f64]) -> Result<DualDrift> {
        if x.len() != self.dim() || norm2(x) == 0.0 {
            return Err(Error::InvalidParameter("dual of a zero or mis-sized vector".into()));
        }
        let best = self.support(x);
        let scale = best.abs().max(norm2(x));
        let ties: Vec<&Vec<f64>> = self
            .vertices
            .iter()
            .filter(|v| dot(v, x) >= best - 1e-9 * scale)
            .collect();
        if ties.len() == 1 {
            return Ok(DualDrift {
                h: ties[0].clone(),
                unique: true,
            });
        }
        Ok(DualDrift {
            h: min_norm_point(&ties),
            unique: false,
        })
    }

    /// `s_h(y) = ξ(y) − (h, y)`.
    pub fn surcharge(&self, h: &[f64], y: &[f64]) -> f64 {
        self.support(y) - dot(h, y)
    }

    /// Sum of the surcharges of the increments of a trunk.
    pub fn surcharge_trunk(&self, h: &[f64], trunk: &[Site]) -> f64 {
        let d = self.dim();
        trunk
            .windows(2)
            .map(|w| self.surcharge(h, &(w[1] - w[0]).to_f64(d)))
            .sum()
    }
}

impl LatticeNorm for WulffShape {
    fn dim(&self) -> usize {
        self.table.dim
    }

    fn xi(&self, y: Site) -> f64 {
        self.support(&y.to_f64(self.table.dim))
    }

    fn error_per_unit(&self) -> f64 {
        self.table.max_error()
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Minimum-norm point of the convex hull of `pts`, by Frank-Wolfe with
/// exact line search.
fn min_norm_point(pts: &[&Vec<f64>]) -> Vec<f64> {
    let d = pts[0].len();
    let mut x: Vec<f64> = vec![0.0; d];
    for p in pts {
        for i in 0..d {
            x[i] += p[i] / pts.len() as f64;
        }
    }
    for _ in 0..5000 {
        let s = pts
            .iter()
            .min_by(|a, b| dot(a, &x).partial_cmp(&dot(b, &x)).unwrap())
            .unwrap();
        let dir: Vec<f64> = s.iter().zip(&x).map(|(a, b)| a - b).collect();
        let dd = dot(&dir, &dir);
        if dd < 1e-30 {
            break;
        }
        let t = (-dot(&x, &dir) / dd).clamp(0.0, 1.0);
        if t * dd.sqrt() < 1e-15 {
            break;
        }
        for i in 0..d {
            x[i] += t * dir[i];
        }
    }
    x
}

/// Closed-form `ξ_λ(x)` of the walk with `φ ≡ 0`, for `e^λ > 2d`.
///
/// Here `K_λ = {h : Σ_i 2 cosh h_i ≤ e^λ}` and the maximizer of `(h, x)` on
/// its boundary is `h_i = asinh(x_i / 2μ)` with `μ` fixed by the constraint.
pub fn free_walk_xi(lambda: f64, x: &[f64]) -> Result<f64> {
    let d = x.len() as f64;
    let budget = lambda.exp();
    if budget <= 2.0 * d {
        return Err(Error::InvalidParameter(format!(
            "lambda = {lambda} is not above log(2d)"
        )));
    }
    if x.iter().all(|&c| c == 0.0) {
        return Ok(0.0);
    }
    let g = |mu: f64| -> f64 {
        x.iter()
            .map(|&c| 2.0 * (1.0 + (c / (2.0 * mu)).powi(2)).sqrt())
            .sum::<f64>()
            - budget
    };
    let (mut lo, mut hi) = (1e-12f64, 1.0f64);
    while g(hi) > 0.0 {
        hi *= 2.0;
    }
    while g(lo) < 0.0 {
        lo /= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    Ok(x.iter().map(|&c| c * (c / (2.0 * mu)).asinh()).sum())
}

/// Exact table for `φ ≡ 0`.
pub fn free_walk_table(dim: usize, lambda: f64, height: i32) -> Result<NormTable> {
    let grid = direction_grid(dim, height);
    let xi = grid
        .iter()
        .map(|v| {
            let f = v.to_f64(dim);
            let l = norm2(&f);
            free_walk_xi(lambda, &f).map(|x| x / l)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = xi.len();
    NormTable::from_values(lambda, grid, dim, xi, vec![0.0; n])
}

/// What is known about `K_{λ₀}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ShapeLimit {
    /// `K_{λ₀} = {0}`.
    Point,
    /// Full-dimensional, with `ξ_{λ₀}` bounded below by the table.
    Table { shape: Box<WulffShape> },
}

impl ShapeLimit {
    /// `ξ_{λ₀}(x) ≥ φ(1)‖x‖₁`, i.e. the cube `[−φ(1), φ(1)]^d` lies in
    /// `K_{λ₀}`.
    pub fn attractive_lower_bound(dim: usize, phi1: f64) -> Result<ShapeLimit> {
        let grid = direction_grid(dim, 1);
        let xi: Vec<f64> = grid
            .iter()
            .map(|v| phi1 * v.l1() as f64 / norm2(&v.to_f64(dim)))
            .collect();
        let n = xi.len();
        let table = NormTable::from_values(f64::NAN, grid, dim, xi, vec![0.0; n])?;
        Ok(ShapeLimit::Table {
            shape: Box::new(WulffShape::from_table(table, DEFAULT_TOLERANCE)?),
        })
    }

    /// `ξ*_{λ₀}(h)`; `None` when unbounded (always for the point).
    pub fn polar_norm(&self, h: &[f64]) -> Option<f64> {
        match self {
            ShapeLimit::Point => {
                if h.iter().all(|&c| c == 0.0) {
                    Some(0.0)
                } else {
                    None
                }
            }
            ShapeLimit::Table { shape } => shape.polar_norm(h),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSlice {
    pub lambda: f64,
    pub min_xi: f64,
    pub max_xi: f64,
    pub table: NormTable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeLimitReport {
    pub slices: Vec<LambdaSlice>,
    /// `"degenerate-point"` or `"full-dimensional"`.
    pub classification: String,
    /// `φ(1)‖x‖₁` lower bound checked at every `λ` for attractive models.
    pub attractive_bound_holds: Option<bool>,
}

/// Norm tables along a decreasing sequence of `λ`, and whether the minimum
/// of `ξ_λ` appears to vanish.
pub fn k_lambda0(spec: &PhiSpec, census: &PathCensus, lambdas: &[f64], height: i32) -> Result<ShapeLimitReport> {
    if lambdas.is_empty() {
        return Err(Error::InvalidParameter("empty lambda sequence".into()));
    }
    let mut slices = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let table = NormTable::estimate(census, lambda, height)?;
        slices.push(LambdaSlice {
            lambda,
            min_xi: table.min_xi(),
            max_xi: table.xi.iter().cloned().fold(0.0, f64::max),
            table,
        });
    }
    let first = slices.first().unwrap().min_xi;
    let last = slices.last().unwrap().min_xi;
    let degenerate = last < 0.02 || last < 0.1 * first;
    let attractive_bound_holds = spec.is_attractive().then(|| {
        let phi1 = spec.phi1();
        slices.iter().all(|s| {
            s.table.lattice.iter().zip(&s.table.xi).zip(&s.table.errors).all(|((v, &x), &e)| {
                let l1: f64 = v.iter().map(|c| c.abs() as f64).sum();
                let l2 = norm2(&v.iter().map(|&c| c as f64).collect::<Vec<_>>());
                x + e >= phi1 * l1 / l2
            })
        })
    });
    Ok(ShapeLimitReport {
        slices,
        classification: if degenerate { "degenerate-point" } else { "full-dimensional" }.into(),
        attractive_bound_holds,
    })
}
