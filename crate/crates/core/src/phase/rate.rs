//! Discrete Legendre transform of the tilted free energy.

use serde::{Deserialize, Serialize};

use super::free_energy::free_energy_with;
use crate::enumerate::PathCensus;
use crate::error::{Error, Result};
use crate::potential::PhiSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFunctionTable {
    pub h: Vec<f64>,
    pub n_max: usize,
    pub g_grid: Vec<Vec<f64>>,
    /// `Λ_h(g) = Λ̂(h + g) − Λ̂(h)` on the g-grid.
    pub lambda_h: Vec<f64>,
    pub u_grid: Vec<Vec<f64>>,
    /// `J_h(u) = max_g {(g, u) − Λ_h(g)}`.
    pub j: Vec<f64>,
    /// Index into `g_grid` of the maximizer.
    pub argmax: Vec<usize>,
    /// The maximizer sits on the edge of the g-grid, so the value is only a
    /// lower bound.
    pub flagged: Vec<bool>,
}

impl RateFunctionTable {
    /// `J_h(0) = −min_g Λ_h(g)`.
    pub fn j_at_zero(&self) -> f64 {
        -self.lambda_h.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Axis-aligned product grid with `points` values per axis on `[lo, hi]`.
pub fn product_grid(dim: usize, lo: f64, hi: f64, points: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..points)
        .map(|k| if points == 1 { lo } else { lo + (hi - lo) * k as f64 / (points - 1) as f64 })
        .collect();
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|v| {
                axis.iter().map(move |&a| {
                    let mut w = v.clone();
                    w.push(a);
                    w
                })
            })
            .collect();
    }
    out
}

pub fn rate_function(
    spec: &PhiSpec,
    h: &[f64],
    u_grid: &[Vec<f64>],
    g_grid: &[Vec<f64>],
    n_max: usize,
) -> Result<RateFunctionTable> {
    let census = PathCensus::build(spec, h.len(), n_max)?;
    rate_function_with(&census, spec, h, u_grid, g_grid, n_max)
}

/// The maximum over affine functions of `u` is convex by construction. The
/// origin is added to the g-grid if missing so that `J_h ≥ 0`.
pub fn rate_function_with(
    census: &PathCensus,
    spec: &PhiSpec,
    h: &[f64],
    u_grid: &[Vec<f64>],
    g_grid: &[Vec<f64>],
    n_max: usize,
) -> Result<RateFunctionTable> {
    let dim = h.len();
    if g_grid.is_empty() || g_grid.iter().chain(u_grid).any(|v| v.len() != dim) {
        return Err(Error::InvalidParameter("grid points must match the drift dimension".into()));
    }
    let mut g_grid = g_grid.to_vec();
    if !g_grid.iter().any(|g| g.iter().all(|&c| c == 0.0)) {
        g_grid.push(vec![0.0; dim]);
    }
    let base = free_energy_with(census, spec, h, n_max)?.lambda_hat;
    let lambda_h = g_grid
        .iter()
        .map(|g| {
            let x: Vec<f64> = h.iter().zip(g).map(|(a, b)| a + b).collect();
            free_energy_with(census, spec, &x, n_max).map(|f| f.lambda_hat - base)
        })
        .collect::<Result<Vec<f64>>>()?;
    let lo: Vec<f64> = (0..dim)
        .map(|i| g_grid.iter().map(|g| g[i]).fold(f64::INFINITY, f64::min))
        .collect();
    let hi: Vec<f64> = (0..dim)
        .map(|i| g_grid.iter().map(|g| g[i]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut j = Vec::with_capacity(u_grid.len());
    let mut argmax = Vec::with_capacity(u_grid.len());
    let mut flagged = Vec::with_capacity(u_grid.len());
    for u in u_grid {
        let (k, best) = g_grid
            .iter()
            .zip(&lambda_h)
            .map(|(g, l)| g.iter().zip(u).map(|(a, b)| a * b).sum::<f64>() - l)
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });
        let g = &g_grid[k];
        flagged.push((0..dim).any(|i| g[i] == lo[i] || g[i] == hi[i]));
        j.push(best);
        argmax.push(k);
    }
    Ok(RateFunctionTable {
        h: h.to_vec(),
        n_max,
        g_grid,
        lambda_h,
        u_grid: u_grid.to_vec(),
        j,
        argmax,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::Locality;

    fn cramer(u: f64, h: f64) -> f64 {
        let m = h.tanh();
        let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
        0.5 * (term(1.0 + u, 1.0 + m) + term(1.0 - u, 1.0 - m))
    }

    #[test]
    fn tilted_steps_on_the_line() {
        let h = 0.4;
        let spec = PhiSpec::free(Locality::Site);
        let g = product_grid(1, -3.0, 3.0, 1201);
        let u: Vec<Vec<f64>> = (-18..=18).map(|k| vec![k as f64 * 0.05]).collect();
        let t = rate_function(&spec, &[h], &u, &g, 12).unwrap();
        for (k, uu) in u.iter().enumerate() {
            assert!(!t.flagged[k]);
            assert!((t.j[k] - cramer(uu[0], h)).abs() < 1e-4, "u={}: {} vs {}", uu[0], t.j[k], cramer(uu[0], h));
            assert!(t.j[k] >= 0.0);
        }
        // second differences on the uniform u-grid are non-negative
        assert!(t.j.windows(3).all(|w| w[0] + w[2] - 2.0 * w[1] >= -1e-12));
        let at_speed = rate_function(&spec, &[h], &[vec![h.tanh()]], &g, 12).unwrap();
        assert!(at_speed.j[0].abs() < 1e-4);
    }

    #[test]
    fn narrow_grid_is_flagged() {
        let spec = PhiSpec::free(Locality::Site);
        let g = product_grid(1, -0.2, 0.2, 41);
        let t = rate_function(&spec, &[0.0], &[vec![0.9]], &g, 8).unwrap();
        assert!(t.flagged[0]);
    }
}
