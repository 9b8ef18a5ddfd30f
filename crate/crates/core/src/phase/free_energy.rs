//! Finite-volume free energy, its extrapolation, and its gradient.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::enumerate::{fekete_bracket, PathCensus};
use crate::error::{Error, Result};
use crate::potential::PhiSpec;
use crate::stats::{linear_fit, LineFit};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FreeEnergyMethod {
    Enumeration,
    /// The bracket uses sub- or super-additivity of `log Z_n`.
    EnumerationFekete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyEstimate {
    pub h: Vec<f64>,
    pub n_max: usize,
    /// `log Z_n^h / n` for `n = 1..=n_max`.
    pub series: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
    /// `Λ̂(h)`, the `1/n → 0` intercept clamped to `[lo, hi]`.
    pub lambda_hat: f64,
    pub fit: Option<LineFit>,
    pub clamped: bool,
    pub method: FreeEnergyMethod,
}

impl FreeEnergyEstimate {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

pub fn free_energy(spec: &PhiSpec, h: &[f64], n_max: usize) -> Result<FreeEnergyEstimate> {
    let census = PathCensus::build(spec, h.len(), n_max)?;
    free_energy_with(&census, spec, h, n_max)
}

/// Fit `log Z_n^h / n = Λ + a/n` over the upper half of `1..=n_max`.
pub fn free_energy_with(census: &PathCensus, spec: &PhiSpec, h: &[f64], n_max: usize) -> Result<FreeEnergyEstimate> {
    if n_max == 0 || n_max > census.n_max() {
        return Err(Error::InvalidParameter(format!(
            "n_max {n_max} outside 1..={}",
            census.n_max()
        )));
    }
    let b = fekete_bracket(census, spec, h, n_max)?;
    if b.lo > b.hi + 1e-9 * b.hi.abs().max(1.0) {
        return Err(Error::Contract(format!("empty free-energy bracket [{}, {}]", b.lo, b.hi)));
    }
    // both edges can meet up to rounding, e.g. for i.i.d. steps
    let (lo, hi) = (b.lo.min(b.hi), b.lo.max(b.hi));
    let first = (n_max / 2).max(1);
    let pts: Vec<(f64, f64)> = (first..=n_max).map(|n| (1.0 / n as f64, b.series[n - 1])).collect();
    let fit = linear_fit(&pts);
    let raw = fit.map_or(b.series[n_max - 1], |f| f.intercept);
    let lambda_hat = raw.clamp(lo, hi);
    let method = if spec.is_repulsive() || spec.is_attractive() {
        FreeEnergyMethod::EnumerationFekete
    } else {
        FreeEnergyMethod::Enumeration
    };
    Ok(FreeEnergyEstimate {
        h: h.to_vec(),
        n_max,
        series: b.series,
        lo,
        hi,
        lambda_hat,
        fit,
        clamped: lambda_hat != raw,
        method,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyGradient {
    pub h: Vec<f64>,
    pub step: f64,
    pub n_max: usize,
    /// `∇Λ̂(h)` by central differences of the extrapolated free energy.
    pub v: Vec<f64>,
    /// Finite-size uncertainty: spread between the extrapolations over the
    /// upper half and over the last three lengths.
    pub se: Vec<f64>,
    /// `∇` of `log Z_n^h / n` at `n = n_max`, i.e. the exact mean speed there.
    pub v_at_n_max: Vec<f64>,
    /// `b` in `v_n ≈ v + b/n`.
    pub finite_size_slope: Vec<f64>,
    /// Row-major finite-difference Hessian of `Λ̂`.
    pub hessian: Vec<f64>,
    pub min_eigenvalue: f64,
    /// Bracket widths on the stencil exceed the difference signal.
    pub underresolved: bool,
}

impl FreeEnergyGradient {
    /// Predicted mean speed at length `n`.
    pub fn speed_at(&self, n: usize) -> Vec<f64> {
        self.v
            .iter()
            .zip(&self.finite_size_slope)
            .map(|(v, b)| v + b / n as f64)
            .collect()
    }
}

fn intercept(series: &[f64], from: usize, to: usize) -> Option<LineFit> {
    let pts: Vec<(f64, f64)> = (from..=to).map(|n| (1.0 / n as f64, series[n - 1])).collect();
    linear_fit(&pts)
}

pub fn speed_from_free_energy(spec: &PhiSpec, h: &[f64], step: f64, n_max: usize) -> Result<FreeEnergyGradient> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter("step must be positive".into()));
    }
    let census = PathCensus::build(spec, h.len(), n_max)?;
    speed_from_free_energy_with(&census, spec, h, step, n_max)
}

pub fn speed_from_free_energy_with(
    census: &PathCensus,
    spec: &PhiSpec,
    h: &[f64],
    step: f64,
    n_max: usize,
) -> Result<FreeEnergyGradient> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter("step must be positive".into()));
    }
    let dim = h.len();
    let at = |shift: &[(usize, f64)]| -> Result<FreeEnergyEstimate> {
        let mut x = h.to_vec();
        for &(i, s) in shift {
            x[i] += s;
        }
        free_energy_with(census, spec, &x, n_max)
    };
    let centre = at(&[])?;
    let mut v = Vec::with_capacity(dim);
    let mut se = Vec::with_capacity(dim);
    let mut v_at_n_max = Vec::with_capacity(dim);
    let mut slope = Vec::with_capacity(dim);
    let mut hess = DMatrix::<f64>::zeros(dim, dim);
    let mut underresolved = false;
    for i in 0..dim {
        let p = at(&[(i, step)])?;
        let m = at(&[(i, -step)])?;
        let signal = (p.lambda_hat - m.lambda_hat).abs();
        underresolved |= p.width().max(m.width()) > signal;
        v.push((p.lambda_hat - m.lambda_hat) / (2.0 * step));
        // derivative of the per-length series, fitted on its own
        let d: Vec<f64> = p
            .series
            .iter()
            .zip(&m.series)
            .map(|(a, b)| (a - b) / (2.0 * step))
            .collect();
        v_at_n_max.push(d[n_max - 1]);
        let half = intercept(&d, (n_max / 2).max(1), n_max);
        let tail = intercept(&d, n_max.saturating_sub(2).max(1), n_max);
        let spread = match (half, tail) {
            (Some(a), Some(b)) => (a.intercept - b.intercept).abs().max(a.intercept_se.min(1.0)),
            _ => f64::INFINITY,
        };
        se.push(spread);
        slope.push(half.map_or(0.0, |f| f.slope));
        hess[(i, i)] = (p.lambda_hat - 2.0 * centre.lambda_hat + m.lambda_hat) / (step * step);
    }
    for i in 0..dim {
        for j in i + 1..dim {
            let pp = at(&[(i, step), (j, step)])?.lambda_hat;
            let pm = at(&[(i, step), (j, -step)])?.lambda_hat;
            let mp = at(&[(i, -step), (j, step)])?.lambda_hat;
            let mm = at(&[(i, -step), (j, -step)])?.lambda_hat;
            let c = (pp - pm - mp + mm) / (4.0 * step * step);
            hess[(i, j)] = c;
            hess[(j, i)] = c;
        }
    }
    let min_eigenvalue = hess
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    Ok(FreeEnergyGradient {
        h: h.to_vec(),
        step,
        n_max,
        v,
        se,
        v_at_n_max,
        finite_size_slope: slope,
        hessian: hess.transpose().iter().cloned().collect(),
        min_eigenvalue,
        underresolved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::Locality;

    #[test]
    fn free_walk_on_the_line() {
        let spec = PhiSpec::free(Locality::Site);
        for h in [0.0, 0.3, 0.9] {
            let f = free_energy(&spec, &[h], 20).unwrap();
            let exact = (2.0 * f64::cosh(h)).ln();
            assert!(f.series.iter().all(|s| (s - exact).abs() < 1e-12));
            assert!((f.lambda_hat - exact).abs() < 1e-12);
            let g = speed_from_free_energy(&spec, &[h], 1e-4, 20).unwrap();
            assert!((g.v[0] - h.tanh()).abs() < 1e-7, "{:?}", g.v);
            let curv = 1.0 - h.tanh().powi(2);
            assert!((g.min_eigenvalue - curv).abs() < 1e-3);
        }
    }

    #[test]
    fn attractive_per_length_values_stay_below_log_2d() {
        let spec = crate::potential::ModelParams::default_for("reinforced").unwrap().build().unwrap();
        let f = free_energy(&spec, &[0.0, 0.0], 10).unwrap();
        assert!(f.series.iter().all(|&s| s <= 4f64.ln() + 1e-12));
        assert!(f.lo <= f.lambda_hat && f.lambda_hat <= f.hi);
        assert_eq!(f.method, FreeEnergyMethod::EnumerationFekete);
    }

    #[test]
    fn symmetric_spec_has_zero_speed_at_the_origin() {
        let spec = PhiSpec::saw(Locality::Site);
        let g = speed_from_free_energy(&spec, &[0.0, 0.0], 0.05, 10).unwrap();
        assert!(g.v.iter().all(|v| v.abs() < 1e-12), "{:?}", g.v);
        assert!(g.v_at_n_max.iter().all(|v| v.abs() < 1e-12));
    }
}
