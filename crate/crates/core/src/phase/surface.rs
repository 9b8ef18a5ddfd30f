//! The implicit surface `F(g, μ) = 0` and the perturbed relation for `f`.

use serde::{Deserialize, Serialize};

use crate::coarse::{irreducible_profile, IrreducibleProfile, QMethod};
use crate::error::{Error, Result};
use crate::geometry::{ConeSpec, LatticeNorm};
use crate::logspace::log_sum_exp;
use crate::potential::{PerturbationSpec, PhiSpec};
use crate::stats::linear_fit;

/// Root of a decreasing function, bracketed by doubling outward from `start`.
fn decreasing_root(f: impl Fn(f64) -> f64, start: f64, what: &str) -> Result<f64> {
    let (mut lo, mut hi) = (start - 1.0, start + 1.0);
    let mut tries = 0;
    while f(lo) < 0.0 || f(hi) > 0.0 {
        let w = hi - lo;
        if f(lo) < 0.0 {
            lo -= w;
        }
        if f(hi) > 0.0 {
            hi += w;
        }
        tries += 1;
        if tries > 60 || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::NoRoot(what.into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceValue {
    pub g: Vec<f64>,
    pub mu: f64,
    pub n_max: usize,
    /// Truncated `F(g, μ)` for cutoffs `N = 0..=n_max`, non-decreasing.
    pub by_cutoff: Vec<f64>,
    pub value: f64,
}

/// `F(g, μ) = log Σ e^{(g, D(ω)) − μ|ω|} W̄(ω)` over irreducible `ω` with
/// `|ω| ≤ n_max`.
#[allow(non_snake_case)]
pub fn implicit_surface_F(
    spec: &PhiSpec,
    g: &[f64],
    mu: f64,
    norm: &dyn LatticeNorm,
    cone: &ConeSpec,
    n_max: usize,
) -> Result<SurfaceValue> {
    let p = irreducible_profile(spec, g, n_max, norm, cone, None)?;
    let by_cutoff = p.log_mass_by_cutoff(mu);
    Ok(SurfaceValue {
        g: g.to_vec(),
        mu,
        n_max,
        value: *by_cutoff.last().unwrap(),
        by_cutoff,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRoot {
    pub g: Vec<f64>,
    pub n_max: usize,
    pub method: QMethod,
    /// Root of the truncated `F(g, ·)`; a lower bound for the full root.
    pub mu: f64,
    /// Truncated roots for each cutoff with at least one piece.
    pub roots_by_cutoff: Vec<(usize, f64)>,
    /// Root after adding a geometric tail fitted to the upper half of
    /// lengths.
    pub mu_upper: Option<f64>,
    /// The tail could not be fitted as decaying, so the truncation does not
    /// bracket the root.
    pub flagged: bool,
}

impl SurfaceRoot {
    pub fn uncertainty(&self) -> f64 {
        self.mu_upper.map_or(f64::INFINITY, |u| u - self.mu)
    }
}

fn truncated_root(p: &IrreducibleProfile, upto: usize, start: f64) -> Result<f64> {
    decreasing_root(
        |mu| log_sum_exp((1..=upto).filter_map(|n| p.by_length[n].map(|v| v - mu * n as f64))).unwrap_or(f64::NEG_INFINITY),
        start,
        "truncated surface",
    )
}

pub fn surface_root_from_profile(p: &IrreducibleProfile) -> Result<SurfaceRoot> {
    let n_max = p.n_max;
    let first = (1..=n_max)
        .find(|&n| p.by_length[n].is_some())
        .ok_or_else(|| Error::DegenerateModel("no irreducible pieces".into()))?;
    let mut roots = Vec::new();
    let mut start = p.by_length[first].unwrap() / first as f64;
    for upto in first..=n_max {
        if p.by_length[upto].is_none() {
            continue;
        }
        let r = truncated_root(p, upto, start)?;
        roots.push((upto, r));
        start = r;
    }
    let mu = roots.last().unwrap().1;
    // geometric tail of the per-length terms at the truncated root
    let pts: Vec<(f64, f64)> = (n_max / 2..=n_max)
        .filter_map(|n| p.by_length[n].map(|v| (n as f64, v - mu * n as f64)))
        .collect();
    let fit = linear_fit(&pts).filter(|f| f.slope < 0.0);
    let mu_upper = match fit {
        None => None,
        Some(f) => {
            let tail = |m: f64| {
                let b = f.slope - (m - mu);
                if b >= 0.0 {
                    return f64::INFINITY;
                }
                f.intercept + b * (n_max + 1) as f64 - (-(b.exp())).ln_1p()
            };
            let total = |m: f64| {
                let head = log_sum_exp((1..=n_max).filter_map(|n| p.by_length[n].map(|v| v - m * n as f64)));
                let t = tail(m);
                if t == f64::INFINITY {
                    return f64::INFINITY;
                }
                log_sum_exp(head.into_iter().chain([t])).unwrap()
            };
            decreasing_root(total, mu + 1e-6, "surface with tail").ok()
        }
    };
    Ok(SurfaceRoot {
        g: p.tilt.clone(),
        n_max,
        method: p.method,
        mu,
        roots_by_cutoff: roots,
        flagged: mu_upper.is_none(),
        mu_upper,
    })
}

/// Locates `Λ(g)` as the `μ` solving `F(g, μ) = 0`.
pub fn implicit_surface_root(
    spec: &PhiSpec,
    g: &[f64],
    norm: &dyn LatticeNorm,
    cone: &ConeSpec,
    n_max: usize,
) -> Result<SurfaceRoot> {
    surface_root_from_profile(&irreducible_profile(spec, g, n_max, norm, cone, None)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectionMethod {
    /// Every piece has `R = c|ω|`, which forces `f = c`.
    CommonRate,
    Bisection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbedCorrection {
    pub g: Vec<f64>,
    pub perturbation: String,
    pub epsilon: f64,
    pub local: bool,
    pub n_max: usize,
    /// `λ(g)`, the truncated surface root normalizing `Q^{g, λ(g)}`.
    pub lambda: f64,
    pub f: f64,
    pub method: CorrectionMethod,
}

/// Solves `log Q^{g, λ(g)}(e^{f|ω| − R(ω, g)}) = 0` over the truncated
/// measure, normalized to total mass one.
pub fn perturbed_correction_f(
    spec: &PhiSpec,
    perturbation: &PerturbationSpec,
    g: &[f64],
    norm: &dyn LatticeNorm,
    cone: &ConeSpec,
    n_max: usize,
) -> Result<PerturbedCorrection> {
    let p = irreducible_profile(spec, g, n_max, norm, cone, Some(perturbation))?;
    let lambda = surface_root_from_profile(&p)?.mu;
    let (f, method) = match p.common_rate {
        Some(c) => (c, CorrectionMethod::CommonRate),
        None => {
            let norm_mass = p.log_mass(lambda);
            let pert = p.perturbed.as_ref().expect("perturbed profile");
            // increasing in f, so solve for −G
            let minus_g = |f: f64| {
                let s = log_sum_exp((1..=n_max).filter_map(|n| pert[n].map(|v| v + (f - lambda) * n as f64)));
                norm_mass - s.unwrap_or(f64::NEG_INFINITY)
            };
            (decreasing_root(minus_g, 0.0, "perturbed correction")?, CorrectionMethod::Bisection)
        }
    };
    Ok(PerturbedCorrection {
        g: g.to_vec(),
        perturbation: perturbation.name().to_string(),
        epsilon: perturbation.epsilon(),
        local: perturbation.is_local(),
        n_max,
        lambda,
        f,
        method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{free_walk_table, WulffShape, DEFAULT_TOLERANCE};
    use crate::path::Locality;

    fn line_cone(g: f64) -> (WulffShape, ConeSpec) {
        let lambda = (2.0 * g.cosh()).ln();
        let s = WulffShape::from_table(free_walk_table(1, lambda, 1).unwrap(), DEFAULT_TOLERANCE).unwrap();
        let c = ConeSpec::new(&s, vec![g], 0.1, 1).unwrap();
        (s, c)
    }

    #[test]
    fn root_recovers_the_free_energy_on_the_line() {
        let g = 0.9;
        let (s, cone) = line_cone(g);
        let spec = PhiSpec::free(Locality::Site);
        let r = implicit_surface_root(&spec, &[g], &s, &cone, 40).unwrap();
        let exact = (2.0 * f64::cosh(g)).ln();
        assert!((r.mu - exact).abs() < 1e-2, "{} vs {exact}", r.mu);
        assert!(r.mu <= exact + 1e-12);
        assert!(!r.flagged && r.mu_upper.unwrap() >= r.mu);
        assert!(r.roots_by_cutoff.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-12));
        let a = implicit_surface_F(&spec, &[g], 0.9, &s, &cone, 40).unwrap().value;
        let b = implicit_surface_F(&spec, &[g], 1.2, &s, &cone, 40).unwrap().value;
        assert!(a > b);
    }

    #[test]
    fn exact_corrections() {
        let g = 0.9;
        let (s, cone) = line_cone(g);
        let spec = PhiSpec::free(Locality::Site);
        let z = perturbed_correction_f(&spec, &PerturbationSpec::zero(), &[g], &s, &cone, 16).unwrap();
        assert_eq!(z.f, 0.0);
        let l = perturbed_correction_f(&spec, &PerturbationSpec::linear(0.05), &[g], &s, &cone, 16).unwrap();
        assert_eq!(l.f, 0.05);
    }

    #[test]
    fn reinforcement_correction_is_small() {
        let g = 0.9;
        let (s, cone) = line_cone(g);
        let spec = PhiSpec::free(Locality::Site);
        let mut last = f64::INFINITY;
        for eps in [0.05, 0.025, 0.0125] {
            let r = perturbed_correction_f(&spec, &PerturbationSpec::edge_reinforcement(eps), &[g], &s, &cone, 16).unwrap();
            assert_eq!(r.method, CorrectionMethod::Bisection);
            assert!(r.f.abs() <= 0.1 && r.f.abs() < last, "{eps}: {}", r.f);
            last = r.f.abs();
        }
    }
}
