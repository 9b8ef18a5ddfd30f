//! Estimators on sampled chains.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::chain::ChainStats;
use super::diagnostics::{batch_means, sokal_tau};
use crate::coarse::cone_points_path;
use crate::enumerate::EndpointProb;
use crate::error::{Error, Result};
use crate::geometry::{CachedNorm, ConeSpec, LatticeNorm};
use crate::path::Pattern;
use crate::stats::variance;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedEstimate {
    pub n: usize,
    /// Mean of `D(γ)/n` per coordinate.
    pub v: Vec<f64>,
    pub se: Vec<f64>,
    /// Mean of `(ĥ, D(γ))/n` along the normalized drift.
    pub projection: f64,
    pub projection_se: f64,
    pub flagged: bool,
}

pub fn estimate_speed(stats: &ChainStats) -> SpeedEstimate {
    let n = stats.n as f64;
    let (mut v, mut se) = (Vec::new(), Vec::new());
    for a in 0..stats.dim {
        let xs: Vec<f64> = stats.coordinate(a).into_iter().map(|x| x / n).collect();
        let bm = batch_means(&xs, stats.chains);
        v.push(bm.mean);
        se.push(bm.se);
    }
    let proj: Vec<f64> = stats.projection().into_iter().map(|x| x / n).collect();
    let bm = batch_means(&proj, stats.chains);
    SpeedEstimate {
        n: stats.n,
        v,
        se,
        projection: bm.mean,
        projection_se: bm.se,
        flagged: stats.flagged,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovariancePoint {
    pub n: usize,
    /// `Cov(D)/n`, row-major.
    pub cov_per_step: Vec<f64>,
    /// `Var((ĥ, D))/n`.
    pub var_along_drift: f64,
    /// Its standard error from the autocorrelation-corrected sample size.
    pub var_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceTrend {
    pub points: Vec<CovariancePoint>,
    /// `var_along_drift` ratios of consecutive lengths.
    pub ratios: Vec<f64>,
}

fn cov(a: &[f64], b: &[f64]) -> f64 {
    let ma = a.iter().sum::<f64>() / a.len() as f64;
    let mb = b.iter().sum::<f64>() / b.len() as f64;
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() as f64 - 1.0)
}

/// Per-length endpoint covariance, chains given in increasing `n`.
pub fn estimate_endpoint_covariance(chains: &[ChainStats]) -> Result<CovarianceTrend> {
    let mut points = Vec::new();
    for s in chains {
        if s.len() < 2 {
            return Err(Error::InvalidParameter("need at least two samples".into()));
        }
        let n = s.n as f64;
        let coords: Vec<Vec<f64>> = (0..s.dim).map(|a| s.coordinate(a)).collect();
        let mut c = Vec::with_capacity(s.dim * s.dim);
        for i in 0..s.dim {
            for j in 0..s.dim {
                c.push(cov(&coords[i], &coords[j]) / n);
            }
        }
        let proj = s.projection();
        let var = variance(&proj) / n;
        // the variance of a sample variance is about 2σ⁴ / N_eff
        let sq: Vec<f64> = {
            let m = proj.iter().sum::<f64>() / proj.len() as f64;
            proj.iter().map(|x| (x - m).powi(2)).collect()
        };
        let n_eff = proj.len() as f64 / (2.0 * sokal_tau(&sq));
        let var_se = var * (2.0 / n_eff).sqrt();
        points.push(CovariancePoint {
            n: s.n,
            cov_per_step: c,
            var_along_drift: var,
            var_se,
        });
    }
    let ratios = points
        .windows(2)
        .map(|w| w[1].var_along_drift / w[0].var_along_drift)
        .collect();
    Ok(CovarianceTrend { points, ratios })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub mean: f64,
    pub se: f64,
    pub samples: usize,
}

/// Mean fraction `#cone(γ)/n` over stored paths.
pub fn estimate_cone_density(stats: &ChainStats, norm: &dyn LatticeNorm, cone: &ConeSpec) -> Result<DensityEstimate> {
    if stats.paths.is_empty() {
        return Err(Error::InvalidParameter("the chain did not keep its paths".into()));
    }
    let cached = CachedNorm::new(norm, stats.n);
    let xs: Vec<f64> = stats
        .paths
        .iter()
        .map(|p| cone_points_path(p, &cached, cone).len() as f64 / stats.n as f64)
        .collect();
    let bm = batch_means(&xs, stats.chains);
    Ok(DensityEstimate {
        mean: bm.mean,
        se: bm.se,
        samples: xs.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternFrequency {
    /// Mean of `N_η(γ)/n`.
    pub x: f64,
    pub se: f64,
    /// Sample variance of `N_η(γ)/n`.
    pub variance: f64,
}

pub fn estimate_pattern_frequency(stats: &ChainStats, pattern: &Pattern) -> Result<PatternFrequency> {
    if stats.paths.is_empty() {
        return Err(Error::InvalidParameter("the chain did not keep its paths".into()));
    }
    let xs: Vec<f64> = stats
        .paths
        .iter()
        .map(|p| p.count_pattern(pattern) as f64 / stats.n as f64)
        .collect();
    let bm = batch_means(&xs, stats.chains);
    Ok(PatternFrequency {
        x: bm.mean,
        se: bm.se,
        variance: variance(&xs),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodnessOfFit {
    pub chi2: f64,
    pub dof: usize,
    pub p_value: f64,
    pub samples: usize,
    /// Sampled endpoints that the exact law gives probability zero.
    pub impossible: usize,
}

/// Pearson test of the sampled endpoint histogram against an exact law.
/// Cells expected to hold fewer than five samples are pooled.
pub fn endpoint_goodness_of_fit(stats: &ChainStats, exact: &[EndpointProb]) -> Result<GoodnessOfFit> {
    let mut counts: BTreeMap<&[i32], u64> = BTreeMap::new();
    for i in 0..stats.len() {
        *counts.entry(stats.endpoint(i)).or_default() += 1;
    }
    let total = stats.len() as f64;
    let mut impossible = 0u64;
    let known: BTreeMap<&[i32], f64> = exact.iter().map(|e| (e.x.as_slice(), e.p)).collect();
    for (x, &c) in &counts {
        if !known.contains_key(x) {
            impossible += c;
        }
    }
    let mut chi2 = 0.0;
    let mut cells = 0usize;
    let (mut pool_obs, mut pool_exp) = (0.0, 0.0);
    for e in exact {
        let expected = e.p * total;
        let observed = counts.get(e.x.as_slice()).copied().unwrap_or(0) as f64;
        if expected < 5.0 {
            pool_obs += observed;
            pool_exp += expected;
        } else {
            chi2 += (observed - expected).powi(2) / expected;
            cells += 1;
        }
    }
    if pool_exp > 0.0 {
        chi2 += (pool_obs - pool_exp).powi(2) / pool_exp;
        cells += 1;
    }
    let dof = cells.saturating_sub(1).max(1);
    let p_value = if impossible > 0 {
        0.0
    } else {
        let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        1.0 - dist.cdf(chi2)
    };
    Ok(GoodnessOfFit {
        chi2,
        dof,
        p_value,
        samples: stats.len(),
        impossible: impossible as usize,
    })
}
