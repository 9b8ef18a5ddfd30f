//! Ballistic versus sub-ballistic classification.

use serde::{Deserialize, Serialize};

use super::free_energy::FreeEnergyEstimate;
use super::rate::RateFunctionTable;
use crate::error::{Error, Result};
use crate::geometry::ShapeLimit;
use crate::potential::PhiSpec;
use crate::sampler::SpeedEstimate;

/// Absolute floor on a significant speed projection.
pub const SPEED_FLOOR: f64 = 0.02;
/// Significance, in standard errors, of a speed projection.
pub const SPEED_SIGMAS: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Ballistic,
    SubBallistic,
    NearCritical,
}

/// What the caller knows about `h`.
#[derive(Clone, Debug)]
pub struct PhaseEvidence {
    pub shape: ShapeLimit,
    /// Tolerance of the shape estimate; the near-critical band is twice it.
    pub tolerance: f64,
    /// Sampled speeds in increasing `n`.
    pub speeds: Vec<SpeedEstimate>,
    pub free_energy: Option<FreeEnergyEstimate>,
    /// Bracket `[lo, hi]` on `λ₀`.
    pub lambda0: Option<(f64, f64)>,
    pub rate: Option<RateFunctionTable>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedPoint {
    pub n: usize,
    pub projection: f64,
    pub projection_se: f64,
    /// `‖mean D/n‖₂` and its standard error.
    pub magnitude: f64,
    pub magnitude_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub h: Vec<f64>,
    /// `None` when the evidence conflicts.
    pub classification: Option<Phase>,
    /// `ξ*_{λ₀}(h)`; `None` stands for `+∞`.
    pub polar_norm: Option<f64>,
    pub band: f64,
    pub speeds: Vec<SpeedPoint>,
    pub lambda_hat: Option<f64>,
    pub lambda0: Option<(f64, f64)>,
    /// `Λ̂(h) − λ₀` using the bracket midpoint.
    pub excess: Option<f64>,
    pub j_at_zero: Option<f64>,
    pub inconsistency: Option<String>,
}

fn point(s: &SpeedEstimate) -> SpeedPoint {
    let magnitude = s.v.iter().map(|v| v * v).sum::<f64>().sqrt();
    let magnitude_se = s.se.iter().map(|v| v * v).sum::<f64>().sqrt();
    SpeedPoint {
        n: s.n,
        projection: s.projection,
        projection_se: s.projection_se,
        magnitude,
        magnitude_se,
    }
}

fn significant(value: f64, se: f64) -> bool {
    value > SPEED_SIGMAS * se && value > SPEED_FLOOR
}

/// Speed magnitudes that do not grow beyond noise along `n` and end below
/// significance.
fn vanishing(speeds: &[SpeedPoint]) -> bool {
    let Some(last) = speeds.last() else { return false };
    let trend = speeds
        .windows(2)
        .all(|w| w[1].magnitude <= w[0].magnitude + 2.0 * (w[0].magnitude_se + w[1].magnitude_se));
    trend && !significant(last.magnitude, last.magnitude_se)
}

pub fn classify_phase(spec: &PhiSpec, h: &[f64], evidence: &PhaseEvidence) -> Result<PhaseReport> {
    if evidence.speeds.windows(2).any(|w| w[1].n <= w[0].n) {
        return Err(Error::InvalidParameter("speeds must come in increasing n".into()));
    }
    let origin = h.iter().all(|&c| c == 0.0);
    let polar_norm = if spec.is_repulsive() && !origin {
        None
    } else {
        evidence.shape.polar_norm(h)
    };
    let band = 2.0 * evidence.tolerance;
    let speeds: Vec<SpeedPoint> = evidence.speeds.iter().map(point).collect();
    let lambda_hat = evidence.free_energy.as_ref().map(|f| f.lambda_hat);
    let excess = match (lambda_hat, evidence.lambda0) {
        (Some(l), Some((lo, hi))) => Some(l - 0.5 * (lo + hi)),
        _ => None,
    };
    let mut inconsistency = None;
    let classification = match polar_norm {
        Some(x) if (x - 1.0).abs() <= band => Some(Phase::NearCritical),
        Some(x) if x < 1.0 => {
            if vanishing(&speeds) {
                Some(Phase::SubBallistic)
            } else {
                inconsistency = Some(match speeds.last() {
                    None => "no speed evidence".to_string(),
                    Some(s) => format!(
                        "h inside the shape limit (polar norm {x:.4}) but speed {:.4} ± {:.4} at n = {} does not vanish",
                        s.magnitude, s.magnitude_se, s.n
                    ),
                });
                None
            }
        }
        _ => match speeds.last() {
            Some(s) if significant(s.projection, s.projection_se) => Some(Phase::Ballistic),
            Some(s) => {
                inconsistency = Some(format!(
                    "h outside the shape limit but speed projection {:.4} ± {:.4} at n = {} is not significant",
                    s.projection, s.projection_se, s.n
                ));
                None
            }
            None => {
                inconsistency = Some("no speed evidence".to_string());
                None
            }
        },
    };
    Ok(PhaseReport {
        h: h.to_vec(),
        classification,
        polar_norm,
        band,
        speeds,
        lambda_hat,
        lambda0: evidence.lambda0,
        excess,
        j_at_zero: evidence.rate.as_ref().map(RateFunctionTable::j_at_zero),
        inconsistency,
    })
}
