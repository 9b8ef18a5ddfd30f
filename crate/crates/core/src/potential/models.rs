//! Built-in potentials.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Energy, Extension, PhiSpec, DEFAULT_L_MAX};
use crate::error::{Error, Result};
use crate::path::Locality;

/// Law of the non-positive random potential `V` of the annealed model,
/// described through `X = −V ≥ 0`.
#[derive(Clone)]
pub enum AnnealedLaw {
    /// `X ≡ c`.
    Constant { c: f64 },
    /// `X ~ Exp(rate)`.
    Exponential { rate: f64 },
    /// `X ~ Gamma(shape, rate)`.
    Gamma { shape: f64, rate: f64 },
    /// `X` with the given probability density on `[lower, ∞)`.
    Density {
        pdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        lower: f64,
    },
}

impl fmt::Debug for AnnealedLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnnealedLaw::Constant { c } => write!(f, "Constant({c})"),
            AnnealedLaw::Exponential { rate } => write!(f, "Exponential({rate})"),
            AnnealedLaw::Gamma { shape, rate } => write!(f, "Gamma({shape}, {rate})"),
            AnnealedLaw::Density { lower, .. } => write!(f, "Density(lower={lower})"),
        }
    }
}

const QUAD_RTOL: f64 = 1e-10;

/// `E exp(−l X)` for a density on `[lower, ∞)`, computed in the scaled
/// variable `y = l (x − lower)` so that the integrand stays smooth for
/// large `l`.
fn laplace_transform(pdf: &(dyn Fn(f64) -> f64 + Send + Sync), lower: f64, l: f64) -> f64 {
    let scale = if l > 1.0 { l } else { 1.0 };
    // t in [0, 1) ↦ y = t / (1 − t)
    let integrand = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let y = t / (1.0 - t);
        let jac = 1.0 / ((1.0 - t) * (1.0 - t));
        let x = lower + y / scale;
        let v = (-l * (x - lower)).exp() * pdf(x) * jac;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let rough = quadrature::integrate(integrand, 0.0, 1.0, 1e-6).integral;
    let fine = quadrature::integrate(integrand, 0.0, 1.0, (QUAD_RTOL * rough.abs()).max(1e-300));
    (-l * lower).exp() * fine.integral / scale
}

impl PhiSpec {
    pub fn free(locality: Locality) -> PhiSpec {
        PhiSpec::from_values(
            "free",
            locality,
            &[Energy::Finite(0.0), Energy::Finite(0.0)],
            Extension::Affine,
        )
        .unwrap()
    }

    /// `φ(l) = ∞·1{l > 1}`.
    pub fn saw(locality: Locality) -> PhiSpec {
        PhiSpec::from_values(
            "saw",
            locality,
            &[Energy::Finite(0.0), Energy::Finite(0.0), Energy::Infinite],
            Extension::Affine,
        )
        .unwrap()
    }

    /// `φ(l) = β l (l − 1) / 2`.
    pub fn domb_joyce(beta: f64, locality: Locality) -> Result<PhiSpec> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be >= 0, got {beta}")));
        }
        PhiSpec::from_fn("domb-joyce", locality, DEFAULT_L_MAX, Extension::Affine, |l| {
            let l = l as f64;
            Energy::Finite(beta * l * (l - 1.0) / 2.0)
        })
    }

    /// `φ(l) = −log E exp(l V)`.
    pub fn annealed(law: &AnnealedLaw, locality: Locality) -> Result<PhiSpec> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        let (f, slope): (Box<dyn Fn(u32) -> f64>, f64) = match law.clone() {
            AnnealedLaw::Constant { c } => {
                if !(c >= 0.0 && c.is_finite()) {
                    return bad(format!("annealed constant must be >= 0, got {c}"));
                }
                (Box::new(move |l| c * l as f64), c)
            }
            AnnealedLaw::Exponential { rate } => {
                if !(rate > 0.0 && rate.is_finite()) {
                    return bad(format!("rate must be > 0, got {rate}"));
                }
                (Box::new(move |l| (l as f64 / rate).ln_1p()), 0.0)
            }
            AnnealedLaw::Gamma { shape, rate } => {
                if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
                    return bad(format!("gamma parameters must be > 0, got ({shape}, {rate})"));
                }
                (Box::new(move |l| shape * (l as f64 / rate).ln_1p()), 0.0)
            }
            AnnealedLaw::Density { pdf, lower } => {
                if !(lower >= 0.0 && lower.is_finite()) {
                    return bad(format!("support must lie in [0, inf), got lower = {lower}"));
                }
                let mass = laplace_transform(pdf.as_ref(), lower, 0.0);
                if (mass - 1.0).abs() > 1e-8 {
                    return bad(format!("density integrates to {mass}, not 1"));
                }
                (
                    Box::new(move |l| -laplace_transform(pdf.as_ref(), lower, l as f64).ln()),
                    lower,
                )
            }
        };
        let spec = PhiSpec::from_fn("annealed", locality, DEFAULT_L_MAX, Extension::Affine, |l| {
            Energy::Finite(if l == 0 { 0.0 } else { f(l).max(0.0) })
        })?;
        Ok(spec.with_tail_slope(slope))
    }

    /// `φ(l) = Σ_{k ≤ l} β_k`; the last `β` is repeated beyond the list.
    pub fn reinforced(betas: &[f64], locality: Locality) -> Result<PhiSpec> {
        if betas.is_empty() {
            return Err(Error::InvalidParameter("beta sequence is empty".into()));
        }
        if betas.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
            return Err(Error::InvalidParameter("beta_k must be >= 0".into()));
        }
        if betas.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidParameter("beta_k must be non-increasing".into()));
        }
        let last = *betas.last().unwrap();
        let mut acc = 0.0;
        let mut vals = vec![Energy::Finite(0.0)];
        for k in 1..=DEFAULT_L_MAX as usize {
            acc += betas.get(k - 1).copied().unwrap_or(last);
            vals.push(Energy::Finite(acc));
        }
        Ok(PhiSpec::from_values("reinforced", locality, &vals, Extension::Affine)?.with_tail_slope(last))
    }
}

/// Catalog entry as it appears in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelParams {
    Free {
        #[serde(default = "site")]
        locality: Locality,
    },
    Saw {
        #[serde(default = "site")]
        locality: Locality,
    },
    DombJoyce {
        beta: f64,
        #[serde(default = "site")]
        locality: Locality,
    },
    AnnealedConstant {
        c: f64,
        #[serde(default = "site")]
        locality: Locality,
    },
    AnnealedExponential {
        rate: f64,
        #[serde(default = "site")]
        locality: Locality,
    },
    AnnealedGamma {
        shape: f64,
        rate: f64,
        #[serde(default = "site")]
        locality: Locality,
    },
    Reinforced {
        betas: Vec<f64>,
        #[serde(default = "bond")]
        locality: Locality,
    },
}

fn site() -> Locality {
    Locality::Site
}

fn bond() -> Locality {
    Locality::UnorientedBond
}

pub const CATALOG_IDS: [&str; 7] = [
    "free",
    "saw",
    "domb-joyce",
    "annealed-constant",
    "annealed-exponential",
    "annealed-gamma",
    "reinforced",
];

impl ModelParams {
    pub fn id(&self) -> &'static str {
        match self {
            ModelParams::Free { .. } => "free",
            ModelParams::Saw { .. } => "saw",
            ModelParams::DombJoyce { .. } => "domb-joyce",
            ModelParams::AnnealedConstant { .. } => "annealed-constant",
            ModelParams::AnnealedExponential { .. } => "annealed-exponential",
            ModelParams::AnnealedGamma { .. } => "annealed-gamma",
            ModelParams::Reinforced { .. } => "reinforced",
        }
    }

    /// Default parameters for a catalog id.
    pub fn default_for(id: &str) -> Option<ModelParams> {
        Some(match id {
            "free" => ModelParams::Free { locality: site() },
            "saw" => ModelParams::Saw { locality: site() },
            "domb-joyce" => ModelParams::DombJoyce {
                beta: 0.5,
                locality: site(),
            },
            "annealed-constant" => ModelParams::AnnealedConstant {
                c: 0.5,
                locality: site(),
            },
            "annealed-exponential" => ModelParams::AnnealedExponential {
                rate: 1.0,
                locality: site(),
            },
            "annealed-gamma" => ModelParams::AnnealedGamma {
                shape: 2.0,
                rate: 2.0,
                locality: site(),
            },
            "reinforced" => ModelParams::Reinforced {
                betas: vec![1.0, 0.5, 0.25, 0.125],
                locality: bond(),
            },
            _ => return None,
        })
    }

    /// Raw potential, without normalization.
    pub fn build_raw(&self) -> Result<PhiSpec> {
        match self {
            ModelParams::Free { locality } => Ok(PhiSpec::free(*locality)),
            ModelParams::Saw { locality } => Ok(PhiSpec::saw(*locality)),
            ModelParams::DombJoyce { beta, locality } => PhiSpec::domb_joyce(*beta, *locality),
            ModelParams::AnnealedConstant { c, locality } => {
                PhiSpec::annealed(&AnnealedLaw::Constant { c: *c }, *locality)
            }
            ModelParams::AnnealedExponential { rate, locality } => {
                PhiSpec::annealed(&AnnealedLaw::Exponential { rate: *rate }, *locality)
            }
            ModelParams::AnnealedGamma {
                shape,
                rate,
                locality,
            } => PhiSpec::annealed(
                &AnnealedLaw::Gamma {
                    shape: *shape,
                    rate: *rate,
                },
                *locality,
            ),
            ModelParams::Reinforced { betas, locality } => PhiSpec::reinforced(betas, *locality),
        }
    }

    /// Potential with attractive linear tails removed.
    pub fn build(&self) -> Result<PhiSpec> {
        let raw = self.build_raw()?;
        Ok(if raw.is_attractive() { raw.sl_normalized() } else { raw })
    }
}

/// Every catalog model at its default parameters, normalized.
pub fn catalog() -> Vec<(&'static str, PhiSpec)> {
    CATALOG_IDS
        .iter()
        .map(|id| {
            let spec = ModelParams::default_for(id).unwrap().build().unwrap();
            (*id, spec)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let c = PhiSpec::annealed(&AnnealedLaw::Constant { c: 0.3 }, Locality::Site).unwrap();
        for l in 0..20 {
            assert!((c.phi(l).unwrap().finite().unwrap() - 0.3 * l as f64).abs() < 1e-12);
        }
        let r = PhiSpec::reinforced(&[0.4], Locality::UnorientedBond).unwrap();
        assert!((r.phi(7).unwrap().finite().unwrap() - 2.8).abs() < 1e-12);
        let dj0 = PhiSpec::domb_joyce(0.0, Locality::Site).unwrap();
        assert!(dj0.is_zero());
    }

    #[test]
    fn density_quadrature_matches_gamma_closed_form() {
        let (k, r) = (2.0f64, 1.5f64);
        let pdf = Arc::new(move |x: f64| r * r * x * (-r * x).exp());
        let q = PhiSpec::annealed(
            &AnnealedLaw::Density { pdf, lower: 0.0 },
            Locality::Site,
        )
        .unwrap();
        let g = PhiSpec::annealed(&AnnealedLaw::Gamma { shape: k, rate: r }, Locality::Site).unwrap();
        for l in [1, 2, 5, 30, 400, 10_000] {
            let a = q.phi(l).unwrap().finite().unwrap();
            let b = g.phi(l).unwrap().finite().unwrap();
            assert!((a - b).abs() <= 1e-9 * b.max(1.0), "l={l}: {a} vs {b}");
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(PhiSpec::domb_joyce(-1.0, Locality::Site).is_err());
        assert!(PhiSpec::reinforced(&[0.1, 0.5], Locality::Site).is_err());
        assert!(PhiSpec::annealed(&AnnealedLaw::Exponential { rate: 0.0 }, Locality::Site).is_err());
        let not_normalized = Arc::new(|x: f64| 2.0 * (-x).exp());
        assert!(PhiSpec::annealed(
            &AnnealedLaw::Density {
                pdf: not_normalized,
                lower: 0.0
            },
            Locality::Site
        )
        .is_err());
    }

    #[test]
    fn annealed_models_are_attractive() {
        for law in [
            AnnealedLaw::Exponential { rate: 0.7 },
            AnnealedLaw::Gamma { shape: 3.0, rate: 2.0 },
        ] {
            let s = PhiSpec::annealed(&law, Locality::Site).unwrap();
            let c = s.classify(50).unwrap();
            assert!(c.n && c.a && !c.r, "{law:?}");
        }
    }

    #[test]
    fn catalog_round_trips_through_json() {
        for id in CATALOG_IDS {
            let p = ModelParams::default_for(id).unwrap();
            let s = serde_json::to_string(&p).unwrap();
            let back: ModelParams = serde_json::from_str(&s).unwrap();
            assert_eq!(back, p);
            assert_eq!(back.id(), id);
        }
        assert_eq!(catalog().len(), CATALOG_IDS.len());
    }
}
