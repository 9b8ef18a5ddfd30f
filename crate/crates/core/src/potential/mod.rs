//! Interaction potentials `φ` and path weights.
//!
//! A potential assigns `φ(l)` to every site or bond visited `l` times and
//! `Φ(γ) = Σ φ(l)`. Values may be `+∞` (hard-core rejection), which is kept
//! as a separate variant and never enters floating-point arithmetic.

mod models;
mod perturbation;

pub use models::{catalog, AnnealedLaw, ModelParams, CATALOG_IDS};
pub use perturbation::PerturbationSpec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{LatticePath, Locality};

pub const DEFAULT_L_MAX: u32 = 10_000;

/// An extended non-negative real.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Energy {
    Finite(f64),
    Infinite,
}

impl Energy {
    pub fn finite(self) -> Option<f64> {
        match self {
            Energy::Finite(v) => Some(v),
            Energy::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Energy::Infinite)
    }
}

impl std::ops::Add for Energy {
    type Output = Energy;
    fn add(self, o: Energy) -> Energy {
        match (self, o) {
            (Energy::Finite(a), Energy::Finite(b)) => Energy::Finite(a + b),
            _ => Energy::Infinite,
        }
    }
}

/// Continuation of `φ` beyond the stored range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Extension {
    /// Continue with the last stored increment.
    Affine,
    Error,
}

/// Drift `h` and step penalty `λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GCParams {
    pub h: Vec<f64>,
    pub lambda: f64,
}

impl GCParams {
    pub fn new(h: Vec<f64>, lambda: f64) -> Self {
        GCParams { h, lambda }
    }

    pub fn drift(h: Vec<f64>) -> Self {
        GCParams { h, lambda: 0.0 }
    }

    pub fn zero(dim: usize) -> Self {
        GCParams {
            h: vec![0.0; dim],
            lambda: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    /// Non-negative and non-decreasing on the stored range.
    pub n: bool,
    /// `φ(l+m) ≥ φ(l) + φ(m)`.
    pub r: bool,
    /// `φ(l+m) ≤ φ(l) + φ(m)`.
    pub a: bool,
    pub sl_trend: f64,
}

/// Short serializable description of a potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiSummary {
    pub name: String,
    pub locality: Locality,
    pub head: Vec<Energy>,
    pub l_max: u32,
    pub sl_shift: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhiSpec {
    name: String,
    locality: Locality,
    /// `φ(0..)` up to `l_max` or up to the first infinite value.
    finite: Vec<f64>,
    incs: Vec<f64>,
    /// Smallest `l` with `φ(l) = ∞`.
    hard_limit: Option<u32>,
    l_max: u32,
    extension: Extension,
    tail_slope: f64,
    sl_shift: f64,
}

impl PhiSpec {
    /// Build from explicit values `φ(0), …, φ(L)`. Checks `φ(0) = 0`,
    /// non-negativity and monotonicity.
    pub fn from_values(
        name: impl Into<String>,
        locality: Locality,
        values: &[Energy],
        extension: Extension,
    ) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidParameter(
                "need at least phi(0) and phi(1)".into(),
            ));
        }
        if values[0] != Energy::Finite(0.0) {
            return Err(Error::InvalidParameter("phi(0) must be 0".into()));
        }
        let hard_limit = values.iter().position(|e| e.is_infinite());
        if let Some(h) = hard_limit {
            if values[h..].iter().any(|e| !e.is_infinite()) {
                return Err(Error::InvalidParameter(
                    "phi must stay infinite once infinite".into(),
                ));
            }
        }
        if hard_limit == Some(1) {
            return Err(Error::InvalidParameter("phi(1) must be finite".into()));
        }
        let finite: Vec<f64> = values[..hard_limit.unwrap_or(values.len())]
            .iter()
            .map(|e| e.finite().unwrap())
            .collect();
        if finite.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(
                "phi must be finite-or-infinite and non-negative".into(),
            ));
        }
        if finite.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("phi must be non-decreasing".into()));
        }
        let incs: Vec<f64> = finite.windows(2).map(|w| w[1] - w[0]).collect();
        let tail_slope = incs.last().copied().unwrap_or(0.0);
        Ok(PhiSpec {
            name: name.into(),
            locality,
            finite,
            incs,
            hard_limit: hard_limit.map(|h| h as u32),
            l_max: (values.len() - 1) as u32,
            extension,
            tail_slope,
            sl_shift: 0.0,
        })
    }

    pub fn from_fn(
        name: impl Into<String>,
        locality: Locality,
        l_max: u32,
        extension: Extension,
        f: impl Fn(u32) -> Energy,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(l_max as usize + 1);
        for l in 0..=l_max {
            let v = f(l);
            values.push(v);
            if v.is_infinite() {
                break;
            }
        }
        Self::from_values(name, locality, &values, extension)
    }

    pub(crate) fn with_tail_slope(mut self, c: f64) -> Self {
        self.tail_slope = c;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn locality(&self) -> Locality {
        self.locality
    }

    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    pub fn hard_limit(&self) -> Option<u32> {
        self.hard_limit
    }

    /// Amount `c` subtracted per unit local time by [`PhiSpec::sl_normalized`].
    pub fn sl_shift(&self) -> f64 {
        self.sl_shift
    }

    /// Declared `lim φ(l)/l`.
    pub fn tail_slope(&self) -> f64 {
        self.tail_slope
    }

    pub fn is_zero(&self) -> bool {
        self.hard_limit.is_none() && self.finite.iter().all(|&v| v == 0.0)
    }

    /// `φ(1)`, which is finite for every admissible potential.
    pub fn phi1(&self) -> f64 {
        self.finite.get(1).copied().unwrap_or(0.0)
    }

    pub fn phi(&self, l: u32) -> Result<Energy> {
        if let Some(h) = self.hard_limit {
            if l >= h {
                return Ok(Energy::Infinite);
            }
        }
        if let Some(&v) = self.finite.get(l as usize) {
            return Ok(Energy::Finite(v));
        }
        match self.extension {
            Extension::Error => Err(Error::BeyondTable {
                l,
                l_max: self.l_max,
            }),
            Extension::Affine => {
                let last = *self.finite.last().unwrap();
                let slope = self.incs.last().copied().unwrap_or(0.0);
                Ok(Energy::Finite(last + slope * (l - self.l_max) as f64))
            }
        }
    }

    /// `φ(l+1) − φ(l)`, or `None` when `φ(l+1) = ∞`. Callers must have
    /// passed [`PhiSpec::ensure_range`] for the local times they feed in.
    #[inline]
    pub fn increment(&self, l: u32) -> Option<f64> {
        if let Some(h) = self.hard_limit {
            if l + 1 >= h {
                return None;
            }
        }
        Some(match self.incs.get(l as usize) {
            Some(&d) => d,
            None => self.incs.last().copied().unwrap_or(0.0),
        })
    }

    /// Fails if local times up to `max_l` would leave the table while
    /// extension is disabled.
    pub fn ensure_range(&self, max_l: u32) -> Result<()> {
        if self.extension == Extension::Error && self.hard_limit.is_none() && max_l > self.l_max {
            return Err(Error::BeyondTable {
                l: max_l,
                l_max: self.l_max,
            });
        }
        Ok(())
    }

    /// Subtract `c·l` where `c = lim φ(l)/l`, recording the shift.
    pub fn sl_normalized(&self) -> PhiSpec {
        let c = self.tail_slope;
        if c == 0.0 || self.hard_limit.is_some() {
            return self.clone();
        }
        let finite: Vec<f64> = self
            .finite
            .iter()
            .enumerate()
            .map(|(l, v)| (v - c * l as f64).max(0.0))
            .collect();
        let incs = finite.windows(2).map(|w| w[1] - w[0]).collect();
        PhiSpec {
            name: self.name.clone(),
            finite,
            incs,
            tail_slope: 0.0,
            sl_shift: self.sl_shift + c,
            ..self.clone()
        }
    }

    pub fn classify(&self, range: u32) -> Result<ClassReport> {
        let vals: Vec<Energy> = (0..=range).map(|l| self.phi(l)).collect::<Result<_>>()?;
        let tol = |a: f64| 1e-12 * a.abs().max(1.0);
        let ge = |a: Energy, b: Energy| match (a, b) {
            (Energy::Infinite, _) => true,
            (Energy::Finite(_), Energy::Infinite) => false,
            (Energy::Finite(x), Energy::Finite(y)) => x >= y - tol(y),
        };
        let n = vals[0] == Energy::Finite(0.0)
            && vals.windows(2).all(|w| ge(w[1], w[0]))
            && vals.iter().all(|v| v.finite().map_or(true, |x| x >= 0.0));
        let mut r = true;
        let mut a = true;
        for l in 1..range {
            for m in 1..=(range - l) {
                let sum = vals[l as usize] + vals[m as usize];
                let joint = vals[(l + m) as usize];
                r &= ge(joint, sum);
                a &= ge(sum, joint);
            }
        }
        let sl_trend = match vals[range as usize] {
            Energy::Finite(v) if range > 0 => v / range as f64,
            Energy::Finite(_) => 0.0,
            Energy::Infinite => f64::INFINITY,
        };
        Ok(ClassReport { n, r, a, sl_trend })
    }

    pub fn is_repulsive(&self) -> bool {
        self.classify(self.check_range()).map_or(false, |c| c.r)
    }

    pub fn is_attractive(&self) -> bool {
        self.classify(self.check_range()).map_or(false, |c| c.a)
    }

    fn check_range(&self) -> u32 {
        self.l_max.min(64)
    }

    pub fn potential_of_path(&self, path: &LatticePath) -> Result<Energy> {
        let lt = path.local_times(self.locality);
        let max = lt.counts.values().copied().max().unwrap_or(0);
        self.ensure_range(max)?;
        let mut total = Energy::Finite(0.0);
        for &c in lt.counts.values() {
            total = total + self.phi(c)?;
            if total.is_infinite() {
                break;
            }
        }
        Ok(total)
    }

    /// `−Φ(γ) + (h, D(γ)) − λ|γ|`, or `None` when `Φ(γ) = ∞`.
    pub fn log_weight(&self, params: &GCParams, path: &LatticePath) -> Result<Option<f64>> {
        if params.h.len() != path.dim() {
            return Err(Error::InvalidParameter(format!(
                "drift has {} components, path dimension is {}",
                params.h.len(),
                path.dim()
            )));
        }
        Ok(self.potential_of_path(path)?.finite().map(|phi| {
            -phi + path.displacement().dot(&params.h) - params.lambda * path.len() as f64
        }))
    }

    pub fn summary(&self) -> PhiSummary {
        PhiSummary {
            name: self.name.clone(),
            locality: self.locality,
            head: (0..=self.l_max.min(6)).map(|l| self.phi(l).unwrap()).collect(),
            l_max: self.l_max,
            sl_shift: self.sl_shift,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::Site;

    #[test]
    fn saw_values() {
        let saw = PhiSpec::saw(Locality::Site);
        assert_eq!(saw.phi(1).unwrap(), Energy::Finite(0.0));
        assert_eq!(saw.phi(2).unwrap(), Energy::Infinite);
        assert_eq!(saw.phi(10_000_000).unwrap(), Energy::Infinite);
    }

    #[test]
    fn domb_joyce_value() {
        let dj = PhiSpec::domb_joyce(0.5, Locality::Site).unwrap();
        assert_eq!(dj.phi(3).unwrap(), Energy::Finite(1.5));
    }

    #[test]
    fn path_potentials() {
        let back = LatticePath::from_coords(1, &[vec![0], vec![1], vec![0]]).unwrap();
        let saw = PhiSpec::saw(Locality::Site);
        assert_eq!(saw.potential_of_path(&back).unwrap(), Energy::Infinite);
        let dj = PhiSpec::domb_joyce(1.0, Locality::Site).unwrap();
        assert_eq!(dj.potential_of_path(&back).unwrap(), Energy::Finite(1.0));
        let straight = LatticePath::straight(2, 0, 6).unwrap();
        assert_eq!(saw.potential_of_path(&straight).unwrap(), Energy::Finite(0.0));
    }

    #[test]
    fn log_weight_examples() {
        let saw = PhiSpec::saw(Locality::Site);
        let empty = LatticePath::point(2, Site::ORIGIN);
        let p = GCParams::new(vec![0.7, -0.2], 3.0);
        assert_eq!(saw.log_weight(&p, &empty).unwrap(), Some(0.0));
        let step = LatticePath::straight(2, 0, 1).unwrap();
        let w = saw.log_weight(&GCParams::new(vec![0.3, 0.0], 0.1), &step).unwrap();
        assert!((w.unwrap() - 0.2).abs() < 1e-15);
        let dj = PhiSpec::domb_joyce(1.0, Locality::Site).unwrap();
        let back = LatticePath::from_coords(2, &[vec![0, 0], vec![1, 0], vec![0, 0]]).unwrap();
        assert_eq!(dj.log_weight(&GCParams::zero(2), &back).unwrap(), Some(-1.0));
    }

    #[test]
    fn classification() {
        let dj = PhiSpec::domb_joyce(0.7, Locality::Site).unwrap();
        let c = dj.classify(50).unwrap();
        assert!(c.n && c.r && !c.a);

        let re = PhiSpec::reinforced(&[1.0, 0.6, 0.3, 0.1], Locality::UnorientedBond).unwrap();
        let c = re.classify(50).unwrap();
        assert!(c.n && c.a);

        let z = PhiSpec::free(Locality::Site);
        let c = z.classify(50).unwrap();
        assert!(c.r && c.a && c.sl_trend == 0.0);

        let saw = PhiSpec::saw(Locality::Site);
        let c = saw.classify(20).unwrap();
        assert!(c.n && c.r && !c.a);
    }

    #[test]
    fn rejects_invalid_tables() {
        use Energy::*;
        let bad = [Finite(0.0), Finite(2.0), Finite(1.0)];
        assert!(PhiSpec::from_values("x", Locality::Site, &bad, Extension::Affine).is_err());
        let bad = [Finite(0.1), Finite(2.0)];
        assert!(PhiSpec::from_values("x", Locality::Site, &bad, Extension::Affine).is_err());
        let bad = [Finite(0.0), Infinite, Finite(3.0)];
        assert!(PhiSpec::from_values("x", Locality::Site, &bad, Extension::Affine).is_err());
    }

    #[test]
    fn extension_rules() {
        use Energy::*;
        let vals = [Finite(0.0), Finite(1.0), Finite(1.5)];
        let aff = PhiSpec::from_values("t", Locality::Site, &vals, Extension::Affine).unwrap();
        assert_eq!(aff.phi(4).unwrap(), Finite(2.5));
        let err = PhiSpec::from_values("t", Locality::Site, &vals, Extension::Error).unwrap();
        assert_eq!(err.phi(3), Err(Error::BeyondTable { l: 3, l_max: 2 }));
    }

    #[test]
    fn normalization_subtracts_tail_slope() {
        let re = PhiSpec::reinforced(&[1.0, 0.5, 0.25], Locality::UnorientedBond).unwrap();
        let n = re.sl_normalized();
        assert_eq!(n.sl_shift(), 0.25);
        assert_eq!(n.phi(1).unwrap(), Energy::Finite(0.75));
        assert_eq!(n.phi(100).unwrap(), Energy::Finite(1.0));
        assert!(n.classify(40).unwrap().a);
    }
}
