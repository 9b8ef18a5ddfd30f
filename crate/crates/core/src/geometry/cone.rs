//! Forward and backward cones `Y^>_δ(h) = {y : s_h(y) < δ ξ(y)}`.

use serde::{Deserialize, Serialize};

use super::LatticeNorm;
use crate::error::{Error, Result};
use crate::path::Site;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub h: Vec<f64>,
    pub delta: f64,
    /// 1, 2 or 3: the aperture used is `multiplier · δ`.
    pub multiplier: u8,
}

impl ConeSpec {
    /// Checks `δ ∈ (0, 1/3)` and that the widest forward cone contains a
    /// lattice unit vector.
    pub fn new(norm: &dyn LatticeNorm, h: Vec<f64>, delta: f64, multiplier: u8) -> Result<Self> {
        if h.len() != norm.dim() {
            return Err(Error::InvalidParameter("drift dimension mismatch".into()));
        }
        if !(delta > 0.0 && delta < 1.0 / 3.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 1/3), got {delta}")));
        }
        if !(1..=3).contains(&multiplier) {
            return Err(Error::InvalidParameter(format!("aperture multiplier {multiplier}")));
        }
        let cone = ConeSpec { h, delta, multiplier };
        let widest = cone.with_multiplier(3);
        if !(0..2 * norm.dim()).any(|k| widest.forward(norm, Site::unit(k))) {
            return Err(Error::InvalidParameter(
                "the forward cone at aperture 3 delta contains no lattice unit vector".into(),
            ));
        }
        Ok(cone)
    }

    pub fn with_multiplier(&self, multiplier: u8) -> ConeSpec {
        ConeSpec {
            multiplier,
            ..self.clone()
        }
    }

    pub fn aperture(&self) -> f64 {
        self.delta * self.multiplier as f64
    }

    /// `y ∈ Y^>`. The cone is open, so it never contains the origin.
    /// Memberships that the norm's error bars cannot resolve count as
    /// outside.
    #[inline]
    pub fn forward(&self, norm: &dyn LatticeNorm, y: Site) -> bool {
        if y == Site::ORIGIN {
            return false;
        }
        let xi = norm.xi(y);
        let s = xi - y.dot(&self.h);
        let margin = self.aperture() * xi - s;
        let err = norm.error_per_unit();
        if err == 0.0 {
            return margin > 0.0;
        }
        let len = y.0.iter().map(|&c| (c as f64).powi(2)).sum::<f64>().sqrt();
        margin > len * err
    }

    /// `y ∈ Y^< = −Y^>`.
    #[inline]
    pub fn backward(&self, norm: &dyn LatticeNorm, y: Site) -> bool {
        self.forward(norm, -y)
    }
}

pub fn cone_contains(norm: &dyn LatticeNorm, cone: &ConeSpec, y: Site) -> bool {
    cone.forward(norm, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{free_walk_table, WulffShape, DEFAULT_TOLERANCE};

    fn shape() -> WulffShape {
        WulffShape::from_table(free_walk_table(2, 1.8, 4).unwrap(), DEFAULT_TOLERANCE).unwrap()
    }

    #[test]
    fn basic_memberships() {
        let s = shape();
        let h = s.dual_drift(&[1.0, 0.0]).unwrap().h;
        let cone = ConeSpec::new(&s, h, 0.1, 1).unwrap();
        assert!(!cone_contains(&s, &cone, Site::ORIGIN));
        assert!(cone_contains(&s, &cone, Site::from_slice(&[3, 0])));
        assert!(!cone_contains(&s, &cone, Site::from_slice(&[-3, 0])));
        assert!(cone.backward(&s, Site::from_slice(&[-3, 0])));
    }

    #[test]
    fn monotone_in_aperture() {
        let s = shape();
        let h = s.dual_drift(&[2.0, 1.0]).unwrap().h;
        let c1 = ConeSpec::new(&s, h, 0.1, 1).unwrap();
        let c3 = c1.with_multiplier(3);
        for x in -6..=6 {
            for y in -6..=6 {
                let p = Site::from_slice(&[x, y]);
                if c1.forward(&s, p) {
                    assert!(c3.forward(&s, p));
                }
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let s = shape();
        assert!(ConeSpec::new(&s, vec![0.0, 0.0], 0.4, 1).is_err());
        assert!(ConeSpec::new(&s, vec![0.0, 0.0], 0.1, 4).is_err());
        // at h = 0 the surcharge equals ξ, so no direction is in any cone
        assert!(ConeSpec::new(&s, vec![0.0, 0.0], 0.1, 1).is_err());
    }
}
