//! Small path-dependent corrections `R(γ, g)` added to `Φ`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::path::{LatticePath, LocalKey, Locality, Site};

type Evaluator = Arc<dyn Fn(&LatticePath, &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct PerturbationSpec {
    name: String,
    epsilon: f64,
    local: bool,
    eval: Evaluator,
}

impl fmt::Debug for PerturbationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PerturbationSpec")
            .field("name", &self.name)
            .field("epsilon", &self.epsilon)
            .field("local", &self.local)
            .finish()
    }
}

impl PerturbationSpec {
    /// `epsilon` is the declared bound `|R(γ, g)| ≤ ε|γ|`; `local` asserts
    /// additivity over edge-disjoint pieces.
    pub fn new(
        name: impl Into<String>,
        epsilon: f64,
        local: bool,
        eval: impl Fn(&LatticePath, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        PerturbationSpec {
            name: name.into(),
            epsilon,
            local,
            eval: Arc::new(eval),
        }
    }

    pub fn zero() -> Self {
        Self::new("zero", 0.0, true, |_, _| 0.0)
    }

    /// `R(γ) = c|γ|`.
    pub fn linear(c: f64) -> Self {
        Self::new("linear", c.abs(), true, move |p, _| c * p.len() as f64)
    }

    /// Edge reinforcement with `β(l) = ε(1 − 2^{−l})`.
    pub fn edge_reinforcement(epsilon: f64) -> Self {
        Self::edge_reinforcement_with(epsilon, move |l| epsilon * (1.0 - 0.5f64.powi(l as i32)))
    }

    /// `R(γ, g) = −Σ_t log E exp{β(l^t(x_t, x_t + X_g)) − β(l^t(x_t, x_{t+1}))}`
    /// with `l^t` the running unoriented bond local times and `X_g` a
    /// nearest-neighbour step with law proportional to `exp((g, e))`.
    /// `beta` must take values in `[0, epsilon]`.
    pub fn edge_reinforcement_with(
        epsilon: f64,
        beta: impl Fn(u32) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::new("edge-reinforcement", epsilon, false, move |path, g| {
            let dim = path.dim();
            let weights: Vec<f64> = (0..2 * dim).map(|k| Site::unit(k).dot(g).exp()).collect();
            let norm: f64 = weights.iter().sum();
            let mut counts: HashMap<LocalKey, u32> = HashMap::new();
            let count = |c: &HashMap<LocalKey, u32>, a: Site, b: Site| {
                c.get(&LocalKey::bond(Locality::UnorientedBond, a, b))
                    .copied()
                    .unwrap_or(0)
            };
            let mut total = 0.0;
            for w in path.sites().windows(2) {
                let (x, y) = (w[0], w[1]);
                let actual = beta(count(&counts, x, y));
                let mean: f64 = (0..2 * dim)
                    .map(|k| weights[k] / norm * (beta(count(&counts, x, x + Site::unit(k))) - actual).exp())
                    .sum();
                total -= mean.ln();
                *counts
                    .entry(LocalKey::bond(Locality::UnorientedBond, x, y))
                    .or_insert(0) += 1;
            }
            total
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn is_local(&self) -> bool {
        self.local
    }

    /// `R(γ, g)`, failing if the declared bound is violated.
    pub fn evaluate(&self, path: &LatticePath, g: &[f64]) -> Result<f64> {
        let r = (self.eval)(path, g);
        let bound = self.epsilon * path.len() as f64;
        if !r.is_finite() || r.abs() > bound * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::Contract(format!(
                "perturbation '{}' gives |R| = {} > eps|path| = {}",
                self.name,
                r.abs(),
                bound
            )));
        }
        Ok(r)
    }

    /// `R(γ₁ ∪ … ∪ γ_m) − Σ R(γ_i)` for consecutive edge-disjoint pieces.
    pub fn additivity_defect(&self, pieces: &[LatticePath], g: &[f64]) -> Result<f64> {
        let mut seen = std::collections::HashSet::new();
        for p in pieces {
            for w in p.sites().windows(2) {
                if !seen.insert(LocalKey::bond(Locality::UnorientedBond, w[0], w[1])) {
                    return Err(Error::InvalidParameter("pieces share an edge".into()));
                }
            }
        }
        let whole = LatticePath::concatenate(pieces)?;
        let mut sum = 0.0;
        for p in pieces {
            sum += self.evaluate(p, g)?;
        }
        Ok(self.evaluate(&whole, g)? - sum)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_walk(dim: usize, n: usize, seed: u64) -> LatticePath {
        let mut s = seed;
        let steps: Vec<usize> = (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 33) % (2 * dim as u64)) as usize
            })
            .collect();
        LatticePath::from_steps(dim, Site::ORIGIN, &steps).unwrap()
    }

    #[test]
    fn zero_and_linear() {
        let p = random_walk(2, 30, 1);
        assert_eq!(PerturbationSpec::zero().evaluate(&p, &[0.1, 0.0]).unwrap(), 0.0);
        let lin = PerturbationSpec::linear(0.05);
        assert!((lin.evaluate(&p, &[0.0, 0.0]).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn reinforcement_respects_epsilon_bound() {
        let pert = PerturbationSpec::edge_reinforcement(0.05);
        for seed in 0..50 {
            for dim in [1, 2] {
                let p = random_walk(dim, 60, seed);
                let g = vec![0.3; dim];
                assert!(pert.evaluate(&p, &g).is_ok());
            }
        }
    }

    #[test]
    fn reinforcement_on_a_straight_line() {
        // only the bond just traversed is ever reinforced, with beta(1) = eps/2
        let eps = 0.2;
        let g = [0.4, 0.1];
        let pert = PerturbationSpec::edge_reinforcement(eps);
        let p = LatticePath::straight(2, 0, 10).unwrap();
        let z: f64 = [0.4f64, -0.4, 0.1, -0.1].iter().map(|v| v.exp()).sum();
        let p_back = (-0.4f64).exp() / z;
        let term = (1.0 - p_back + p_back * (eps / 2.0f64).exp()).ln();
        let r = pert.evaluate(&p, &g).unwrap();
        assert!((r + 9.0 * term).abs() < 1e-13);
        let one = LatticePath::straight(2, 0, 1).unwrap();
        assert_eq!(pert.evaluate(&one, &g).unwrap(), 0.0);
    }

    #[test]
    fn linear_is_additive_on_edge_disjoint_segments() {
        let a = LatticePath::straight(2, 0, 4).unwrap();
        let b = LatticePath::from_steps(2, a.end(), &[2, 2, 2]).unwrap();
        let d = PerturbationSpec::linear(0.05)
            .additivity_defect(&[a.clone(), b], &[0.0, 0.0])
            .unwrap();
        assert!(d.abs() < 1e-12);
        let back = LatticePath::from_steps(2, a.end(), &[1]).unwrap();
        assert!(PerturbationSpec::zero().additivity_defect(&[a, back], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn contract_violation_is_an_error() {
        let liar = PerturbationSpec::new("liar", 0.01, true, |p, _| 0.5 * p.len() as f64);
        let p = LatticePath::straight(1, 0, 3).unwrap();
        assert!(matches!(liar.evaluate(&p, &[0.0]), Err(Error::Contract(_))));
    }
}
