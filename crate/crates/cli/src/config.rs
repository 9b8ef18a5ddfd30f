use std::path::{Path, PathBuf};

use latwalk::geometry::DEFAULT_TOLERANCE;
use latwalk::path::MAX_DIM;
use latwalk::potential::{ModelParams, PerturbationSpec, PhiSpec};
use latwalk::sampler::MoveMix;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelParams,
    pub dim: usize,
    /// Drift; zero when omitted.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub h: Vec<f64>,
    /// Step penalty for generating functions, norms and Q-masses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Decreasing `λ` sequence for the shape-limit scan.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambdas: Vec<f64>,
    /// Path length, or maximal length for enumeration.
    pub n: usize,
    /// Length grid; `[n]` when omitted.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lengths: Vec<usize>,
    /// Enumeration length behind estimated norms and free energies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub census_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skeleton_k: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub norm: NormSource,
    /// Target site for generating functions; `e₁` when omitted.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub target: Vec<i32>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub phase: PhaseConfig,
    /// Patterns as site lists, e.g. `[[0, 0], [1, 0], [1, 1]]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub patterns: Vec<Vec<Vec<i32>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationConfig>,
}

fn default_delta() -> f64 {
    0.1
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormSource {
    /// Closed-form norm of the free walk at the configured `λ`.
    #[default]
    FreeWalk,
    /// Norm estimated from the model's own enumeration.
    Estimated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    #[serde(default = "default_sweeps")]
    pub sweeps: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "one")]
    pub thinning: usize,
    #[serde(default = "one")]
    pub chains: usize,
    #[serde(default)]
    pub mix: MoveMix,
}

fn default_sweeps() -> usize {
    2000
}

fn default_burn_in() -> usize {
    200
}

fn one() -> usize {
    1
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            sweeps: default_sweeps(),
            burn_in: default_burn_in(),
            thinning: 1,
            chains: 1,
            mix: MoveMix::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    /// Half-width of the g-grid for the rate function.
    #[serde(default = "default_g_max")]
    pub g_max: f64,
    #[serde(default = "default_g_points")]
    pub g_points: usize,
    /// Half-width and resolution of the u-grid.
    #[serde(default = "default_u_max")]
    pub u_max: f64,
    #[serde(default = "default_u_points")]
    pub u_points: usize,
    /// Finite-difference step for `∇Λ`.
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Multiples of `h` at which the speed is scanned along its ray.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ray: Vec<f64>,
}

fn default_g_max() -> f64 {
    1.0
}

fn default_g_points() -> usize {
    21
}

fn default_u_max() -> f64 {
    0.9
}

fn default_u_points() -> usize {
    19
}

fn default_step() -> f64 {
    0.02
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig {
            g_max: default_g_max(),
            g_points: default_g_points(),
            u_max: default_u_max(),
            u_points: default_u_points(),
            step: default_step(),
            tolerance: default_tolerance(),
            ray: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PerturbationConfig {
    Zero,
    Linear { c: f64 },
    EdgeReinforcement { epsilon: f64 },
}

impl PerturbationConfig {
    pub fn build(&self) -> PerturbationSpec {
        match *self {
            PerturbationConfig::Zero => PerturbationSpec::zero(),
            PerturbationConfig::Linear { c } => PerturbationSpec::linear(c),
            PerturbationConfig::EdgeReinforcement { epsilon } => PerturbationSpec::edge_reinforcement(epsilon),
        }
    }
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    /// Reads TOML, or JSON when the file ends in `.json`.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let json = path.extension().is_some_and(|e| e == "json");
        let cfg: ExperimentConfig = if json {
            let de = &mut serde_json::Deserializer::from_str(&text);
            serde_path_to_error::deserialize(de).map_err(|e| invalid(&e.path().to_string(), e.inner()))?
        } else {
            let de = toml::Deserializer::parse(&text).map_err(|e| CliError::Config(e.to_string()))?;
            serde_path_to_error::deserialize(de).map_err(|e| invalid(&e.path().to_string(), e.inner()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(1..=MAX_DIM).contains(&self.dim) {
            return Err(invalid("dim", format!("must lie in 1..={MAX_DIM}")));
        }
        if !self.h.is_empty() && self.h.len() != self.dim {
            return Err(invalid("h", format!("expected {} components", self.dim)));
        }
        if self.h.iter().any(|x| !x.is_finite()) {
            return Err(invalid("h", "must be finite"));
        }
        if self.n == 0 || self.lengths.contains(&0) {
            return Err(invalid("n", "lengths must be positive"));
        }
        if let Some(l) = self.lambda {
            if !l.is_finite() {
                return Err(invalid("lambda", "must be finite"));
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0 / 3.0) {
            return Err(invalid("delta", "must lie in (0, 1/3)"));
        }
        if let Some(k) = self.skeleton_k {
            if !(k > 0.0) {
                return Err(invalid("skeleton_k", "must be positive"));
            }
        }
        if !self.target.is_empty() && self.target.len() != self.dim {
            return Err(invalid("target", format!("expected {} coordinates", self.dim)));
        }
        let s = &self.sampler;
        if s.sweeps == 0 || s.sweeps <= s.burn_in {
            return Err(invalid("sampler.sweeps", "must exceed sampler.burn_in"));
        }
        if s.thinning == 0 {
            return Err(invalid("sampler.thinning", "must be positive"));
        }
        if s.chains == 0 {
            return Err(invalid("sampler.chains", "must be positive"));
        }
        let m = s.mix;
        if [m.local, m.regrowth, m.pivot].iter().any(|&p| !(p >= 0.0)) || m.local + m.regrowth + m.pivot <= 0.0 {
            return Err(invalid("sampler.mix", "weights must be non-negative and not all zero"));
        }
        let p = &self.phase;
        if !(p.g_max > 0.0) || p.g_points < 2 {
            return Err(invalid("phase.g_points", "need a positive g_max and at least two points"));
        }
        if !(p.u_max > 0.0) || p.u_points < 1 {
            return Err(invalid("phase.u_points", "need a positive u_max and at least one point"));
        }
        if !(p.step > 0.0) {
            return Err(invalid("phase.step", "must be positive"));
        }
        if !(p.tolerance > 0.0) {
            return Err(invalid("phase.tolerance", "must be positive"));
        }
        for (i, pat) in self.patterns.iter().enumerate() {
            if pat.iter().any(|s| s.len() != self.dim) {
                return Err(invalid(&format!("patterns[{i}]"), format!("sites need {} coordinates", self.dim)));
            }
        }
        self.spec().map_err(|e| invalid("model", e))?;
        Ok(())
    }

    pub fn spec(&self) -> latwalk::error::Result<PhiSpec> {
        self.model.build()
    }

    pub fn drift(&self) -> Vec<f64> {
        if self.h.is_empty() {
            vec![0.0; self.dim]
        } else {
            self.h.clone()
        }
    }

    pub fn lengths(&self) -> Vec<usize> {
        if self.lengths.is_empty() {
            vec![self.n]
        } else {
            self.lengths.clone()
        }
    }

    pub fn target(&self) -> Vec<i32> {
        if self.target.is_empty() {
            let mut t = vec![0; self.dim];
            t[0] = 1;
            t
        } else {
            self.target.clone()
        }
    }

    pub fn require_lambda(&self) -> Result<f64, CliError> {
        self.lambda.ok_or_else(|| invalid("lambda", "required by this subcommand"))
    }

    /// Canonical JSON used for hashing; the output directory is left out.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        serde_json::to_string(&c).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
dim = 2
h = [0.5, 0.0]
lambda = 1.6
n = 6
lengths = [4, 6]
seed = 9

[model]
id = "domb-joyce"
beta = 0.7

[sampler]
sweeps = 100
burn_in = 10

[perturbation]
kind = "linear"
c = 0.05
"#;

    fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config(e.to_string()))?;
        let cfg: ExperimentConfig =
            serde_path_to_error::deserialize(de).map_err(|e| invalid(&e.path().to_string(), e.inner()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn round_trips_through_toml_and_json() {
        let cfg = parse(SAMPLE).unwrap();
        let back: ExperimentConfig = toml::from_str(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        let back: ExperimentConfig = serde_json::from_str(&cfg.canonical()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn diagnostics_name_the_field() {
        let bad = SAMPLE.replace("burn_in = 10", "burn_in = 10\nsweps = 3");
        let e = parse(&bad).unwrap_err().to_string();
        assert!(e.contains("sampler") && e.contains("sweps"), "{e}");
        let bad = SAMPLE.replace("beta = 0.7", "beta = \"x\"");
        assert!(parse(&bad).unwrap_err().to_string().contains("model"));
        let bad = SAMPLE.replace("h = [0.5, 0.0]", "h = [0.5]");
        assert!(parse(&bad).unwrap_err().to_string().starts_with("config error: h:"));
        let bad = SAMPLE.replace("id = \"domb-joyce\"", "id = \"nope\"");
        assert!(parse(&bad).is_err());
    }
}
