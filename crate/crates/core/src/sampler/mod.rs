//! Monte Carlo sampling of the canonical path measure and estimators on
//! the resulting chains.

mod chain;
mod diagnostics;
mod estimators;

pub use chain::{
    acceptance_probability, chain_log_weight, mcmc_sample, Acceptance, ChainConfig, ChainStats, MoveMix, MoveStats,
    MAX_REGROWTH,
};
pub use diagnostics::{batch_means, sokal_tau, BatchMean};
pub use estimators::{
    endpoint_goodness_of_fit, estimate_cone_density, estimate_endpoint_covariance, estimate_pattern_frequency,
    estimate_speed, CovariancePoint, CovarianceTrend, DensityEstimate, GoodnessOfFit, PatternFrequency, SpeedEstimate,
};
