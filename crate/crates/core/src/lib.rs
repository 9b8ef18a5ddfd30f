pub mod coarse;
pub mod enumerate;
pub mod error;
pub mod geometry;
pub mod logspace;
pub mod path;
pub mod phase;
pub mod potential;
pub mod sampler;
pub mod stats;
pub mod tracker;
