//! Free energy, large deviations and the ballistic phase.

mod classify;
mod free_energy;
mod rate;
mod surface;

pub use classify::{classify_phase, Phase, PhaseEvidence, PhaseReport, SpeedPoint, SPEED_FLOOR, SPEED_SIGMAS};
pub use free_energy::{
    free_energy, free_energy_with, speed_from_free_energy, speed_from_free_energy_with, FreeEnergyEstimate, FreeEnergyGradient, FreeEnergyMethod,
};
pub use rate::{product_grid, rate_function, rate_function_with, RateFunctionTable};
pub use surface::{
    implicit_surface_F, implicit_surface_root, perturbed_correction_f, surface_root_from_profile, CorrectionMethod,
    PerturbedCorrection, SurfaceRoot, SurfaceValue,
};
