//! Coarse graining: skeletons, cone points and the irreducible
//! decomposition.

mod decompose;
mod qmeasure;
mod skeleton;

pub use decompose::{
    cone_points_path, cone_points_skeleton, cone_points_trunk, irreducible_decompose, is_irreducible,
    log_piece_weight, piece_weight_identity, IrreducibleDecomposition, Irreducibility, SkeletonConePoints,
};
pub use qmeasure::{
    irreducible_profile, q_measure_mass, q_tail_stats, IrreducibleProfile, QMass, QMethod, QTailStats, QMASS_TOLERANCE,
};
pub use skeleton::{
    overshoot, skeleton_attractive, skeleton_repulsive, skeleton_stats, verify_P1_P2, Hair, Skeleton,
    SkeletonReport, SkeletonStats,
};
