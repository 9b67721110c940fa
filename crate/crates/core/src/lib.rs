//! Rigid 3D point-cloud registration by exhaustive rotation sampling and
//! FFT-accelerated voxel cross-correlation, with ICP refinement, the
//! RRE/RTE/recall evaluation harness, and a partial-view benchmark
//! generator.
//!
//! Pipeline: the source cloud is centered and rotated by every candidate in
//! a `rotgrid::RotationGrid`, shifted into the positive octant, voxelized
//! into a PV/NV occupancy volume, padded, and cross-correlated against the
//! voxelized target. The single best peak over all rotations fixes the
//! rotation and, through the peak offset, the translation. `refine::icp_refine`
//! then polishes the coarse estimate.

pub mod benchgen;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod refine;
pub mod rotgrid;
pub mod solver;
pub mod spatial;
pub mod voxel;
pub mod xcorr;

pub use error::{Error, Result};
pub use geometry::{
    apply_transform, center_of_mass_shift, euler_to_matrix, positive_shift, EulerAngles,
    PointCloud, RigidTransform,
};
pub use metrics::{evaluate, rre, rte, EvalReport, EvalThresholds};
pub use refine::{icp_refine, IcpConfig, IcpVariant};
pub use rotgrid::{build_grid, RotationGrid};
pub use solver::{register, register_with, RegistrationResult, SolverOptions};
pub use voxel::{voxelize, VoxelConfig, VoxelVolume};
pub use xcorr::{xcorr_direct, xcorr_fft, CorrelationEngine, FftCorrelator};
