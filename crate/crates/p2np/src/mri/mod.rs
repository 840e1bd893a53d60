//! Acquisition geometry and the multicoil Fourier forward model.
//!
//! The measurement operator is the coil stack A = [A_1; …; A_L] with
//! A_l = M F C_l: pixelwise multiplication by the l-th sensitivity map,
//! a non-uniform DFT at the trajectory's k-space sample locations, and the
//! sampling restriction implied by the trajectory itself. The DFT is the
//! explicit O(MN) summation — exact by construction, fast enough at desk
//! scale — normalized by 1/√N in both directions so that fully sampled
//! Cartesian acquisition with a single uniform coil is unitary.

pub mod coils;
pub mod io;
pub mod model;
pub mod trajectory;

pub use coils::{synth_sensitivity_maps, CoilSet};
pub use io::{read_kspace, read_trajectory_csv, write_kspace, write_trajectory_csv, KspaceFile};
pub use model::ForwardModel;
pub use trajectory::{
    acceleration_factor_radial, acceleration_factor_spiral, make_cartesian_mask,
    make_radial_trajectory, make_spiral_trajectory, radial_density_weights, Trajectory,
    TrajectoryKind,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MriError {
    #[error("shape mismatch: expected length {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("operation requires a {expected} trajectory, got {got}")]
    UnsupportedTrajectoryKind { expected: &'static str, got: &'static str },
    #[error("coil maps violate Σ|C_l|² = 1 at pixel {pixel}: residual {residual:.3e}")]
    NormalizationViolated { pixel: usize, residual: f64 },
    #[error("coil set is empty or maps disagree in shape")]
    BadCoilSet,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a k-space file: expected magic {expected:?}, found {found:?}")]
    BadMagic { expected: &'static str, found: String },
    #[error("malformed k-space header: {0}")]
    HeaderParse(String),
    #[error("k-space payload truncated: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
}
