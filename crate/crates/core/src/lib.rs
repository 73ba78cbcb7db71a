//! Doppler-aware odometry for FMCW scanning radars.
//!
//! The crate covers the full chain from synthetic sensor data to evaluation:
//!
//! * [`sim`] renders polar scans with the alternating-modulation Doppler
//!   range shift,
//! * [`preprocess`] converts polar scans into per-modulation Cartesian
//!   images and computes pixel masks,
//! * [`scan_match`] estimates SE(2) motion with Fourier-domain correlation,
//! * [`doppler`] recovers ego velocity from a single scan,
//! * [`fusion`] blends the forward translation of both estimators,
//! * [`eval`] integrates trajectories and computes KITTI-style errors,
//! * [`io`] and [`pipeline`] provide file formats and the odometry driver.

pub mod doppler;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod preprocess;
pub mod scan_match;
pub mod sim;

pub use error::{Error, Result};
pub use geometry::{wrap_angle, EgoVelocity, Modulation, PolarScan, RadarConfig, SE2Pose};
