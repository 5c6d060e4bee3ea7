//! Core algorithms for generating and scoring 3D semantic-occupancy
//! pseudo-labels.
//!
//! The pipeline turns per-camera depth and semantic maps into a dense voxel
//! label grid:
//!
//! 1. every valid pixel is unprojected into the global frame and tagged with
//!    its semantic class ([`pointcloud::lift_camera`]);
//! 2. the per-camera clouds are concatenated and statistical outliers are
//!    dropped ([`pointcloud::merge_cameras`], [`pointcloud::remove_outliers`]);
//! 3. static points from up to 13 previous samples are added and the union is
//!    moved into the current ego frame ([`temporal::densify`]);
//! 4. the cloud is binned into a [`voxelizer::GridSpec`] with a minimum
//!    point count per voxel and a majority vote over classes
//!    ([`voxelizer::voxelize`]).
//!
//! Evaluation lives in [`metrics`] (IoU/mIoU with an optional
//! [`visibility`] mask) and [`losses`] carries a reference implementation of
//! the pseudo-label training loss with exact gradients. [`synth`] renders
//! analytic box-and-plane scenes with known ground truth.
//!
//! The crate is `no_std` and needs only `alloc`; file formats, the CLI and
//! thread pools live in the `occlabel` companion crate.
#![no_std]
#![warn(missing_docs)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod geometry;
pub mod labels;
pub mod losses;
pub mod math;
pub mod metrics;
pub mod pointcloud;
pub mod synth;
pub mod temporal;
pub mod visibility;
pub mod voxelizer;

pub use geometry::{Intrinsics, Projection, RigidTransform, Vec3};
pub use labels::{LabelSpace, EMPTY_LABEL, NUM_CLASSES};
pub use pointcloud::{CameraSample, SemanticPointCloud};
pub use voxelizer::{GridSpec, LabelGrid};

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A value violates a documented precondition or type invariant.
    #[error("invalid {what}: {reason}")]
    Invalid {
        /// Name of the offending value.
        what: &'static str,
        /// Human-readable explanation.
        reason: alloc::string::String,
    },
    /// Two inputs that must agree in shape do not.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(alloc::string::String),
    /// Unprojection was asked for a pixel outside the image.
    #[error("pixel ({u}, {v}) outside {width}x{height} image")]
    PixelOutOfBounds {
        /// Column.
        u: u32,
        /// Row.
        v: u32,
        /// Image width.
        width: u32,
        /// Image height.
        height: u32,
    },
    /// Unprojection was asked for a non-positive or non-finite depth.
    #[error("non-positive depth {0}")]
    NonPositiveDepth(f64),
    /// Loss inputs contain NaN or infinity.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<alloc::string::String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }
}

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;
