//! File formats, a parallel batch pipeline and the `occlabel` CLI on top of
//! [`occlabel_core`].
//!
//! Inputs are per-camera depth (f32) and semantic (u8) maps in `VXT1`
//! tensor files plus one JSON calibration record per sample; outputs are
//! label grids, visibility masks and CSV reports. See [`dataset`] for the
//! directory layout.

pub mod calibration;
pub mod cli;
pub mod config;
pub mod dataset;
mod error;
pub mod pipeline;
pub mod report;
pub mod scene;
pub mod tensorio;

pub use error::{Error, Result};
