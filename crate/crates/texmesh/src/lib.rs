//! File formats, checkpoints, feature cache and the command-line pipeline
//! around [`texmesh_core`].
//!
//! - [`obj`]: Wavefront OBJ + RGB image loading, colored mesh export.
//! - [`labels`], [`palette`]: per-face label files and class colors.
//! - [`checkpoint`]: versioned JSON checkpoints with optional resume state.
//! - [`dataset`]: tile lists and the content-addressed feature cache.
//! - [`config`], [`commands`], [`cli`]: run configuration and the commands.

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod labels;
pub mod obj;
pub mod palette;
pub mod report;

pub use error::{Error, Result};
pub use texmesh_core as core;
