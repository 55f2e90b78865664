//! Texture-aware transformer for per-face semantic segmentation of textured,
//! possibly non-manifold triangle meshes.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation over in-memory meshes and texture images; file formats,
//! checkpoints and the command-line pipeline live in the `texmesh` crate.
//!
//! Pipeline, per mesh tile:
//!
//! 1. [`geometry`]: normalize coordinates, compute a 16-component descriptor per face.
//! 2. [`texture`]: rasterize each face's texture-space triangle into a fixed-length pixel patch.
//! 3. [`cluster`]: K-means over vertices, majority face assignment, padded cluster layout.
//! 4. [`model`]: geometry/texture branches, fusion MLP, two-stage transformer blocks, softmax head.
//! 5. [`train`] and [`metrics`]: masked cross-entropy training and F1/OA evaluation.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cluster;
pub mod error;
pub mod geometry;
pub mod mesh;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod tensor;
pub mod texture;
pub mod train;

pub use error::{Error, Result};
pub use mesh::{Mesh, TextureImage};
pub use tensor::Tensor;
