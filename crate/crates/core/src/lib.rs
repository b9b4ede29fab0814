//! Conditioning construction for hand-object manipulation video generation.
//!
//! The crate turns parametric hand poses, object meshes and cameras into the
//! multi-layer occlusion stack (one occlusion-free normal layer per object or
//! hand part, plus per-layer depth confidence), builds the object
//! representation (canonical reference views, surface points, simulated rigid
//! motion and its normal maps), implements the conditioning embeddings as a
//! small 64-bit reference, and plans sliding-window sampling over long clips.
//!
//! Modules:
//! - [`geometry`]: meshes, surface sampling, normals, Kabsch and marker refinement
//! - [`handmodel`]: skinned parametric hand and a procedurally built toy hand
//! - [`raster`]: deterministic software rasterizer and the layer stack
//! - [`objrep`]: object representation
//! - [`condembed`]: conditioning embeddings at toy scale
//! - [`pipeline`]: window planning, overlap averaging, condition packing
//! - [`io`]: MLOT tensors and PPM/PGM images

pub mod condembed;
pub mod error;
pub mod geometry;
pub mod handmodel;
pub mod io;
pub mod objrep;
pub mod pipeline;
pub mod raster;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
