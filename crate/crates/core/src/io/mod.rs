//! File formats: the MLOT tensor container and binary PPM/PGM images.

mod mlot;
mod pnm;

pub use mlot::{read_mlot, write_mlot, Tensor, TensorData, MLOT_MAGIC, MLOT_VERSION};
pub use pnm::{decode_ppm, encode_pgm16, encode_ppm, RgbImage};
