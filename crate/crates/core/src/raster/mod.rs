//! Deterministic software rasterizer and the multi-layer occlusion stack.
//!
//! Camera space is +z forward, +y down, +x right. Pixel `(x, y)` has its
//! center at `(x + 0.5, y + 0.5)`; coverage follows the top-left rule so
//! triangles sharing an edge never both claim a pixel.

mod camera;
mod mlo;
mod rasterizer;

pub use camera::{look_at, Camera, DEFAULT_RESOLUTION};
pub use mlo::{
    build_mlo, composite_layers, layer_meshes, occlusion_confidence, LayerSlot, LayerStack,
    CONFIDENCE_FLOOR, LAYER_COUNT, LAYER_ORDER,
};
pub use rasterizer::{render_layer, render_shaded, RenderTarget};
