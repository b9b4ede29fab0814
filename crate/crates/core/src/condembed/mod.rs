//! Toy-scale 64-bit reference implementation of the conditioning
//! embeddings: pose and skeleton guiders added to the latent, MLO and
//! geometry token embeddings, cross attention with its analytic gradient,
//! and reference-feature width concatenation.
//!
//! Image-like tensors are channel-last. Every weight is drawn from a
//! seeded generator, so all results are bit-reproducible.

mod check;
mod layers;
mod ops;
mod skeleton;
mod tensor;
mod weights;

pub use check::{dense_attention_oracle, run_embed_check, CheckRow, EmbedCheckReport};
pub use layers::{Activation, Conv2d, Dense, Mlp};
pub use ops::{
    attention_probabilities, cross_attention, cross_attention_grad, geometry_embedding, geometry_embedding_maps,
    mlo_embedding, mlo_embedding_map, mlo_feature_map, pose_guider, reference_concat, skeleton_guider,
    width_concat, GEOMETRY_POINT_COUNT, TOKEN_STRIDE,
};
pub use skeleton::{rasterize_skeleton, SKELETON_JOINTS, SKELETON_LIMBS};
pub use tensor::{FeatureMap, LatentTensor, TokenMatrix};
pub use weights::{AttentionWeights, Guider, RefFeatures, RefReducer, ToyConfig, ToyWeights};
