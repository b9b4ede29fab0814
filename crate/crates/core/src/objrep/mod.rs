//! Object representation: six canonical reference views, a surface point
//! cloud, a simulated rigid motion and the per-frame object normal maps.

mod motion;
mod rep;
mod views;

pub use motion::{simulate_motion, slerp, MotionConfig, ObjectMotion, KEYFRAME_SPACING};
pub use rep::{build_object_rep, build_object_rep_with, depth_preview, render_motion_normals, ObjectRep, ObjectRepConfig};
pub use views::{canonical_cameras, render_reference_views, ViewName, DEFAULT_MARGIN, VIEW_FOV_DEG};
