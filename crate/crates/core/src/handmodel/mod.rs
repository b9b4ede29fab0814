//! Skinned parametric hand: asset loading, linear blend skinning, part
//! labels and keypoint projection.

mod model;
mod posed;
mod toy;

pub use model::{load_hand_model, load_hand_model_as, HandAsset, HandModel, HandPart, HandPose, Side};
pub use posed::{pose_hand, project_joints, Keypoint, PosedHand, KEYPOINT_COUNT};
pub use toy::{make_toy_hand, toy_fingers, ToyFinger, TOY_JOINT_NAMES};
