//! Sliding-window planning with overlap averaging, and dataset-dependent
//! condition packing with zero-filled slots.

mod pack;
mod windows;

pub use pack::{
    pack_conditions, read_pack_dir, ConditionInputs, ConditionKind, ConditionPack, PackManifest, Slot, ZeroFlag,
};
pub use windows::{overlap_average, plan_windows, WindowMode, WindowPlan};
