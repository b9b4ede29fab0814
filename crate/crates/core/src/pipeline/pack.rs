use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::condembed::FeatureMap;
use crate::io::{read_mlot, write_mlot, RgbImage, Tensor, TensorData};
use crate::objrep::ObjectRep;
use crate::raster::{LayerStack, LAYER_COUNT};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionKind {
    Hoi,
    Object,
    Human,
}

impl ConditionKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hoi" => Ok(ConditionKind::Hoi),
            "object" => Ok(ConditionKind::Object),
            "human" => Ok(ConditionKind::Human),
            _ => Err(Error::invalid("condition kind", format!("unknown kind {s:?}"))),
        }
    }
}

/// Stored tensor slots, in manifest order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Slot {
    /// `T × 13 × H × W × 4`
    Mlo,
    /// `6 × h × w × 3`
    ObjectViews,
    /// `P × 3`
    ObjectPoints,
    /// `T × 7`, quaternion `(a, b, c, w)` then translation
    ObjectMotion,
    /// `T × H × W × 3`
    ObjectNormals,
    /// `H × W × 3`
    BackgroundRef,
    /// `H × W × 3`
    FirstFrameObject,
    /// `T × H × W × C_s`
    Skeleton,
}

impl Slot {
    pub const ALL: [Slot; 8] = [
        Slot::Mlo,
        Slot::ObjectViews,
        Slot::ObjectPoints,
        Slot::ObjectMotion,
        Slot::ObjectNormals,
        Slot::BackgroundRef,
        Slot::FirstFrameObject,
        Slot::Skeleton,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Slot::Mlo => "mlo",
            Slot::ObjectViews => "object_views",
            Slot::ObjectPoints => "object_points",
            Slot::ObjectMotion => "object_motion",
            Slot::ObjectNormals => "object_normals",
            Slot::BackgroundRef => "background_ref",
            Slot::FirstFrameObject => "first_frame_object",
            Slot::Skeleton => "skeleton",
        }
    }
}

/// Zero-fill flags. The MLO slot has separate flags for its object layer
/// and its twelve hand layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ZeroFlag {
    MloObjectLayer,
    MloHandLayers,
    Slot(Slot),
}

impl ZeroFlag {
    pub fn all() -> Vec<ZeroFlag> {
        let mut v = vec![ZeroFlag::MloObjectLayer, ZeroFlag::MloHandLayers];
        v.extend(Slot::ALL[1..].iter().map(|&s| ZeroFlag::Slot(s)));
        v
    }

    pub fn name(self) -> &'static str {
        match self {
            ZeroFlag::MloObjectLayer => "mlo_object_layer",
            ZeroFlag::MloHandLayers => "mlo_hand_layers",
            ZeroFlag::Slot(s) => s.name(),
        }
    }
}

pub const DEFAULT_SKELETON_CHANNELS: usize = 3;
const OBJECT_SLOTS: [Slot; 4] = [Slot::ObjectViews, Slot::ObjectPoints, Slot::ObjectMotion, Slot::ObjectNormals];

/// Raw condition tensors; any slot may be absent.
#[derive(Clone, Debug, Default)]
pub struct ConditionInputs {
    pub tensors: BTreeMap<Slot, Tensor>,
    /// how the background image should be read downstream, e.g. `background`
    /// or `first_frame`
    pub background_role: Option<String>,
    /// frame count when no temporal slot is supplied
    pub frames: Option<usize>,
}

fn image_tensor(img: &RgbImage) -> Tensor {
    let data = img.data.iter().flatten().map(|&v| v as f32).collect();
    Tensor::f32(vec![img.height, img.width, 3], data).expect("shape matches payload")
}

impl ConditionInputs {
    pub fn set(&mut self, slot: Slot, tensor: Tensor) -> &mut Self {
        self.tensors.insert(slot, tensor);
        self
    }

    pub fn with_mlo(mut self, stacks: &[LayerStack]) -> Result<Self> {
        let first = stacks.first().ok_or_else(|| Error::invalid("mlo", "no frames"))?;
        let mut data = Vec::with_capacity(stacks.len() * LAYER_COUNT * first.width * first.height * 4);
        for s in stacks {
            if (s.width, s.height) != (first.width, first.height) {
                return Err(Error::shape("mlo frames differ in resolution"));
            }
            if let TensorData::F32(v) = s.to_tensor().data() {
                data.extend_from_slice(v);
            }
        }
        self.set(Slot::Mlo, Tensor::f32(vec![stacks.len(), LAYER_COUNT, first.height, first.width, 4], data)?);
        Ok(self)
    }

    pub fn with_object_rep(mut self, rep: &ObjectRep) -> Result<Self> {
        let v0 = &rep.reference_views[0];
        let mut views = Vec::new();
        for img in &rep.reference_views {
            views.extend(img.data.iter().flatten().map(|&v| v as f32));
        }
        self.set(Slot::ObjectViews, Tensor::f32(vec![rep.reference_views.len(), v0.height, v0.width, 3], views)?);
        self.set(Slot::ObjectPoints, rep.points_tensor());
        let t = rep.motion.len();
        let motion = rep
            .motion
            .rotations
            .iter()
            .zip(&rep.motion.translations)
            .flat_map(|(q, l)| q.iter().chain(l.iter()).map(|&v| v as f32).collect::<Vec<_>>())
            .collect();
        self.set(Slot::ObjectMotion, Tensor::f32(vec![t, 7], motion)?);
        let (h, w) = rep.motion_normals.first().map_or((0, 0), |n| (n.height, n.width));
        let normals = rep.motion_normals.iter().flat_map(|n| n.normal_map.iter().flatten().map(|&v| v as f32)).collect();
        self.set(Slot::ObjectNormals, Tensor::f32(vec![t, h, w, 3], normals)?);
        Ok(self)
    }

    pub fn with_background(mut self, img: &RgbImage, role: &str) -> Self {
        self.set(Slot::BackgroundRef, image_tensor(img));
        self.background_role = Some(role.to_string());
        self
    }

    pub fn with_first_frame_object(mut self, img: &RgbImage) -> Self {
        self.set(Slot::FirstFrameObject, image_tensor(img));
        self
    }

    pub fn with_skeleton(mut self, maps: &[FeatureMap]) -> Result<Self> {
        let first = maps.first().ok_or_else(|| Error::invalid("skeleton", "no frames"))?;
        if maps.iter().any(|m| (m.h, m.w, m.c) != (first.h, first.w, first.c)) {
            return Err(Error::shape("skeleton frames differ in shape"));
        }
        let data = maps.iter().flat_map(|m| m.data.iter().map(|&v| v as f32)).collect();
        self.set(Slot::Skeleton, Tensor::f32(vec![maps.len(), first.h, first.w, first.c], data)?);
        Ok(self)
    }
}

/// A fully populated slot set plus the zero-fill record.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionPack {
    pub kind: ConditionKind,
    pub tensors: BTreeMap<Slot, Tensor>,
    /// true where the slot (or MLO layer group) holds filled zeros
    pub zero_flags: BTreeMap<ZeroFlag, bool>,
    pub background_role: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackManifest {
    pub kind: ConditionKind,
    pub slots: Vec<String>,
    pub zero_flags: BTreeMap<String, bool>,
    pub shapes: BTreeMap<String, Vec<usize>>,
    pub background_role: String,
}

fn require(inputs: &ConditionInputs, slot: Slot, kind: ConditionKind) -> Result<()> {
    if inputs.tensors.contains_key(&slot) {
        Ok(())
    } else {
        Err(Error::invalid("condition pack", format!("{kind:?} pack requires the {} slot", slot.name())))
    }
}

struct Dims {
    frames: usize,
    height: usize,
    width: usize,
    views: (usize, usize, usize),
    points: usize,
    skeleton_channels: usize,
}

fn expect_rank(t: &Tensor, slot: Slot, rank: usize) -> Result<&[usize]> {
    if t.shape().len() != rank {
        return Err(Error::shape(format!("{} must have rank {rank}, got shape {:?}", slot.name(), t.shape())));
    }
    Ok(t.shape())
}

/// Collects and cross-checks frame count and resolution over all supplied
/// tensors.
fn infer_dims(inputs: &ConditionInputs) -> Result<Dims> {
    let bg = inputs.tensors.get(&Slot::BackgroundRef).ok_or_else(|| {
        Error::invalid("condition pack", "the background_ref slot is required for every kind")
    })?;
    let s = expect_rank(bg, Slot::BackgroundRef, 3)?;
    if s[2] != 3 {
        return Err(Error::shape("background_ref must have 3 channels"));
    }
    let (height, width) = (s[0], s[1]);
    let mut frames: Option<usize> = inputs.frames;
    let mut agree_t = |slot: Slot, t: usize| -> Result<()> {
        match frames {
            Some(f) if f != t => Err(Error::shape(format!("{} has {t} frames, expected {f}", slot.name()))),
            _ => {
                frames = Some(t);
                Ok(())
            }
        }
    };
    let spatial = |slot: Slot, h: usize, w: usize| -> Result<()> {
        if (h, w) != (height, width) {
            return Err(Error::shape(format!("{} is {h}×{w}, background is {height}×{width}", slot.name())));
        }
        Ok(())
    };
    let mut views = (6, height, width);
    let mut points = crate::geometry::DEFAULT_SAMPLE_COUNT;
    let mut skeleton_channels = DEFAULT_SKELETON_CHANNELS;
    for (&slot, t) in &inputs.tensors {
        match slot {
            Slot::Mlo => {
                let s = expect_rank(t, slot, 5)?;
                if s[1] != LAYER_COUNT || s[4] != 4 {
                    return Err(Error::shape(format!("mlo must be T×13×H×W×4, got {s:?}")));
                }
                spatial(slot, s[2], s[3])?;
                agree_t(slot, s[0])?;
            }
            Slot::ObjectViews => {
                let s = expect_rank(t, slot, 4)?;
                if s[0] != 6 || s[3] != 3 {
                    return Err(Error::shape(format!("object_views must be 6×h×w×3, got {s:?}")));
                }
                views = (6, s[1], s[2]);
            }
            Slot::ObjectPoints => {
                let s = expect_rank(t, slot, 2)?;
                if s[1] != 3 {
                    return Err(Error::shape("object_points must be P×3"));
                }
                points = s[0];
            }
            Slot::ObjectMotion => {
                let s = expect_rank(t, slot, 2)?;
                if s[1] != 7 {
                    return Err(Error::shape("object_motion must be T×7"));
                }
                agree_t(slot, s[0])?;
            }
            Slot::ObjectNormals => {
                let s = expect_rank(t, slot, 4)?;
                if s[3] != 3 {
                    return Err(Error::shape("object_normals must be T×H×W×3"));
                }
                spatial(slot, s[1], s[2])?;
                agree_t(slot, s[0])?;
            }
            Slot::BackgroundRef => {}
            Slot::FirstFrameObject => {
                let s = expect_rank(t, slot, 3)?;
                spatial(slot, s[0], s[1])?;
                if s[2] != 3 {
                    return Err(Error::shape("first_frame_object must have 3 channels"));
                }
            }
            Slot::Skeleton => {
                let s = expect_rank(t, slot, 4)?;
                spatial(slot, s[1], s[2])?;
                agree_t(slot, s[0])?;
                skeleton_channels = s[3];
            }
        }
    }
    Ok(Dims { frames: frames.unwrap_or(1), height, width, views, points, skeleton_channels })
}

fn zero_shape(slot: Slot, d: &Dims) -> Vec<usize> {
    match slot {
        Slot::Mlo => vec![d.frames, LAYER_COUNT, d.height, d.width, 4],
        Slot::ObjectViews => vec![d.views.0, d.views.1, d.views.2, 3],
        Slot::ObjectPoints => vec![d.points, 3],
        Slot::ObjectMotion => vec![d.frames, 7],
        Slot::ObjectNormals => vec![d.frames, d.height, d.width, 3],
        Slot::BackgroundRef | Slot::FirstFrameObject => vec![d.height, d.width, 3],
        Slot::Skeleton => vec![d.frames, d.height, d.width, d.skeleton_channels],
    }
}

/// Zeroes MLO layers `layers` of every frame in place.
fn zero_mlo_layers(t: &mut Tensor, layers: std::ops::Range<usize>) {
    let s = t.shape().to_vec();
    let per_layer = s[2] * s[3] * s[4];
    let clear = |frame: usize, layer: usize, data: &mut [f32]| {
        let start = (frame * LAYER_COUNT + layer) * per_layer;
        data[start..start + per_layer].iter_mut().for_each(|v| *v = 0.0);
    };
    if let TensorData::F32(data) = t.data_mut() {
        for f in 0..s[0] {
            for l in layers.clone() {
                clear(f, l, data);
            }
        }
    }
}

fn to_f32(t: Tensor) -> Tensor {
    match t.data() {
        TensorData::F32(_) => t,
        TensorData::F64(v) => Tensor::f32(t.shape().to_vec(), v.iter().map(|&x| x as f32).collect()).expect("same shape"),
    }
}

/// Applies the masking table:
///
/// | kind   | kept                                             | zeroed                                  |
/// |--------|--------------------------------------------------|-----------------------------------------|
/// | HOI    | everything                                       | nothing                                 |
/// | OBJECT | MLO object layer, object slots, background, first frame | MLO hand layers, skeleton        |
/// | HUMAN  | background, skeleton                             | MLO, object slots, first frame          |
///
/// Optional slots that are absent are zero-filled and flagged.
pub fn pack_conditions(kind: ConditionKind, inputs: ConditionInputs) -> Result<ConditionPack> {
    require(&inputs, Slot::BackgroundRef, kind)?;
    if kind != ConditionKind::Human {
        require(&inputs, Slot::Mlo, kind)?;
        for slot in OBJECT_SLOTS {
            require(&inputs, slot, kind)?;
        }
    }
    let dims = infer_dims(&inputs)?;
    let keep = |slot: Slot| match kind {
        ConditionKind::Hoi => true,
        ConditionKind::Object => slot != Slot::Skeleton,
        ConditionKind::Human => matches!(slot, Slot::BackgroundRef | Slot::Skeleton),
    };
    let background_role = inputs.background_role.clone().unwrap_or_else(|| "background".to_string());
    let mut provided = inputs.tensors;
    let mut tensors = BTreeMap::new();
    let mut zero_flags = BTreeMap::new();
    for slot in Slot::ALL {
        let supplied = provided.remove(&slot).map(to_f32);
        let filled = !(keep(slot) && supplied.is_some());
        let tensor = match supplied {
            Some(t) if keep(slot) => t,
            _ => Tensor::zeros_f32(zero_shape(slot, &dims)),
        };
        if slot != Slot::Mlo {
            zero_flags.insert(ZeroFlag::Slot(slot), filled);
        }
        tensors.insert(slot, tensor);
    }
    zero_flags.insert(ZeroFlag::MloObjectLayer, kind == ConditionKind::Human);
    zero_flags.insert(ZeroFlag::MloHandLayers, kind != ConditionKind::Hoi);
    if kind == ConditionKind::Object {
        if let Some(mlo) = tensors.get_mut(&Slot::Mlo) {
            zero_mlo_layers(mlo, 1..LAYER_COUNT);
        }
    }
    Ok(ConditionPack { kind, tensors, zero_flags, background_role })
}

/// Reads a pack directory back: the manifest and every slot tensor.
pub fn read_pack_dir(dir: &Path) -> Result<(PackManifest, BTreeMap<String, Tensor>)> {
    let manifest: PackManifest = serde_json::from_slice(&fs::read(dir.join("pack.json"))?)?;
    let mut tensors = BTreeMap::new();
    for name in &manifest.slots {
        tensors.insert(name.clone(), read_mlot(dir.join(format!("{name}.mlot")))?);
    }
    Ok((manifest, tensors))
}

impl ConditionPack {
    pub fn manifest(&self) -> PackManifest {
        PackManifest {
            kind: self.kind,
            slots: self.tensors.keys().map(|s| s.name().to_string()).collect(),
            zero_flags: self.zero_flags.iter().map(|(f, &z)| (f.name().to_string(), z)).collect(),
            shapes: self.tensors.iter().map(|(s, t)| (s.name().to_string(), t.shape().to_vec())).collect(),
            background_role: self.background_role.clone(),
        }
    }

    /// Writes `<slot>.mlot` for every slot and `pack.json`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (slot, t) in &self.tensors {
            write_mlot(dir.join(format!("{}.mlot", slot.name())), t)?;
        }
        fs::write(dir.join("pack.json"), serde_json::to_string_pretty(&self.manifest())?)?;
        Ok(())
    }
}
