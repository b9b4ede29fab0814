use rayon::prelude::*;

use crate::geometry::TriMesh;
use crate::handmodel::{HandPart, PosedHand, Side};
use crate::io::Tensor;
use crate::raster::{render_layer, Camera, RenderTarget};
use crate::{Error, Result};

pub const LAYER_COUNT: usize = 13;
/// Smallest on-mask confidence, so the mask stays recoverable at `far`.
pub const CONFIDENCE_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LayerSlot {
    Object,
    Hand(Side, HandPart),
}

const fn hand_slots(side: Side) -> [LayerSlot; 6] {
    [
        LayerSlot::Hand(side, HandPart::Palm),
        LayerSlot::Hand(side, HandPart::Thumb),
        LayerSlot::Hand(side, HandPart::Index),
        LayerSlot::Hand(side, HandPart::Middle),
        LayerSlot::Hand(side, HandPart::Ring),
        LayerSlot::Hand(side, HandPart::Little),
    ]
}

pub const LAYER_ORDER: [LayerSlot; LAYER_COUNT] = {
    let l = hand_slots(Side::Left);
    let r = hand_slots(Side::Right);
    [LayerSlot::Object, l[0], l[1], l[2], l[3], l[4], l[5], r[0], r[1], r[2], r[3], r[4], r[5]]
};

impl LayerSlot {
    pub fn index(self) -> usize {
        match self {
            LayerSlot::Object => 0,
            LayerSlot::Hand(side, part) => {
                1 + part.ordinal()
                    + match side {
                        Side::Left => 0,
                        Side::Right => 6,
                    }
            }
        }
    }

    pub fn name(self) -> String {
        match self {
            LayerSlot::Object => "object".to_string(),
            LayerSlot::Hand(side, part) => format!("{}_{}", side.name(), part.name()),
        }
    }

    pub fn is_hand(self) -> bool {
        matches!(self, LayerSlot::Hand(..))
    }
}

/// Thirteen occlusion-free layers in [`LAYER_ORDER`] with one confidence map
/// per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerStack {
    pub width: usize,
    pub height: usize,
    pub layers: Vec<RenderTarget>,
    pub confidence: Vec<Vec<f64>>,
}

impl LayerStack {
    pub fn empty(width: usize, height: usize) -> Self {
        LayerStack {
            width,
            height,
            layers: vec![RenderTarget::empty(width, height); LAYER_COUNT],
            confidence: vec![vec![0.0; width * height]; LAYER_COUNT],
        }
    }

    pub fn layer(&self, slot: LayerSlot) -> &RenderTarget {
        &self.layers[slot.index()]
    }

    /// Clears one layer to the empty state: no mask, zero normals and zero
    /// confidence.
    pub fn clear_layer(&mut self, index: usize) {
        self.layers[index] = RenderTarget::empty(self.width, self.height);
        self.confidence[index].iter_mut().for_each(|c| *c = 0.0);
    }

    pub fn is_layer_zero(&self, index: usize) -> bool {
        self.layers[index].normal_map.iter().all(|n| *n == [0.0; 3]) && self.confidence[index].iter().all(|&c| c == 0.0)
    }

    /// `13 × H × W × 4` float tensor: encoded normal then confidence.
    pub fn to_tensor(&self) -> Tensor {
        let mut data = Vec::with_capacity(LAYER_COUNT * self.width * self.height * 4);
        for (layer, conf) in self.layers.iter().zip(&self.confidence) {
            for (n, &c) in layer.normal_map.iter().zip(conf) {
                data.extend([n[0] as f32, n[1] as f32, n[2] as f32, c as f32]);
            }
        }
        Tensor::f32(vec![LAYER_COUNT, self.height, self.width, 4], data).expect("shape matches payload")
    }
}

/// `1 − (d − near)/(far − near)` clamped to `[CONFIDENCE_FLOOR, 1]` on the
/// mask, 0 elsewhere.
pub fn occlusion_confidence(target: &RenderTarget, camera: &Camera) -> Vec<f64> {
    let span = camera.far - camera.near;
    target
        .depth_map
        .iter()
        .zip(&target.mask)
        .map(|(&d, &m)| if m { (1.0 - (d - camera.near) / span).clamp(CONFIDENCE_FLOOR, 1.0) } else { 0.0 })
        .collect()
}

/// Per-slot geometry; `None` for absent entities. Hand parts keep the full
/// hand's vertex normals.
pub fn layer_meshes(
    left: Option<&PosedHand>,
    right: Option<&PosedHand>,
    object: Option<&TriMesh>,
) -> Result<Vec<Option<TriMesh>>> {
    if left.is_none() && right.is_none() && object.is_none() {
        return Err(Error::invalid("scene", "no hand or object supplied"));
    }
    for (hand, side) in [(left, Side::Left), (right, Side::Right)] {
        if let Some(h) = hand {
            if h.side != side {
                return Err(Error::invalid("scene", format!("{} hand slot given a {} hand", side.name(), h.side.name())));
            }
        }
    }
    Ok(LAYER_ORDER
        .iter()
        .map(|slot| match *slot {
            LayerSlot::Object => object.map(|m| if m.vertex_normals().is_some() { m.clone() } else { m.clone().with_computed_normals() }),
            LayerSlot::Hand(Side::Left, part) => left.map(|h| h.part_mesh(part)),
            LayerSlot::Hand(Side::Right, part) => right.map(|h| h.part_mesh(part)),
        })
        .collect())
}

/// Renders every layer independently; layers are rendered in parallel but
/// each z-buffer is private, so output equals the serial order.
pub fn build_mlo(
    left: Option<&PosedHand>,
    right: Option<&PosedHand>,
    object: Option<&TriMesh>,
    camera: &Camera,
) -> Result<LayerStack> {
    camera.validate()?;
    let meshes = layer_meshes(left, right, object)?;
    let rendered: Vec<RenderTarget> = meshes
        .par_iter()
        .map(|m| match m {
            Some(mesh) => render_layer(&[mesh], camera),
            None => Ok(RenderTarget::empty(camera.width, camera.height)),
        })
        .collect::<Result<_>>()?;
    let confidence = rendered.iter().map(|t| occlusion_confidence(t, camera)).collect();
    Ok(LayerStack { width: camera.width, height: camera.height, layers: rendered, confidence })
}

/// Nearest layer per pixel; equal depths go to the lowest layer index.
pub fn composite_layers(stack: &LayerStack) -> RenderTarget {
    let mut out = RenderTarget::empty(stack.width, stack.height);
    for layer in &stack.layers {
        for i in 0..out.depth_map.len() {
            if layer.mask[i] && layer.depth_map[i] < out.depth_map[i] {
                out.depth_map[i] = layer.depth_map[i];
                out.normal_map[i] = layer.normal_map[i];
                out.mask[i] = true;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{shapes::icosphere, RigidTransform};
    use crate::handmodel::{make_toy_hand, HandPose};
    use crate::Vec3;

    fn camera() -> Camera {
        Camera::with_fov(64, 64, 50.0, RigidTransform::new([0.0, 0.0, 0.0, 1.0], [0.0, -0.06, 0.35]).unwrap(), 0.05, 2.0)
    }

    #[test]
    fn slot_indices_follow_order() {
        for (i, slot) in LAYER_ORDER.iter().enumerate() {
            assert_eq!(slot.index(), i);
        }
        assert_eq!(LAYER_ORDER[7].name(), "right_palm");
    }

    #[test]
    fn confidence_boundaries() {
        let cam = camera();
        let mut t = RenderTarget::empty(3, 1);
        t.mask = vec![true, true, true];
        t.depth_map = vec![cam.near, cam.far, 0.5 * (cam.near + cam.far)];
        let c = occlusion_confidence(&t, &cam);
        assert_eq!(c[0], 1.0);
        assert_eq!(c[1], CONFIDENCE_FLOOR);
        assert!((c[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn object_only_scene_fills_layer_zero() {
        let sphere = icosphere(2, 0.03).transformed(&RigidTransform::new([0.0, 0.0, 0.0, 1.0], [0.0, 0.06, 0.0]).unwrap());
        let stack = build_mlo(None, None, Some(&sphere), &camera()).unwrap();
        assert!(stack.layers[0].covered() > 0);
        assert!((1..LAYER_COUNT).all(|l| stack.is_layer_zero(l)));
        assert!(stack.layers[0].mask.iter().zip(&stack.confidence[0]).all(|(&m, &c)| m == (c > 0.0)));
    }

    #[test]
    fn empty_scene_is_rejected() {
        assert!(build_mlo(None, None, None, &camera()).is_err());
    }

    #[test]
    fn hand_slot_side_is_checked() {
        let toy = make_toy_hand();
        let right = toy.pose(&HandPose::zeros(&toy)).unwrap();
        assert!(build_mlo(Some(&right), None, None, &camera()).is_err());
        let stack = build_mlo(None, Some(&right), None, &camera()).unwrap();
        for l in 7..LAYER_COUNT {
            assert!(stack.layers[l].covered() > 0, "layer {l} empty");
        }
        assert!((1..7).all(|l| stack.is_layer_zero(l)));
        let _ = Vec3::zeros();
    }

    #[test]
    fn single_layer_composite_is_verbatim() {
        let sphere = icosphere(2, 0.03).transformed(&RigidTransform::new([0.0, 0.0, 0.0, 1.0], [0.0, 0.06, 0.0]).unwrap());
        let stack = build_mlo(None, None, Some(&sphere), &camera()).unwrap();
        assert_eq!(composite_layers(&stack), stack.layers[0]);
    }

    #[test]
    fn tensor_layout() {
        let stack = LayerStack::empty(4, 2);
        assert_eq!(stack.to_tensor().shape(), &[13, 2, 4, 4]);
    }
}
