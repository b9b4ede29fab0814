use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::motion::{simulate_motion, MotionConfig, ObjectMotion};
use super::views::{canonical_cameras, render_reference_views, ViewName, DEFAULT_MARGIN};
use crate::geometry::{sample_surface, PointCloud, TriMesh, DEFAULT_SAMPLE_COUNT};
use crate::io::{encode_pgm16, encode_ppm, write_mlot, RgbImage, Tensor};
use crate::raster::{render_layer, Camera, RenderTarget, DEFAULT_RESOLUTION};
use crate::Result;

/// Seed offset separating the motion stream from the sampling stream.
const MOTION_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectRepConfig {
    pub view_resolution: usize,
    pub margin: f64,
    pub points: usize,
    pub motion: MotionConfig,
}

impl Default for ObjectRepConfig {
    fn default() -> Self {
        ObjectRepConfig {
            view_resolution: DEFAULT_RESOLUTION,
            margin: DEFAULT_MARGIN,
            points: DEFAULT_SAMPLE_COUNT,
            motion: MotionConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ObjectRep {
    pub view_cameras: Vec<Camera>,
    /// in [`ViewName::ALL`] order
    pub reference_views: Vec<RgbImage>,
    pub point_cloud: PointCloud,
    pub motion: ObjectMotion,
    /// one per motion frame, rendered with `scene_camera`
    pub motion_normals: Vec<RenderTarget>,
    pub scene_camera: Camera,
}

/// Frame `i` renders the mesh moved by `(Q_i, L_i)`. Normals are computed
/// once on the base mesh and rotated with it. Frames render in parallel
/// into independent buffers.
pub fn render_motion_normals(mesh: &TriMesh, motion: &ObjectMotion, camera: &Camera) -> Result<Vec<RenderTarget>> {
    motion.validate()?;
    camera.validate()?;
    let base = if mesh.vertex_normals().is_some() { mesh.clone() } else { mesh.clone().with_computed_normals() };
    (0..motion.len())
        .into_par_iter()
        .map(|i| render_layer(&[&base.transformed(&motion.pose(i))], camera))
        .collect()
}

pub fn build_object_rep(mesh: &TriMesh, frames: usize, seed: u64, scene_camera: &Camera) -> Result<ObjectRep> {
    build_object_rep_with(mesh, frames, seed, scene_camera, &ObjectRepConfig::default())
}

pub fn build_object_rep_with(
    mesh: &TriMesh,
    frames: usize,
    seed: u64,
    scene_camera: &Camera,
    config: &ObjectRepConfig,
) -> Result<ObjectRep> {
    scene_camera.validate()?;
    let view_cameras = canonical_cameras(mesh, config.view_resolution, config.margin)?;
    let shaded = if mesh.vertex_normals().is_some() { mesh.clone() } else { mesh.clone().with_computed_normals() };
    let reference_views = render_reference_views(&shaded, &view_cameras)?;
    let point_cloud = sample_surface(mesh, config.points, seed)?;
    let motion = simulate_motion(seed ^ MOTION_SEED_SALT, frames, &config.motion)?;
    let motion_normals = render_motion_normals(&shaded, &motion, scene_camera)?;
    Ok(ObjectRep { view_cameras, reference_views, point_cloud, motion, motion_normals, scene_camera: scene_camera.clone() })
}

/// Depth normalized to `[0, 1]` over `[near, far]` on the mask, 1 elsewhere.
pub fn depth_preview(target: &RenderTarget, camera: &Camera) -> Vec<f64> {
    let span = camera.far - camera.near;
    target
        .depth_map
        .iter()
        .zip(&target.mask)
        .map(|(&d, &m)| if m { ((d - camera.near) / span).clamp(0.0, 1.0) } else { 1.0 })
        .collect()
}

impl ObjectRep {
    pub fn points_tensor(&self) -> Tensor {
        let data = self.point_cloud.flat().into_iter().map(|v| v as f32).collect();
        Tensor::f32(vec![self.point_cloud.len(), 3], data).expect("shape matches payload")
    }

    /// Writes `views/<name>.ppm`, `points.mlot`, `motion.json`,
    /// `normals/frame_NNNN.ppm` and `depth/frame_NNNN.pgm`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("views"))?;
        fs::create_dir_all(dir.join("normals"))?;
        fs::create_dir_all(dir.join("depth"))?;
        for (view, img) in ViewName::ALL.iter().zip(&self.reference_views) {
            fs::write(dir.join("views").join(format!("{}.ppm", view.name())), encode_ppm(img.width, img.height, &img.data))?;
        }
        write_mlot(dir.join("points.mlot"), &self.points_tensor())?;
        fs::write(dir.join("motion.json"), self.motion.to_json())?;
        let cam = &self.scene_camera;
        for (i, t) in self.motion_normals.iter().enumerate() {
            fs::write(dir.join("normals").join(format!("frame_{i:04}.ppm")), encode_ppm(t.width, t.height, &t.normal_map))?;
            fs::write(
                dir.join("depth").join(format!("frame_{i:04}.pgm")),
                encode_pgm16(t.width, t.height, &depth_preview(t, cam)),
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes::{flat_box, icosphere};
    use crate::geometry::RigidTransform;
    use crate::Vec3;

    fn scene_camera(res: usize) -> Camera {
        Camera::with_fov(res, res, 40.0, RigidTransform::new([0.0, 0.0, 0.0, 1.0], [0.0, 0.0, 0.6]).unwrap(), 0.1, 2.0)
    }

    fn small() -> ObjectRepConfig {
        ObjectRepConfig { view_resolution: 32, ..Default::default() }
    }

    #[test]
    fn defaults_give_full_point_cloud_and_six_views() {
        let mesh = icosphere(2, 0.05);
        let rep = build_object_rep_with(&mesh, 3, 7, &scene_camera(24), &small()).unwrap();
        assert_eq!(rep.point_cloud.len(), 2048);
        assert_eq!(rep.reference_views.len(), 6);
        assert_eq!(rep.motion_normals.len(), 3);
    }

    #[test]
    fn identity_motion_matches_base_render() {
        let mesh = icosphere(2, 0.05).with_computed_normals();
        let cam = scene_camera(32);
        let frames = render_motion_normals(&mesh, &ObjectMotion::identity(3), &cam).unwrap();
        let base = render_layer(&[&mesh], &cam).unwrap();
        assert!(frames.iter().all(|f| *f == base));
    }

    #[test]
    fn rotated_flat_faces_rotate_normals() {
        // 90° about the camera axis: every covered pixel's normal is one of the
        // base normals rotated by R
        let b = flat_box(Vec3::new(0.08, 0.05, 0.03)).transformed(&RigidTransform::new([0.3f64.sin(), 0.0, 0.0, 0.3f64.cos()], [0.0; 3]).unwrap());
        let cam = scene_camera(48);
        let h = std::f64::consts::FRAC_PI_4;
        let motion = ObjectMotion { rotations: vec![[0.0, 0.0, 0.0, 1.0], [0.0, 0.0, h.sin(), h.cos()]], translations: vec![[0.0; 3]; 2] };
        let frames = render_motion_normals(&b, &motion, &cam).unwrap();
        let rot = motion.pose(1).rotation_matrix();
        let base: Vec<Vec3> = (0..frames[0].mask.len()).filter_map(|i| frames[0].decoded_normal(i)).collect();
        let mut checked = 0;
        for i in 0..frames[1].mask.len() {
            if let Some(n) = frames[1].decoded_normal(i) {
                let back = rot.transpose() * n;
                assert!(base.iter().any(|m| (m - back).norm() < 1e-9), "normal {n:?} not a rotated base normal");
                checked += 1;
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn build_is_deterministic() {
        let mesh = icosphere(1, 0.05);
        let a = build_object_rep_with(&mesh, 2, 5, &scene_camera(16), &small()).unwrap();
        let b = build_object_rep_with(&mesh, 2, 5, &scene_camera(16), &small()).unwrap();
        assert_eq!(a.point_cloud, b.point_cloud);
        assert_eq!(a.motion, b.motion);
        assert_eq!(a.reference_views, b.reference_views);
        assert_eq!(a.motion_normals, b.motion_normals);
    }
}
