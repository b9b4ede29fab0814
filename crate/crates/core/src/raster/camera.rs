use serde::{Deserialize, Serialize};

use crate::geometry::RigidTransform;
use crate::{Error, Mat3, Result, Vec3};

pub const DEFAULT_RESOLUTION: usize = 512;

/// Pinhole camera: `u = fx·X/Z + cx`, `v = fy·Y/Z + cy` on camera-space points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub world_to_camera: RigidTransform,
    pub near: f64,
    pub far: f64,
}

impl Camera {
    /// Square-pixel camera with the principal point at the image center and
    /// the given vertical field of view.
    pub fn with_fov(
        width: usize,
        height: usize,
        fov_y_deg: f64,
        world_to_camera: RigidTransform,
        near: f64,
        far: f64,
    ) -> Self {
        let f = 0.5 * height as f64 / (0.5 * fov_y_deg.to_radians()).tan();
        Camera {
            fx: f,
            fy: f,
            cx: 0.5 * width as f64,
            cy: 0.5 * height as f64,
            width,
            height,
            world_to_camera,
            near,
            far,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy, self.near, self.far].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("camera", "non-finite parameter"));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::invalid("camera", "focal lengths must be positive"));
        }
        if !(self.near > 0.0 && self.near < self.far) {
            return Err(Error::invalid("camera", format!("need 0 < near < far, got {} / {}", self.near, self.far)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("camera", "resolution must be at least 1×1"));
        }
        self.world_to_camera.validate()
    }

    /// Same pose and field of view at another resolution.
    pub fn resized(&self, width: usize, height: usize) -> Camera {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Camera {
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
            width,
            height,
            ..self.clone()
        }
    }

    pub fn to_camera(&self, world: &Vec3) -> Vec3 {
        self.world_to_camera.apply(world)
    }

    /// Pixel coordinates of a camera-space point; `None` at or behind the near plane.
    pub fn project_camera_point(&self, p: &Vec3) -> Option<[f64; 2]> {
        if p.z <= self.near {
            return None;
        }
        Some([self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy])
    }

    pub fn project(&self, world: &Vec3) -> Option<[f64; 2]> {
        self.project_camera_point(&self.to_camera(world))
    }

    /// Camera center in world coordinates.
    pub fn position(&self) -> Vec3 {
        self.world_to_camera.inverse().translation_vector()
    }

    /// World-space direction of the optical axis.
    pub fn forward(&self) -> Vec3 {
        self.world_to_camera.rotation_matrix().transpose() * Vec3::z()
    }
}

/// World-to-camera transform for a camera at `eye` looking at `target`, with
/// image-up roughly along `up`.
pub fn look_at(eye: &Vec3, target: &Vec3, up: &Vec3) -> Result<RigidTransform> {
    let forward = target - eye;
    if forward.norm() == 0.0 {
        return Err(Error::invalid("camera", "eye and target coincide"));
    }
    let z = forward.normalize();
    let x = up.cross(&z) * -1.0;
    if x.norm() < 1e-12 {
        return Err(Error::invalid("camera", "up vector is parallel to the view direction"));
    }
    let x = x.normalize();
    let y = z.cross(&x);
    let rot = Mat3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
    Ok(RigidTransform::from_rotation_matrix(&rot, -(rot * eye)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basic() -> Camera {
        Camera {
            fx: 500.0,
            fy: 500.0,
            cx: 256.0,
            cy: 256.0,
            width: 512,
            height: 512,
            world_to_camera: RigidTransform::identity(),
            near: 0.1,
            far: 10.0,
        }
    }

    #[test]
    fn pinhole_formula() {
        let cam = basic();
        assert_eq!(cam.project(&Vec3::new(0.0, 0.0, 2.0)), Some([256.0, 256.0]));
        assert_eq!(cam.project(&Vec3::new(0.1, 0.2, 1.0)), Some([306.0, 356.0]));
        assert_eq!(cam.project(&Vec3::new(0.0, 0.0, 0.05)), None);
    }

    #[test]
    fn validation() {
        assert!(basic().validate().is_ok());
        assert!(Camera { fx: 0.0, ..basic() }.validate().is_err());
        assert!(Camera { near: 2.0, far: 1.0, ..basic() }.validate().is_err());
        assert!(Camera { width: 0, ..basic() }.validate().is_err());
    }

    #[test]
    fn look_at_places_target_on_axis() {
        let eye = Vec3::new(0.3, -0.2, -1.5);
        let target = Vec3::new(0.0, 0.1, 0.2);
        let pose = look_at(&eye, &target, &Vec3::new(0.0, -1.0, 0.0)).unwrap();
        let cam = Camera { world_to_camera: pose, ..basic() };
        let [u, v] = cam.project(&target).unwrap();
        assert!((u - 256.0).abs() < 1e-9 && (v - 256.0).abs() < 1e-9);
        assert!((cam.position() - eye).norm() < 1e-12);
        assert!((pose.rotation_matrix().determinant() - 1.0).abs() < 1e-12);
        // world up (-y here) should land toward smaller image v
        let above = cam.project(&(target + Vec3::new(0.0, -0.1, 0.0))).unwrap();
        assert!(above[1] < 256.0);
    }
}
