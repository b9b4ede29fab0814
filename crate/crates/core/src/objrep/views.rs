use crate::geometry::TriMesh;
use crate::io::RgbImage;
use crate::raster::{look_at, render_shaded, Camera};
use crate::{Error, Result, Vec3};

pub const VIEW_FOV_DEG: f64 = 50.0;
pub const DEFAULT_MARGIN: f64 = 1.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViewName {
    Front,
    Back,
    Left,
    Right,
    Top,
    Bottom,
}

impl ViewName {
    pub const ALL: [ViewName; 6] =
        [ViewName::Front, ViewName::Back, ViewName::Left, ViewName::Right, ViewName::Top, ViewName::Bottom];

    pub fn name(self) -> &'static str {
        match self {
            ViewName::Front => "front",
            ViewName::Back => "back",
            ViewName::Left => "left",
            ViewName::Right => "right",
            ViewName::Top => "top",
            ViewName::Bottom => "bottom",
        }
    }

    /// Unit vector from the object center toward the eye, and the world
    /// direction that appears up in the image. World up is +y.
    fn placement(self) -> (Vec3, Vec3) {
        match self {
            ViewName::Front => (Vec3::z(), Vec3::y()),
            ViewName::Back => (-Vec3::z(), Vec3::y()),
            ViewName::Left => (-Vec3::x(), Vec3::y()),
            ViewName::Right => (Vec3::x(), Vec3::y()),
            ViewName::Top => (Vec3::y(), -Vec3::z()),
            ViewName::Bottom => (-Vec3::y(), Vec3::z()),
        }
    }
}

/// Bounding-box center and the radius of the smallest sphere about it that
/// holds every vertex.
fn bounding_sphere(mesh: &TriMesh) -> Result<(Vec3, f64)> {
    let (lo, hi) = mesh.bounds().ok_or_else(|| Error::invalid("mesh", "no vertices"))?;
    let center = (lo + hi) * 0.5;
    let radius = mesh.vertices().iter().map(|v| (v - center).norm()).fold(0.0, f64::max);
    Ok((center, radius))
}

/// Six square cameras in [`ViewName::ALL`] order, each looking at the
/// bounding-sphere center from `margin·r / sin(fov/2)`, which keeps the
/// whole sphere inside the frame for every margin ≥ 1.
pub fn canonical_cameras(mesh: &TriMesh, resolution: usize, margin: f64) -> Result<Vec<Camera>> {
    if mesh.faces().is_empty() {
        return Err(Error::invalid("mesh", "no faces"));
    }
    if !(1.0..=2.0).contains(&margin) {
        return Err(Error::invalid("margin", format!("{margin} is outside [1, 2]")));
    }
    if resolution == 0 {
        return Err(Error::invalid("resolution", "must be at least 1"));
    }
    let (center, radius) = bounding_sphere(mesh)?;
    let radius = radius.max(1e-9);
    let distance = margin * radius / (0.5 * VIEW_FOV_DEG.to_radians()).sin();
    let near = (distance - 1.01 * radius).max(1e-3 * distance);
    let far = distance + 1.01 * radius;
    ViewName::ALL
        .iter()
        .map(|view| {
            let (dir, up) = view.placement();
            let pose = look_at(&(center + dir * distance), &center, &up)?;
            Ok(Camera::with_fov(resolution, resolution, VIEW_FOV_DEG, pose, near, far))
        })
        .collect()
}

pub fn render_reference_views(mesh: &TriMesh, cameras: &[Camera]) -> Result<Vec<RgbImage>> {
    if cameras.len() != 6 {
        return Err(Error::shape(format!("expected 6 view cameras, got {}", cameras.len())));
    }
    cameras.iter().map(|cam| render_shaded(&[mesh], cam)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes::icosphere;

    #[test]
    fn front_and_back_are_opposite() {
        let cams = canonical_cameras(&icosphere(1, 1.0), 64, DEFAULT_MARGIN).unwrap();
        assert_eq!(cams.len(), 6);
        assert!((cams[0].forward().dot(&cams[1].forward()) + 1.0).abs() < 1e-9);
        assert!((cams[4].forward() + Vec3::y()).norm() < 1e-12);
    }

    #[test]
    fn sphere_silhouette_fits_at_unit_margin() {
        let sphere = icosphere(3, 1.0);
        for cam in canonical_cameras(&sphere, 128, 1.0).unwrap() {
            // dense ring of tangent points of the bounding circle
            let c = cam.position();
            let axis = cam.forward();
            let d = c.norm();
            for k in 0..360 {
                let a = (k as f64).to_radians();
                let e1 = axis.cross(&if axis.y.abs() < 0.9 { Vec3::y() } else { Vec3::z() }).normalize();
                let e2 = axis.cross(&e1);
                // tangent circle of a unit sphere seen from distance d
                let p = -axis / d + (e1 * a.cos() + e2 * a.sin()) * (1.0 - 1.0 / (d * d)).sqrt();
                let [u, v] = cam.project(&p).unwrap();
                assert!(u >= 0.0 && u <= 128.0 && v >= 0.0 && v <= 128.0, "({u}, {v})");
            }
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(canonical_cameras(&icosphere(0, 1.0), 64, 0.5).is_err());
        let empty = TriMesh::new(vec![], vec![]).unwrap();
        assert!(canonical_cameras(&empty, 64, 1.2).is_err());
    }

    #[test]
    fn red_mesh_renders_red_only() {
        let s = icosphere(2, 1.0);
        let n = s.vertices().len();
        let red = s.with_colors(vec![[1.0, 0.0, 0.0]; n]).unwrap();
        let cams = canonical_cameras(&red, 48, DEFAULT_MARGIN).unwrap();
        let views = render_reference_views(&red, &cams).unwrap();
        for img in &views {
            assert!(img.data.iter().all(|p| p[1] == 0.0 && p[2] == 0.0));
            assert!(img.data.iter().any(|p| p[0] > 0.5));
        }
    }
}
