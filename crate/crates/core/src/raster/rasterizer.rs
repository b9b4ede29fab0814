use crate::geometry::{vertex_normals, TriMesh};
use crate::io::RgbImage;
use crate::raster::Camera;
use crate::{Result, Vec3};

const DEFAULT_ALBEDO: [f64; 3] = [0.7, 0.7, 0.7];

/// One rendered layer. Normals are camera-space, encoded as `n·0.5 + 0.5`,
/// and zero where `mask` is false; depth is camera-space z, `∞` off-surface.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderTarget {
    pub width: usize,
    pub height: usize,
    pub normal_map: Vec<[f64; 3]>,
    pub depth_map: Vec<f64>,
    pub mask: Vec<bool>,
}

impl RenderTarget {
    pub fn empty(width: usize, height: usize) -> Self {
        let n = width * height;
        RenderTarget {
            width,
            height,
            normal_map: vec![[0.0; 3]; n],
            depth_map: vec![f64::INFINITY; n],
            mask: vec![false; n],
        }
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn covered(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Decoded unit normal at a covered pixel.
    pub fn decoded_normal(&self, i: usize) -> Option<Vec3> {
        self.mask[i].then(|| {
            let [r, g, b] = self.normal_map[i];
            Vec3::new(2.0 * r - 1.0, 2.0 * g - 1.0, 2.0 * b - 1.0)
        })
    }
}

#[derive(Clone, Copy)]
struct Vertex {
    p: Vec3,
    n: Vec3,
    albedo: [f64; 3],
}

impl Vertex {
    fn lerp(&self, other: &Vertex, t: f64) -> Vertex {
        let mix = |a: f64, b: f64| a + (b - a) * t;
        Vertex {
            p: self.p + (other.p - self.p) * t,
            n: self.n + (other.n - self.n) * t,
            albedo: [
                mix(self.albedo[0], other.albedo[0]),
                mix(self.albedo[1], other.albedo[1]),
                mix(self.albedo[2], other.albedo[2]),
            ],
        }
    }
}

struct Fragments {
    width: usize,
    height: usize,
    depth: Vec<f64>,
    normal: Vec<Vec3>,
    albedo: Vec<[f64; 3]>,
}

// Edge function evaluated with a canonical vertex order so that the two
// triangles sharing an edge see exactly negated values.
fn edge(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let raw = |a: [f64; 2], b: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    if (a[0], a[1]) <= (b[0], b[1]) {
        raw(a, b)
    } else {
        -raw(b, a)
    }
}

// For a positively oriented triangle: top edges run in +x, left edges in -y.
fn is_top_left(a: [f64; 2], b: [f64; 2]) -> bool {
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    (dy == 0.0 && dx > 0.0) || dy < 0.0
}

fn covers(w: f64, top_left: bool) -> bool {
    w > 0.0 || (w == 0.0 && top_left)
}

impl Fragments {
    fn new(width: usize, height: usize) -> Self {
        let n = width * height;
        Fragments {
            width,
            height,
            depth: vec![f64::INFINITY; n],
            normal: vec![Vec3::zeros(); n],
            albedo: vec![[0.0; 3]; n],
        }
    }

    fn draw_mesh(&mut self, mesh: &TriMesh, camera: &Camera) {
        let rot = camera.world_to_camera.rotation_matrix();
        let t = camera.world_to_camera.translation_vector();
        let computed;
        let normals = match mesh.vertex_normals() {
            Some(n) => n,
            None => {
                computed = vertex_normals(mesh);
                &computed
            }
        };
        let verts: Vec<Vertex> = mesh
            .vertices()
            .iter()
            .enumerate()
            .map(|(i, v)| Vertex {
                p: rot * v + t,
                n: rot * normals[i],
                albedo: mesh.vertex_colors().map_or(DEFAULT_ALBEDO, |c| c[i]),
            })
            .collect();

        for (fi, face) in mesh.faces().iter().enumerate() {
            if mesh.is_degenerate(fi) {
                continue;
            }
            let mut tri = face.map(|i| verts[i]);
            let geometric = (tri[1].p - tri[0].p).cross(&(tri[2].p - tri[0].p));
            // back faces are drawn too, with normals turned toward the camera
            let facing = if geometric.dot(&tri[0].p) > 0.0 { -geometric } else { geometric };
            for v in &mut tri {
                if v.n.dot(&facing) < 0.0 {
                    v.n = -v.n;
                }
            }
            let facing = facing.normalize();
            self.draw_clipped(&tri, facing, camera);
        }
    }

    fn draw_clipped(&mut self, tri: &[Vertex; 3], facing: Vec3, camera: &Camera) {
        if tri.iter().all(|v| v.p.z > camera.far) || tri.iter().all(|v| v.p.z < camera.near) {
            return;
        }
        let mut poly: Vec<Vertex> = Vec::with_capacity(4);
        for i in 0..3 {
            let a = tri[i];
            let b = tri[(i + 1) % 3];
            let a_in = a.p.z >= camera.near;
            let b_in = b.p.z >= camera.near;
            if a_in {
                poly.push(a);
            }
            if a_in != b_in {
                let s = (camera.near - a.p.z) / (b.p.z - a.p.z);
                let mut v = a.lerp(&b, s);
                v.p.z = camera.near;
                poly.push(v);
            }
        }
        for i in 1..poly.len().saturating_sub(1) {
            self.draw_triangle([poly[0], poly[i], poly[i + 1]], facing, camera);
        }
    }

    fn draw_triangle(&mut self, mut tri: [Vertex; 3], facing: Vec3, camera: &Camera) {
        let project = |v: &Vertex| [camera.fx * v.p.x / v.p.z + camera.cx, camera.fy * v.p.y / v.p.z + camera.cy];
        let mut s = [project(&tri[0]), project(&tri[1]), project(&tri[2])];
        let area = edge(s[0], s[1], s[2]);
        if area == 0.0 || !area.is_finite() {
            return;
        }
        if area < 0.0 {
            tri.swap(1, 2);
            s.swap(1, 2);
        }

        let min_x = s.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let max_x = s.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        let min_y = s.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
        let max_y = s.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
        let w = self.width as f64;
        let h = self.height as f64;
        if max_x < 0.0 || max_y < 0.0 || min_x > w || min_y > h {
            return;
        }
        let x0 = (min_x - 0.5).ceil().max(0.0) as usize;
        let y0 = (min_y - 0.5).ceil().max(0.0) as usize;
        let x1 = ((max_x - 0.5).floor().min(w - 1.0)) as isize;
        let y1 = ((max_y - 0.5).floor().min(h - 1.0)) as isize;

        let tl = [is_top_left(s[1], s[2]), is_top_left(s[2], s[0]), is_top_left(s[0], s[1])];
        let inv_z = [1.0 / tri[0].p.z, 1.0 / tri[1].p.z, 1.0 / tri[2].p.z];

        for py in y0 as isize..=y1 {
            for px in x0 as isize..=x1 {
                let p = [px as f64 + 0.5, py as f64 + 0.5];
                let w0 = edge(s[1], s[2], p);
                let w1 = edge(s[2], s[0], p);
                let w2 = edge(s[0], s[1], p);
                if !(covers(w0, tl[0]) && covers(w1, tl[1]) && covers(w2, tl[2])) {
                    continue;
                }
                let sum = w0 + w1 + w2;
                let l = [w0 / sum, w1 / sum, w2 / sum];
                let iz = l[0] * inv_z[0] + l[1] * inv_z[1] + l[2] * inv_z[2];
                let depth = 1.0 / iz;
                if !(depth >= camera.near && depth <= camera.far) {
                    continue;
                }
                let idx = py as usize * self.width + px as usize;
                if depth >= self.depth[idx] {
                    continue;
                }
                // perspective-correct attribute weights
                let pw = [l[0] * inv_z[0] / iz, l[1] * inv_z[1] / iz, l[2] * inv_z[2] / iz];
                let n = tri[0].n * pw[0] + tri[1].n * pw[1] + tri[2].n * pw[2];
                let len = n.norm();
                self.depth[idx] = depth;
                self.normal[idx] = if len > 1e-12 { n / len } else { facing };
                self.albedo[idx] = [0, 1, 2].map(|c| {
                    tri[0].albedo[c] * pw[0] + tri[1].albedo[c] * pw[1] + tri[2].albedo[c] * pw[2]
                });
            }
        }
    }
}

fn rasterize(meshes: &[&TriMesh], camera: &Camera) -> Result<Fragments> {
    camera.validate()?;
    let mut frags = Fragments::new(camera.width, camera.height);
    for mesh in meshes {
        frags.draw_mesh(mesh, camera);
    }
    Ok(frags)
}

/// Z-buffered render of the given meshes, drawn in order; on equal depth the
/// earlier triangle wins.
pub fn render_layer(meshes: &[&TriMesh], camera: &Camera) -> Result<RenderTarget> {
    let frags = rasterize(meshes, camera)?;
    let mut target = RenderTarget::empty(frags.width, frags.height);
    for (i, &d) in frags.depth.iter().enumerate() {
        if d.is_finite() {
            let n = frags.normal[i];
            target.mask[i] = true;
            target.depth_map[i] = d;
            target.normal_map[i] = [n.x * 0.5 + 0.5, n.y * 0.5 + 0.5, n.z * 0.5 + 0.5];
        }
    }
    Ok(target)
}

/// Headlight Lambert shading: `albedo · max(0, −n·view_dir)`, background black.
/// Albedo comes from vertex colors, gray 0.7 when the mesh has none.
pub fn render_shaded(meshes: &[&TriMesh], camera: &Camera) -> Result<RgbImage> {
    let frags = rasterize(meshes, camera)?;
    let mut img = RgbImage::new(frags.width, frags.height);
    for y in 0..frags.height {
        for x in 0..frags.width {
            let i = y * frags.width + x;
            let d = frags.depth[i];
            if !d.is_finite() {
                continue;
            }
            let ray = Vec3::new((x as f64 + 0.5 - camera.cx) / camera.fx, (y as f64 + 0.5 - camera.cy) / camera.fy, 1.0);
            let shade = (-frags.normal[i].dot(&ray.normalize())).max(0.0);
            img.data[i] = frags.albedo[i].map(|a| a * shade);
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RigidTransform;

    fn camera(width: usize, height: usize) -> Camera {
        Camera {
            fx: 100.0,
            fy: 100.0,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
            world_to_camera: RigidTransform::identity(),
            near: 0.1,
            far: 10.0,
        }
    }

    fn quad(z: f64, half: f64) -> TriMesh {
        // CCW seen from the camera (which looks along +z, y down) => normal -z
        TriMesh::new(
            vec![
                Vec3::new(-half, -half, z),
                Vec3::new(half, -half, z),
                Vec3::new(half, half, z),
                Vec3::new(-half, half, z),
            ],
            vec![[0, 2, 1], [0, 3, 2]],
        )
        .unwrap()
    }

    #[test]
    fn empty_scene_is_blank() {
        let t = render_layer(&[], &camera(8, 8)).unwrap();
        assert_eq!(t, RenderTarget::empty(8, 8));
    }

    #[test]
    fn facing_triangle_at_depth_two() {
        let tri = TriMesh::new(
            vec![Vec3::new(-1.0, -1.0, 2.0), Vec3::new(0.0, 1.0, 2.0), Vec3::new(1.0, -1.0, 2.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let cam = camera(33, 33);
        let t = render_layer(&[&tri], &cam).unwrap();
        // principal point 16.5 is the center of pixel 16
        let i = t.index(16, 16);
        assert!(t.mask[i]);
        assert!((t.depth_map[i] - 2.0).abs() <= 1e-6);
        let [r, g, b] = t.normal_map[i];
        assert!((r - 0.5).abs() < 1e-12 && (g - 0.5).abs() < 1e-12 && b.abs() < 1e-12);
    }

    #[test]
    fn nearer_surface_wins() {
        let near = quad(1.0, 0.05);
        let far = quad(2.0, 0.8);
        let cam = camera(32, 32);
        for order in [[&near, &far], [&far, &near]] {
            let t = render_layer(&order, &cam).unwrap();
            assert_eq!(t.depth_map[t.index(16, 16)], 1.0);
            assert!((t.depth_map[t.index(2, 16)] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shared_edges_are_watertight() {
        // a dense fan around the optical axis: every pixel inside is hit once
        let n = 37;
        let mut verts = vec![Vec3::new(0.013, -0.007, 3.0)];
        for k in 0..n {
            let a = k as f64 / n as f64 * std::f64::consts::TAU;
            verts.push(Vec3::new(2.0 * a.cos(), 2.0 * a.sin(), 3.0));
        }
        let faces = (0..n).map(|k| [0, 1 + k, 1 + (k + 1) % n]).collect::<Vec<_>>();
        let fan = TriMesh::new(verts, faces).unwrap();
        let cam = camera(41, 41);
        let t = render_layer(&[&fan], &cam).unwrap();
        assert_eq!(t.covered(), 41 * 41);
        // also count per-triangle coverage to make sure no pixel is claimed twice
        let mut total = 0;
        for f in 0..n {
            total += render_layer(&[&fan.submesh(&[f])], &cam).unwrap().covered();
        }
        assert_eq!(total, 41 * 41);
    }

    #[test]
    fn beyond_far_and_behind_near_are_clipped() {
        let cam = Camera { far: 1.5, ..camera(16, 16) };
        assert_eq!(render_layer(&[&quad(2.0, 1.0)], &cam).unwrap().covered(), 0);
        // a wall crossing the near plane still renders its visible part
        let wall = TriMesh::new(
            vec![Vec3::new(-1.0, 0.01, -1.0), Vec3::new(1.0, 0.01, -1.0), Vec3::new(0.0, 0.01, 1.4)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let t = render_layer(&[&wall], &cam).unwrap();
        assert!(t.covered() > 0);
        assert!(t.depth_map.iter().filter(|d| d.is_finite()).all(|&d| d >= cam.near && d <= cam.far));
    }

    #[test]
    fn back_faces_point_toward_camera() {
        let mut q = quad(2.0, 0.5);
        let flipped: Vec<[usize; 3]> = q.faces().iter().map(|f| [f[0], f[2], f[1]]).collect();
        q = TriMesh::new(q.vertices().to_vec(), flipped).unwrap();
        let t = render_layer(&[&q], &camera(16, 16)).unwrap();
        let n = t.decoded_normal(t.index(8, 8)).unwrap();
        assert!((n - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn shading_uses_vertex_colors() {
        let q = quad(2.0, 0.5).with_colors(vec![[1.0, 0.0, 0.0]; 4]).unwrap();
        let img = render_shaded(&[&q], &camera(16, 16)).unwrap();
        let [r, g, b] = img.get(8, 8);
        assert!(r > 0.9 && g == 0.0 && b == 0.0);
    }
}
