use std::fmt::Write as _;

use crate::geometry::RigidTransform;
use crate::{Error, Result, Vec3};

/// Faces with area below this (square meters) are kept in storage but never
/// sampled or rasterized.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Indexed triangle mesh in meters.
#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    vertex_colors: Option<Vec<[f64; 3]>>,
    vertex_normals: Option<Vec<Vec3>>,
    degenerate: Vec<bool>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        for (i, v) in vertices.iter().enumerate() {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(Error::NonFinite(i));
            }
        }
        let count = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&index) = f.iter().find(|&&i| i >= count) {
                return Err(Error::IndexOutOfRange { face: fi, index, count });
            }
        }
        let degenerate = faces
            .iter()
            .map(|f| triangle_area(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]]) < DEGENERATE_AREA)
            .collect();
        Ok(TriMesh { vertices, faces, vertex_colors: None, vertex_normals: None, degenerate })
    }

    pub fn with_colors(mut self, colors: Vec<[f64; 3]>) -> Result<Self> {
        if colors.len() != self.vertices.len() {
            return Err(Error::shape(format!(
                "{} colors for {} vertices",
                colors.len(),
                self.vertices.len()
            )));
        }
        if colors.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::invalid("vertex color", "components must lie in [0, 1]"));
        }
        self.vertex_colors = Some(colors);
        Ok(self)
    }

    pub fn with_normals(mut self, normals: Vec<Vec3>) -> Result<Self> {
        if normals.len() != self.vertices.len() {
            return Err(Error::shape(format!(
                "{} normals for {} vertices",
                normals.len(),
                self.vertices.len()
            )));
        }
        self.vertex_normals = Some(normals);
        Ok(self)
    }

    /// Attaches area-weighted vertex normals unless normals are already present.
    pub fn with_computed_normals(self) -> Self {
        if self.vertex_normals.is_some() {
            return self;
        }
        let normals = vertex_normals(&self);
        TriMesh { vertex_normals: Some(normals), ..self }
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_colors(&self) -> Option<&[[f64; 3]]> {
        self.vertex_colors.as_deref()
    }

    pub fn vertex_normals(&self) -> Option<&[Vec3]> {
        self.vertex_normals.as_deref()
    }

    pub fn is_degenerate(&self, face: usize) -> bool {
        self.degenerate[face]
    }

    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|&&d| d).count()
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.faces[face];
        triangle_area(&self.vertices[a], &self.vertices[b], &self.vertices[c])
    }

    pub fn face_corners(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len())
            .filter(|&f| !self.degenerate[f])
            .map(|f| self.face_area(f))
            .sum()
    }

    /// Axis-aligned bounds, `None` for a mesh without vertices.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| (lo.inf(v), hi.sup(v))))
    }

    /// Mesh restricted to the given faces. Vertex arrays (including normals
    /// and colors) are shared unchanged so attributes match the parent mesh.
    pub fn submesh(&self, faces: &[usize]) -> TriMesh {
        TriMesh {
            vertices: self.vertices.clone(),
            faces: faces.iter().map(|&f| self.faces[f]).collect(),
            vertex_colors: self.vertex_colors.clone(),
            vertex_normals: self.vertex_normals.clone(),
            degenerate: faces.iter().map(|&f| self.degenerate[f]).collect(),
        }
    }

    /// Applies a rigid motion to positions and normals. Degeneracy flags are
    /// unchanged since areas are preserved.
    pub fn transformed(&self, transform: &RigidTransform) -> TriMesh {
        let rot = transform.rotation_matrix();
        let t = transform.translation_vector();
        TriMesh {
            vertices: self.vertices.iter().map(|v| rot * v + t).collect(),
            faces: self.faces.clone(),
            vertex_colors: self.vertex_colors.clone(),
            vertex_normals: self
                .vertex_normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| rot * n).collect()),
            degenerate: self.degenerate.clone(),
        }
    }
}

fn triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Parses the OBJ subset: `v x y z [r g b]` and triangular `f i j k`
/// (1-based, `i/t/n` forms accepted). `vn`, `vt`, `usemtl`, groups and
/// comments are ignored.
pub fn load_mesh(source: &[u8]) -> Result<TriMesh> {
    let text = std::str::from_utf8(source)
        .map_err(|e| Error::Parse { line: 0, msg: format!("not UTF-8: {e}") })?;
    let mut vertices = Vec::new();
    let mut colors: Vec<[f64; 3]> = Vec::new();
    let mut colored = None;
    let mut faces = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let perr = |msg: String| Error::Parse { line, msg };
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = content.split_whitespace();
        let Some(keyword) = tokens.next() else { continue };
        match keyword {
            "v" => {
                let nums = tokens
                    .map(|t| t.parse::<f64>().map_err(|e| perr(format!("bad number {t:?}: {e}"))))
                    .collect::<Result<Vec<_>>>()?;
                let has_color = match nums.len() {
                    3 => false,
                    6 => true,
                    n => return Err(perr(format!("vertex needs 3 or 6 numbers, got {n}"))),
                };
                if *colored.get_or_insert(has_color) != has_color {
                    return Err(perr("vertex colors must be given for all vertices or none".into()));
                }
                vertices.push(Vec3::new(nums[0], nums[1], nums[2]));
                if has_color {
                    colors.push([nums[3], nums[4], nums[5]]);
                }
            }
            "f" => {
                let idx = tokens
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let i: i64 = head.parse().map_err(|e| perr(format!("bad index {t:?}: {e}")))?;
                        if i < 1 {
                            return Err(perr(format!("face index {i} is not a positive 1-based index")));
                        }
                        Ok((i - 1) as usize)
                    })
                    .collect::<Result<Vec<_>>>()?;
                if idx.len() != 3 {
                    return Err(perr(format!("only triangles are supported, got {} indices", idx.len())));
                }
                faces.push([idx[0], idx[1], idx[2]]);
            }
            "vn" | "vt" | "usemtl" | "mtllib" | "o" | "g" | "s" => {}
            other => return Err(perr(format!("unsupported statement {other:?}"))),
        }
    }

    let mesh = TriMesh::new(vertices, faces)?;
    if colored == Some(true) {
        mesh.with_colors(colors)
    } else {
        Ok(mesh)
    }
}

pub fn write_obj(mesh: &TriMesh) -> String {
    let mut out = String::new();
    for (i, v) in mesh.vertices.iter().enumerate() {
        match &mesh.vertex_colors {
            Some(c) => {
                let [r, g, b] = c[i];
                writeln!(out, "v {} {} {} {r} {g} {b}", v.x, v.y, v.z).unwrap();
            }
            None => writeln!(out, "v {} {} {}", v.x, v.y, v.z).unwrap(),
        }
    }
    for f in &mesh.faces {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
    }
    out
}

/// Area-weighted average of incident face normals. Vertices without a
/// non-degenerate incident face get `(0, 0, 1)`.
pub fn vertex_normals(mesh: &TriMesh) -> Vec<Vec3> {
    let mut acc = vec![Vec3::zeros(); mesh.vertices.len()];
    for (fi, f) in mesh.faces.iter().enumerate() {
        if mesh.degenerate[fi] {
            continue;
        }
        let [a, b, c] = mesh.face_corners(fi);
        // cross product length is twice the area, which is the weight we want
        let n = (b - a).cross(&(c - a));
        for &v in f {
            acc[v] += n;
        }
    }
    acc.into_iter()
        .map(|n| {
            let len = n.norm();
            if len > 0.0 && len.is_finite() {
                n / len
            } else {
                Vec3::z()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBE: &str = "\
# unit cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
vn 0 0 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
";

    #[test]
    fn loads_unit_cube() {
        let mesh = load_mesh(CUBE.as_bytes()).unwrap();
        assert_eq!(mesh.vertices().len(), 8);
        assert_eq!(mesh.faces().len(), 12);
        assert_eq!(mesh.degenerate_count(), 0);
        assert!((mesh.total_area() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn index_equal_to_count_is_rejected() {
        let src = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n";
        match load_mesh(src.as_bytes()) {
            Err(Error::IndexOutOfRange { index: 3, count: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nan_coordinate_is_rejected() {
        let src = "v 0 0 0\nv nan 0 0\nv 0 1 0\nf 1 2 3\n";
        assert!(matches!(load_mesh(src.as_bytes()), Err(Error::NonFinite(1))));
    }

    #[test]
    fn quads_and_garbage_fail_to_parse() {
        assert!(matches!(
            load_mesh(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3 4\n"),
            Err(Error::Parse { line: 5, .. })
        ));
        assert!(matches!(load_mesh(b"v 0 0 x\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(load_mesh(b"v 0 0 0\nf 0 1 1\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn slash_indices_and_colors() {
        let src = "v 0 0 0 1 0 0\nv 1 0 0 1 0 0\nv 0 1 0 1 0 0\nvt 0 0\nf 1/1/1 2/1/1 3/1/1\n";
        let mesh = load_mesh(src.as_bytes()).unwrap();
        assert_eq!(mesh.faces(), &[[0, 1, 2]]);
        assert_eq!(mesh.vertex_colors().unwrap()[2], [1.0, 0.0, 0.0]);
        let again = load_mesh(write_obj(&mesh).as_bytes()).unwrap();
        assert_eq!(again, mesh);
    }

    #[test]
    fn degenerate_faces_are_flagged_not_dropped() {
        let src = "v 0 0 0\nv 1 0 0\nv 2 0 0\nv 0 1 0\nf 1 2 3\nf 1 2 4\n";
        let mesh = load_mesh(src.as_bytes()).unwrap();
        assert_eq!(mesh.faces().len(), 2);
        assert!(mesh.is_degenerate(0));
        assert!(!mesh.is_degenerate(1));
    }

    #[test]
    fn planar_quad_normals_point_up() {
        let src = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3\nf 1 3 4\n";
        let mesh = load_mesh(src.as_bytes()).unwrap();
        for n in vertex_normals(&mesh) {
            assert!((n - Vec3::z()).norm() < 1e-15);
        }
    }

    #[test]
    fn isolated_vertex_gets_fallback_normal() {
        let src = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 5 5 5\nf 1 3 2\n";
        let normals = vertex_normals(&load_mesh(src.as_bytes()).unwrap());
        assert!((normals[0] + Vec3::z()).norm() < 1e-15);
        assert_eq!(normals[3], Vec3::z());
    }
}
