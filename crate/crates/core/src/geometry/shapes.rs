//! Procedural meshes used by toy scenes and tests.

use std::collections::HashMap;

use crate::geometry::TriMesh;
use crate::Vec3;

/// Icosahedron refined `subdivisions` times and projected to a sphere.
pub fn icosphere(subdivisions: usize, radius: f64) -> TriMesh {
    let t = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0), (1.0, t, 0.0), (-1.0, -t, 0.0), (1.0, -t, 0.0),
        (0.0, -1.0, t), (0.0, 1.0, t), (0.0, -1.0, -t), (0.0, 1.0, -t),
        (t, 0.0, -1.0), (t, 0.0, 1.0), (-t, 0.0, -1.0), (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec3>| {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let verts = verts.into_iter().map(|v| v * radius).collect();
    TriMesh::new(verts, faces).expect("icosphere is well formed")
}

/// Axis-aligned box centered at the origin. Each side has its own four
/// vertices so vertex normals are flat per side. Faces wind outward.
pub fn flat_box(half: Vec3) -> TriMesh {
    let mut verts = Vec::with_capacity(24);
    let mut faces = Vec::with_capacity(12);
    let mut normals = Vec::with_capacity(24);
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            let mut n = Vec3::zeros();
            n[axis] = sign;
            let u_axis = (axis + 1) % 3;
            let v_axis = (axis + 2) % 3;
            let base = verts.len();
            for (su, sv) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
                let mut p = Vec3::zeros();
                p[axis] = sign * half[axis];
                p[u_axis] = su * half[u_axis];
                p[v_axis] = sv * half[v_axis];
                verts.push(p);
                normals.push(n);
            }
            if sign > 0.0 {
                faces.push([base, base + 1, base + 2]);
                faces.push([base, base + 2, base + 3]);
            } else {
                faces.push([base, base + 2, base + 1]);
                faces.push([base, base + 3, base + 2]);
            }
        }
    }
    TriMesh::new(verts, faces)
        .and_then(|m| m.with_normals(normals))
        .expect("box is well formed")
}
