//! Procedural right hand with the reference skeleton layout: a rectangular
//! palm tube and five hexagonal two-segment finger tubes.

use std::f64::consts::PI;

use super::model::{HandModel, HandPart, Side};
use crate::Vec3;

/// Joint order of the reference skeleton.
pub const TOY_JOINT_NAMES: [&str; 16] = [
    "wrist", "index1", "index2", "index3", "middle1", "middle2", "middle3", "little1", "little2", "little3",
    "ring1", "ring2", "ring3", "thumb1", "thumb2", "thumb3",
];

const PARENTS: [i64; 16] = [-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 0, 10, 11, 0, 13, 14];

const PALM_HALF_WIDTH: f64 = 0.04;
const PALM_HALF_DEPTH: f64 = 0.01;
const PALM_RINGS: [f64; 4] = [0.0, 0.03, 0.06, 0.09];
/// Finger bases sit inside the palm so that no finger face is coplanar with
/// the palm cap.
const FINGER_BASE_Y: f64 = 0.085;
const SHAPE_SCALE: f64 = 0.1;
const SHAPE_COUNT: usize = 10;

/// Rest geometry of one finger chain. The first joint sits at `base`, the
/// second at `base + segments[0]·direction`, the third at the end of the
/// second segment, and the fingertip vertex `tip_cap` further out.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToyFinger {
    pub part: HandPart,
    pub first_joint: usize,
    pub base: Vec3,
    pub direction: Vec3,
    pub segments: [f64; 2],
    pub radius: f64,
    pub tip_cap: f64,
}

/// The five chains in the order thumb, index, middle, ring, little.
pub fn toy_fingers() -> [ToyFinger; 5] {
    let up = Vec3::new(0.0, 1.0, 0.0);
    let finger = |part, first_joint, x: f64, l1, l2| ToyFinger {
        part,
        first_joint,
        base: Vec3::new(x, FINGER_BASE_Y, 0.0),
        direction: up,
        segments: [l1, l2],
        radius: 0.008,
        tip_cap: 0.004,
    };
    [
        ToyFinger {
            part: HandPart::Thumb,
            first_joint: 13,
            base: Vec3::new(-0.034, 0.025, 0.0),
            direction: Vec3::new(-1.0, 1.0, 0.0).normalize(),
            segments: [0.035, 0.03],
            radius: 0.009,
            tip_cap: 0.0045,
        },
        finger(HandPart::Index, 1, -0.03, 0.04, 0.035),
        finger(HandPart::Middle, 4, -0.01, 0.045, 0.04),
        finger(HandPart::Ring, 10, 0.01, 0.042, 0.036),
        finger(HandPart::Little, 7, 0.03, 0.032, 0.028),
    ]
}

struct Builder {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    weights: Vec<[f64; 16]>,
    shape: Vec<[Vec3; SHAPE_COUNT]>,
}

fn one_hot(j: usize) -> [f64; 16] {
    let mut w = [0.0; 16];
    w[j] = 1.0;
    w
}

impl Builder {
    fn push(&mut self, p: Vec3, w: [f64; 16], shape: [Vec3; SHAPE_COUNT]) -> usize {
        self.vertices.push(p);
        self.weights.push(w);
        self.shape.push(shape);
        self.vertices.len() - 1
    }

    /// Outward-wound side wall between consecutive rings, which are listed
    /// counter-clockwise when seen from the tube's far end.
    fn stitch(&mut self, lower: &[usize], upper: &[usize]) {
        let n = lower.len();
        for k in 0..n {
            let (a0, a1, b0, b1) = (lower[k], lower[(k + 1) % n], upper[k], upper[(k + 1) % n]);
            self.faces.push([a0, a1, b1]);
            self.faces.push([a0, b1, b0]);
        }
    }

    fn cap(&mut self, ring: &[usize], center: usize, far_end: bool) {
        let n = ring.len();
        for k in 0..n {
            let (a, b) = (ring[k], ring[(k + 1) % n]);
            self.faces.push(if far_end { [a, b, center] } else { [b, a, center] });
        }
    }
}

/// Right-handed tube frame `(e1, e2, d)` with `e1 × e2 = d`.
fn frame(d: &Vec3) -> (Vec3, Vec3) {
    let e2 = d.cross(&Vec3::z()).normalize();
    (e2.cross(d), e2)
}

fn palm_shape(p: &Vec3) -> [Vec3; SHAPE_COUNT] {
    let mut s = [Vec3::zeros(); SHAPE_COUNT];
    s[0] = p * SHAPE_SCALE;
    s[2] = Vec3::new(p.x, 0.0, 0.0) * SHAPE_SCALE;
    s[3] = Vec3::new(0.0, 0.0, p.z) * SHAPE_SCALE;
    s[4] = Vec3::new(0.0, p.y.min(FINGER_BASE_Y), 0.0) * SHAPE_SCALE;
    s
}

/// Builds the toy right hand: 194 vertices, 16 joints, 10 shape directions
/// and an all-zero pose corrective basis.
pub fn make_toy_hand() -> HandModel {
    let mut b = Builder { vertices: Vec::new(), faces: Vec::new(), weights: Vec::new(), shape: Vec::new() };
    let mut regressor = vec![Vec::<(usize, f64)>::new(); 16];

    // palm: (e1, e2) = (z, x) around +y, corners and edge midpoints
    let profile: [(f64, f64); 8] =
        [(1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (-1.0, 1.0), (-1.0, 0.0), (-1.0, -1.0), (0.0, -1.0), (1.0, -1.0)];
    let mut rings = Vec::new();
    for &y in &PALM_RINGS {
        let ring: Vec<usize> = profile
            .iter()
            .map(|&(z, x)| {
                let p = Vec3::new(x * PALM_HALF_WIDTH, y, z * PALM_HALF_DEPTH);
                b.push(p, one_hot(0), palm_shape(&p))
            })
            .collect();
        rings.push(ring);
    }
    for &v in &rings[0] {
        regressor[0].push((v, 1.0 / 8.0));
    }
    for k in 0..rings.len() - 1 {
        b.stitch(&rings[k].clone(), &rings[k + 1].clone());
    }
    let bottom = Vec3::new(0.0, PALM_RINGS[0], 0.0);
    let bottom = b.push(bottom, one_hot(0), palm_shape(&bottom));
    let top = Vec3::new(0.0, PALM_RINGS[3], 0.0);
    let top = b.push(top, one_hot(0), palm_shape(&top));
    b.cap(&rings[0].clone(), bottom, false);
    b.cap(&rings[3].clone(), top, true);

    let mut fingertips = [0usize; 5];
    for (fi, f) in toy_fingers().iter().enumerate() {
        let (e1, e2) = frame(&f.direction);
        let [l1, l2] = f.segments;
        let j1 = f.first_joint;
        let j2 = j1 + 1;
        // (axial position, weights) per ring
        let mut mixed = [0.0; 16];
        mixed[0] = 0.3;
        mixed[j1] = 0.7;
        let mut knuckle = [0.0; 16];
        knuckle[j1] = 0.5;
        knuckle[j2] = 0.5;
        let ring_specs = [
            (0.0, mixed),
            (0.5 * l1, one_hot(j1)),
            (l1, knuckle),
            (l1 + 0.5 * l2, one_hot(j2)),
            (l1 + l2, one_hot(j2)),
        ];
        let length_dir = match f.part {
            HandPart::Index => Some(6),
            HandPart::Middle => Some(7),
            HandPart::Ring => Some(8),
            HandPart::Little => Some(9),
            _ => None,
        };
        let finger_shape = |p: &Vec3, s: f64, radial: &Vec3| {
            let mut sh = palm_shape(&f.base);
            sh[0] = p * SHAPE_SCALE;
            sh[2] = Vec3::new(p.x, 0.0, 0.0) * SHAPE_SCALE;
            sh[3] = Vec3::new(0.0, 0.0, p.z) * SHAPE_SCALE;
            sh[1] = f.direction * (s * SHAPE_SCALE);
            sh[5] = radial * SHAPE_SCALE;
            if let Some(k) = length_dir {
                sh[k] = f.direction * (s * SHAPE_SCALE);
            }
            sh
        };
        let mut finger_rings = Vec::new();
        for (ri, &(s, w)) in ring_specs.iter().enumerate() {
            let center = f.base + f.direction * s;
            let ring: Vec<usize> = (0..6)
                .map(|k| {
                    let phi = 2.0 * PI * k as f64 / 6.0;
                    let radial = (e1 * phi.cos() + e2 * phi.sin()) * f.radius;
                    let p = center + radial;
                    b.push(p, w, finger_shape(&p, s, &radial))
                })
                .collect();
            let joint = match ri {
                0 => Some(j1),
                2 => Some(j2),
                4 => Some(j1 + 2),
                _ => None,
            };
            if let Some(j) = joint {
                regressor[j].extend(ring.iter().map(|&v| (v, 1.0 / 6.0)));
            }
            finger_rings.push(ring);
        }
        for k in 0..finger_rings.len() - 1 {
            b.stitch(&finger_rings[k].clone(), &finger_rings[k + 1].clone());
        }
        let base = b.push(f.base, one_hot(j1), finger_shape(&f.base, 0.0, &Vec3::zeros()));
        let tip_s = l1 + l2 + f.tip_cap;
        let tip_p = f.base + f.direction * tip_s;
        let tip = b.push(tip_p, one_hot(j2), finger_shape(&tip_p, tip_s, &Vec3::zeros()));
        b.cap(&finger_rings[0].clone(), base, false);
        b.cap(&finger_rings[4].clone(), tip, true);
        fingertips[fi] = tip;
    }

    let v = b.vertices.len();
    let mut joint_regressor = vec![0.0; 16 * v];
    for (j, row) in regressor.iter().enumerate() {
        for &(vi, w) in row {
            joint_regressor[j * v + vi] += w;
        }
    }
    let mut shape_basis = vec![0.0; v * 3 * SHAPE_COUNT];
    for (vi, dirs) in b.shape.iter().enumerate() {
        for (k, d) in dirs.iter().enumerate() {
            for a in 0..3 {
                shape_basis[(vi * 3 + a) * SHAPE_COUNT + k] = d[a];
            }
        }
    }
    let mut part_of_joint = vec![HandPart::Palm; 16];
    for f in toy_fingers() {
        for j in f.first_joint..f.first_joint + 3 {
            part_of_joint[j] = f.part;
        }
    }
    let parents: Vec<Option<usize>> = PARENTS.iter().map(|&p| (p >= 0).then_some(p as usize)).collect();
    let model = HandModel {
        template: b.vertices,
        faces: b.faces,
        shape_basis,
        num_shape: SHAPE_COUNT,
        pose_basis: vec![0.0; v * 3 * 135],
        num_pose: 135,
        joint_regressor,
        order: (0..16).collect(),
        parents,
        weights: b.weights.iter().flatten().copied().collect(),
        part_of_joint,
        side: Side::Right,
        fingertips,
    };
    // the asset path is the single source of validation and ordering
    HandModel::from_asset(&model.to_asset()).expect("toy hand is valid by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::vertex_normals;
    use crate::geometry::TriMesh;
    use std::collections::BTreeSet;

    #[test]
    fn counts_match_reference_layout() {
        let toy = make_toy_hand();
        assert_eq!(toy.joint_count(), 16);
        assert_eq!(toy.vertex_count(), 194);
        assert_eq!(toy.shape_count(), 10);
        assert_eq!(toy.pose_basis_count(), 135);
    }

    #[test]
    fn labels_cover_all_parts() {
        let toy = make_toy_hand();
        let labels: BTreeSet<_> = toy.part_labels().into_iter().collect();
        assert_eq!(labels.len(), 6);
    }

    #[test]
    fn thumb_and_wrist_labels() {
        let toy = make_toy_hand();
        let labels = toy.part_labels();
        for v in 0..toy.vertex_count() {
            if toy.weight(v, 13) > 0.5 || toy.weight(v, 14) > 0.5 {
                assert_eq!(labels[v], HandPart::Thumb);
            }
            if toy.weight(v, 0) > 0.5 {
                assert_eq!(labels[v], HandPart::Palm);
            }
        }
        assert_eq!(labels[toy.fingertips()[0]], HandPart::Thumb);
    }

    #[test]
    fn regressed_joints_follow_chains() {
        let toy = make_toy_hand();
        let joints = toy.regress_joints(toy.template());
        for f in toy_fingers() {
            let j1 = joints[f.first_joint];
            let j2 = joints[f.first_joint + 1];
            assert!((j1 - f.base).norm() < 1e-12);
            assert!((j2 - (f.base + f.direction * f.segments[0])).norm() < 1e-12);
        }
        assert!(joints[0].norm() < 1e-12);
    }

    #[test]
    fn surfaces_face_outward() {
        let toy = make_toy_hand();
        let mesh = TriMesh::new(toy.template().to_vec(), toy.faces().to_vec()).unwrap();
        let normals = vertex_normals(&mesh);
        // palm side-wall vertices: normal points away from the y axis
        for v in 0..32 {
            let p = toy.template()[v];
            assert!(normals[v].dot(&Vec3::new(p.x, 0.0, p.z)) > 0.0, "palm vertex {v}");
        }
        for (fi, f) in toy_fingers().iter().enumerate() {
            let tip = toy.fingertips()[fi];
            assert!(normals[tip].dot(&f.direction) > 0.99);
        }
    }
}
