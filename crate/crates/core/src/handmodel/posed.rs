use nalgebra::Rotation3;
use serde::{Deserialize, Serialize};

use super::model::{HandModel, HandPart, HandPose, Side};
use crate::geometry::TriMesh;
use crate::raster::Camera;
use crate::{Error, Mat3, Result, Vec3};

/// 16 skeletal joints followed by the 5 fingertips.
pub const KEYPOINT_COUNT: usize = 21;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub u: f64,
    pub v: f64,
    pub valid: bool,
}

/// A hand after skinning, with per-vertex and per-face part labels.
#[derive(Clone, Debug)]
pub struct PosedHand {
    pub side: Side,
    /// full mesh; normals are computed over all faces so part meshes keep
    /// the normals they would have in a single-pass render
    pub mesh: TriMesh,
    pub vertex_labels: Vec<HandPart>,
    pub face_labels: Vec<HandPart>,
    pub joints: Vec<Vec3>,
    pub fingertips: [Vec3; 5],
}

impl PosedHand {
    pub fn part_faces(&self, part: HandPart) -> Vec<usize> {
        (0..self.face_labels.len()).filter(|&f| self.face_labels[f] == part).collect()
    }

    pub fn part_mesh(&self, part: HandPart) -> TriMesh {
        self.mesh.submesh(&self.part_faces(part))
    }

    /// Joints then fingertips, the layout [`project_joints`] expects.
    pub fn keypoints_3d(&self) -> Vec<Vec3> {
        self.joints.iter().chain(&self.fingertips).copied().collect()
    }
}

/// Majority label of the three corners; three distinct labels go to PALM.
pub(crate) fn face_label(labels: [HandPart; 3]) -> HandPart {
    let [a, b, c] = labels;
    if a == b || a == c {
        a
    } else if b == c {
        b
    } else {
        HandPart::Palm
    }
}

fn rodrigues(axis_angle: &Vec3) -> Mat3 {
    Rotation3::from_scaled_axis(*axis_angle).into_inner()
}

/// Linear blend skinning. Joints are regressed from the shaped template,
/// the pose corrective uses `vec(R_j − I)` of every non-root joint in index
/// order, and the root translation is added last.
pub fn pose_hand(model: &HandModel, pose: &HandPose) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    pose.validate(model)?;
    let j_count = model.joint_count();
    let shaped = model.shaped_template(&pose.beta);
    let rest_joints = model.regress_joints(&shaped);
    let local: Vec<Mat3> = (0..j_count).map(|j| rodrigues(&pose.joint_rotation(j))).collect();

    let mut posed_template = shaped;
    let bp = model.num_pose;
    if bp > 0 {
        let features: Vec<f64> = (0..j_count)
            .filter(|&j| model.parents[j].is_some())
            .flat_map(|j| {
                let d = local[j] - Mat3::identity();
                (0..9).map(move |e| d[(e / 3, e % 3)])
            })
            .collect();
        debug_assert_eq!(features.len(), bp);
        for (v, p) in posed_template.iter_mut().enumerate() {
            for a in 0..3 {
                let row = &model.pose_basis[(v * 3 + a) * bp..(v * 3 + a + 1) * bp];
                p[a] += row.iter().zip(&features).map(|(b, f)| b * f).sum::<f64>();
            }
        }
    }

    let mut world_rot = vec![Mat3::identity(); j_count];
    let mut world_pos = vec![Vec3::zeros(); j_count];
    for &j in &model.order {
        match model.parents[j] {
            None => {
                world_rot[j] = local[j];
                world_pos[j] = rest_joints[j];
            }
            Some(p) => {
                world_rot[j] = world_rot[p] * local[j];
                world_pos[j] = world_rot[p] * (rest_joints[j] - rest_joints[p]) + world_pos[p];
            }
        }
    }
    let translation = Vec3::from(pose.root_translation);
    // skinning transform of joint j maps a rest point x to R_j·(x − J_j) + G_j
    let offsets: Vec<Vec3> = (0..j_count).map(|j| world_pos[j] - world_rot[j] * rest_joints[j]).collect();

    let vertices = posed_template
        .iter()
        .enumerate()
        .map(|(v, x)| {
            let row = &model.weights[v * j_count..(v + 1) * j_count];
            let mut rot = Mat3::zeros();
            let mut off = Vec3::zeros();
            for (j, &w) in row.iter().enumerate() {
                if w != 0.0 {
                    rot += world_rot[j] * w;
                    off += offsets[j] * w;
                }
            }
            rot * x + off + translation
        })
        .collect();
    let joints = world_pos.into_iter().map(|p| p + translation).collect();
    Ok((vertices, joints))
}

impl HandModel {
    /// Poses the model and packages the mesh with its part labels.
    pub fn pose(&self, pose: &HandPose) -> Result<PosedHand> {
        let (vertices, joints) = pose_hand(self, pose)?;
        let vertex_labels = self.part_labels();
        let face_labels =
            self.faces.iter().map(|f| face_label([vertex_labels[f[0]], vertex_labels[f[1]], vertex_labels[f[2]]])).collect();
        let fingertips = self.fingertips.map(|i| vertices[i]);
        let mesh = TriMesh::new(vertices, self.faces.clone())?.with_computed_normals();
        Ok(PosedHand { side: self.side, mesh, vertex_labels, face_labels, joints, fingertips })
    }
}

/// Projects joints and fingertips to pixels; points at or behind the near
/// plane are returned with `valid = false` and zero coordinates.
pub fn project_joints(joints: &[Vec3], fingertips: &[Vec3], camera: &Camera) -> Result<Vec<Keypoint>> {
    camera.validate()?;
    if joints.len() + fingertips.len() != KEYPOINT_COUNT {
        return Err(Error::shape(format!(
            "expected {KEYPOINT_COUNT} keypoints, got {} joints and {} fingertips",
            joints.len(),
            fingertips.len()
        )));
    }
    Ok(joints
        .iter()
        .chain(fingertips)
        .map(|p| match camera.project(p) {
            Some([u, v]) => Keypoint { u, v, valid: true },
            None => Keypoint { u: 0.0, v: 0.0, valid: false },
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::handmodel::make_toy_hand;

    #[test]
    fn zero_pose_is_template() {
        let toy = make_toy_hand();
        let (verts, _) = pose_hand(&toy, &HandPose::zeros(&toy)).unwrap();
        for (a, b) in verts.iter().zip(toy.template()) {
            assert!((a - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn wrong_dimensions_are_rejected() {
        let toy = make_toy_hand();
        let mut pose = HandPose::zeros(&toy);
        pose.beta.push(0.0);
        assert!(matches!(pose_hand(&toy, &pose), Err(Error::Shape(_))));
    }

    #[test]
    fn face_label_majority() {
        use HandPart::*;
        assert_eq!(face_label([Index, Index, Palm]), Index);
        assert_eq!(face_label([Palm, Thumb, Thumb]), Thumb);
        assert_eq!(face_label([Index, Thumb, Ring]), Palm);
    }

    #[test]
    fn projection_flags_points_behind_near() {
        let cam = Camera::with_fov(512, 512, 60.0, Default::default(), 0.1, 10.0);
        let mut pts = vec![Vec3::new(0.0, 0.0, 1.0); 16];
        pts[3] = Vec3::new(0.0, 0.0, 0.05);
        let tips = [Vec3::new(0.0, 0.0, -1.0); 5];
        let kp = project_joints(&pts, &tips, &cam).unwrap();
        assert_eq!(kp.len(), KEYPOINT_COUNT);
        assert!(kp[0].valid && (kp[0].u - 256.0).abs() < 1e-12 && (kp[0].v - 256.0).abs() < 1e-12);
        assert!(!kp[3].valid);
        assert!(kp[16..].iter().all(|k| !k.valid));
    }
}
