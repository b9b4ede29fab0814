use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum HandPart {
    Palm,
    Thumb,
    Index,
    Middle,
    Ring,
    Little,
}

impl HandPart {
    pub const ALL: [HandPart; 6] =
        [HandPart::Palm, HandPart::Thumb, HandPart::Index, HandPart::Middle, HandPart::Ring, HandPart::Little];

    pub fn name(self) -> &'static str {
        match self {
            HandPart::Palm => "palm",
            HandPart::Thumb => "thumb",
            HandPart::Index => "index",
            HandPart::Middle => "middle",
            HandPart::Ring => "ring",
            HandPart::Little => "little",
        }
    }

    pub fn ordinal(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// On-disk hand asset. Numbers are plain JSON decimals; `parents` uses `-1`
/// for the root; `faces` are 0-based; `fingertips` lists one vertex per
/// finger in the order thumb, index, middle, ring, little.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandAsset {
    pub template: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
    /// `V × 3 × B_s`
    pub shape_basis: Vec<Vec<Vec<f64>>>,
    /// `V × 3 × B_p`, with `B_p = 9·(J−1)` or 0
    pub pose_basis: Vec<Vec<Vec<f64>>>,
    /// `J × V`
    pub joint_regressor: Vec<Vec<f64>>,
    pub parents: Vec<i64>,
    /// `V × J`
    pub weights: Vec<Vec<f64>>,
    pub part_of_joint: Vec<HandPart>,
    pub side: Side,
    pub fingertips: [usize; 5],
}

/// Immutable, validated hand model.
#[derive(Clone, Debug, PartialEq)]
pub struct HandModel {
    pub(crate) template: Vec<Vec3>,
    pub(crate) faces: Vec<[usize; 3]>,
    /// index `(v·3 + axis)·B_s + k`
    pub(crate) shape_basis: Vec<f64>,
    pub(crate) num_shape: usize,
    /// index `(v·3 + axis)·B_p + k`
    pub(crate) pose_basis: Vec<f64>,
    pub(crate) num_pose: usize,
    /// index `j·V + v`
    pub(crate) joint_regressor: Vec<f64>,
    pub(crate) parents: Vec<Option<usize>>,
    /// index `v·J + j`
    pub(crate) weights: Vec<f64>,
    pub(crate) part_of_joint: Vec<HandPart>,
    pub(crate) side: Side,
    pub(crate) fingertips: [usize; 5],
    pub(crate) order: Vec<usize>,
}

/// Model parameters: axis-angle `theta` (3 per joint, root first), shape
/// coefficients `beta`, and a root translation in meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandPose {
    #[serde(default)]
    pub theta: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(rename = "translation", default)]
    pub root_translation: [f64; 3],
}

impl HandPose {
    pub fn zeros(model: &HandModel) -> Self {
        HandPose { theta: vec![0.0; 3 * model.joint_count()], beta: vec![0.0; model.shape_count()], root_translation: [0.0; 3] }
    }

    /// Pads an empty `theta` or `beta` with zeros sized for the model.
    pub fn filled_for(mut self, model: &HandModel) -> Self {
        if self.theta.is_empty() {
            self.theta = vec![0.0; 3 * model.joint_count()];
        }
        if self.beta.is_empty() {
            self.beta = vec![0.0; model.shape_count()];
        }
        self
    }

    pub fn joint_rotation(&self, joint: usize) -> Vec3 {
        Vec3::new(self.theta[3 * joint], self.theta[3 * joint + 1], self.theta[3 * joint + 2])
    }

    pub fn set_joint_rotation(&mut self, joint: usize, axis_angle: Vec3) {
        self.theta[3 * joint..3 * joint + 3].copy_from_slice(axis_angle.as_slice());
    }

    pub fn validate(&self, model: &HandModel) -> Result<()> {
        if self.theta.len() != 3 * model.joint_count() {
            return Err(Error::shape(format!("theta has {} entries, model needs {}", self.theta.len(), 3 * model.joint_count())));
        }
        if self.beta.len() != model.shape_count() {
            return Err(Error::shape(format!("beta has {} entries, model needs {}", self.beta.len(), model.shape_count())));
        }
        if !self.theta.iter().chain(&self.beta).chain(&self.root_translation).all(|v| v.is_finite()) {
            return Err(Error::invalid("hand pose", "non-finite entry"));
        }
        let global = self.joint_rotation(model.root());
        if global.norm() > std::f64::consts::PI + 1e-9 {
            return Err(Error::invalid("hand pose", "global rotation angle exceeds pi"));
        }
        Ok(())
    }
}

fn nested3(rows: &[Vec<Vec<f64>>], verts: usize, what: &str) -> Result<(Vec<f64>, usize)> {
    if rows.len() != verts {
        return Err(Error::shape(format!("{what} has {} rows, expected {verts}", rows.len())));
    }
    let width = rows.first().and_then(|r| r.first()).map_or(0, Vec::len);
    let mut flat = Vec::with_capacity(verts * 3 * width);
    for (v, row) in rows.iter().enumerate() {
        if row.len() != 3 || row.iter().any(|c| c.len() != width) {
            return Err(Error::shape(format!("{what} row {v} is not 3 × {width}")));
        }
        flat.extend(row.iter().flatten());
    }
    Ok((flat, width))
}

fn nested3_out(flat: &[f64], verts: usize, width: usize) -> Vec<Vec<Vec<f64>>> {
    (0..verts)
        .map(|v| (0..3).map(|a| flat[(v * 3 + a) * width..(v * 3 + a + 1) * width].to_vec()).collect())
        .collect()
}

impl HandModel {
    pub const WEIGHT_TOLERANCE: f64 = 1e-4;
    pub const REGRESSOR_TOLERANCE: f64 = 1e-3;

    pub fn from_asset(asset: &HandAsset) -> Result<Self> {
        let v = asset.template.len();
        let j = asset.parents.len();
        if v == 0 || j == 0 {
            return Err(Error::shape("hand asset needs vertices and joints"));
        }
        let (shape_basis, num_shape) = nested3(&asset.shape_basis, v, "shape_basis")?;
        let (pose_basis, num_pose) = nested3(&asset.pose_basis, v, "pose_basis")?;
        if num_pose != 0 && num_pose != 9 * (j - 1) {
            return Err(Error::shape(format!("pose_basis width {num_pose}, expected 0 or {}", 9 * (j - 1))));
        }
        if asset.joint_regressor.len() != j || asset.joint_regressor.iter().any(|r| r.len() != v) {
            return Err(Error::shape(format!("joint_regressor must be {j} × {v}")));
        }
        if asset.weights.len() != v || asset.weights.iter().any(|r| r.len() != j) {
            return Err(Error::shape(format!("weights must be {v} × {j}")));
        }
        if asset.part_of_joint.len() != j {
            return Err(Error::shape(format!("part_of_joint has {} labels for {j} joints", asset.part_of_joint.len())));
        }
        let parents = asset
            .parents
            .iter()
            .map(|&p| match p {
                -1 => Ok(None),
                p if p >= 0 && (p as usize) < j => Ok(Some(p as usize)),
                p => Err(Error::invalid("hand parents", format!("parent index {p} out of range"))),
            })
            .collect::<Result<Vec<_>>>()?;

        let model = HandModel {
            template: asset.template.iter().map(|&p| Vec3::from(p)).collect(),
            faces: asset.faces.clone(),
            shape_basis,
            num_shape,
            pose_basis,
            num_pose,
            joint_regressor: asset.joint_regressor.iter().flatten().copied().collect(),
            order: kinematic_order(&parents)?,
            parents,
            weights: asset.weights.iter().flatten().copied().collect(),
            part_of_joint: asset.part_of_joint.clone(),
            side: asset.side,
            fingertips: asset.fingertips,
        };
        model.validate()?;
        Ok(model)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let v = self.vertex_count();
        let j = self.joint_count();
        let all = self
            .template
            .iter()
            .flat_map(|p| p.iter())
            .chain(&self.shape_basis)
            .chain(&self.pose_basis)
            .chain(&self.joint_regressor)
            .chain(&self.weights);
        if !all.into_iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("hand model", "non-finite value"));
        }
        for (vi, row) in self.weights.chunks_exact(j).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&w| w < 0.0) || (sum - 1.0).abs() > Self::WEIGHT_TOLERANCE {
                return Err(Error::invalid("skinning weights", format!("row {vi} sums to {sum} or has negative entries")));
            }
        }
        for (ji, row) in self.joint_regressor.chunks_exact(v).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > Self::REGRESSOR_TOLERANCE {
                return Err(Error::invalid("joint regressor", format!("row {ji} sums to {sum}")));
            }
        }
        if let Some(f) = self.faces.iter().position(|f| f.iter().any(|&i| i >= v)) {
            return Err(Error::IndexOutOfRange { face: f, index: *self.faces[f].iter().max().unwrap(), count: v });
        }
        if self.fingertips.iter().any(|&i| i >= v) {
            return Err(Error::invalid("fingertips", "vertex index out of range"));
        }
        Ok(())
    }

    pub fn to_asset(&self) -> HandAsset {
        let v = self.vertex_count();
        let j = self.joint_count();
        HandAsset {
            template: self.template.iter().map(|p| [p.x, p.y, p.z]).collect(),
            faces: self.faces.clone(),
            shape_basis: nested3_out(&self.shape_basis, v, self.num_shape),
            pose_basis: nested3_out(&self.pose_basis, v, self.num_pose),
            joint_regressor: self.joint_regressor.chunks_exact(v).map(<[f64]>::to_vec).collect(),
            parents: self.parents.iter().map(|p| p.map_or(-1, |p| p as i64)).collect(),
            weights: self.weights.chunks_exact(j).map(<[f64]>::to_vec).collect(),
            part_of_joint: self.part_of_joint.clone(),
            side: self.side,
            fingertips: self.fingertips,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_asset()).expect("asset serializes")
    }

    pub fn vertex_count(&self) -> usize {
        self.template.len()
    }

    pub fn joint_count(&self) -> usize {
        self.parents.len()
    }

    pub fn shape_count(&self) -> usize {
        self.num_shape
    }

    pub fn pose_basis_count(&self) -> usize {
        self.num_pose
    }

    pub fn template(&self) -> &[Vec3] {
        &self.template
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }

    pub fn part_of_joint(&self) -> &[HandPart] {
        &self.part_of_joint
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn fingertips(&self) -> [usize; 5] {
        self.fingertips
    }

    pub fn root(&self) -> usize {
        self.order[0]
    }

    pub fn weight(&self, vertex: usize, joint: usize) -> f64 {
        self.weights[vertex * self.joint_count() + joint]
    }

    /// Label of the joint with the largest skinning weight; ties go to the
    /// lowest joint index.
    pub fn part_labels(&self) -> Vec<HandPart> {
        let j = self.joint_count();
        self.weights
            .chunks_exact(j)
            .map(|row| {
                let mut best = 0;
                for k in 1..j {
                    if row[k] > row[best] {
                        best = k;
                    }
                }
                self.part_of_joint[best]
            })
            .collect()
    }

    /// Shaped template `T + S·β`.
    pub fn shaped_template(&self, beta: &[f64]) -> Vec<Vec3> {
        let bs = self.num_shape;
        self.template
            .iter()
            .enumerate()
            .map(|(v, p)| {
                let mut out = *p;
                for a in 0..3 {
                    let row = &self.shape_basis[(v * 3 + a) * bs..(v * 3 + a + 1) * bs];
                    out[a] += row.iter().zip(beta).map(|(s, b)| s * b).sum::<f64>();
                }
                out
            })
            .collect()
    }

    /// Joint locations regressed from a vertex set.
    pub fn regress_joints(&self, vertices: &[Vec3]) -> Vec<Vec3> {
        self.joint_regressor
            .chunks_exact(self.vertex_count())
            .map(|row| row.iter().zip(vertices).map(|(w, p)| p * *w).sum())
            .collect()
    }

    /// The same model reflected through `x = 0`, with the opposite side.
    ///
    /// Posing the mirror with `(θx, −θy, −θz)` per joint yields the mirror of
    /// the original posed with `θ`.
    pub fn mirrored(&self) -> HandModel {
        let m = [-1.0, 1.0, 1.0];
        let mut out = self.clone();
        for p in &mut out.template {
            p.x = -p.x;
        }
        let bs = self.num_shape;
        for v in 0..self.vertex_count() {
            for k in 0..bs {
                out.shape_basis[(v * 3) * bs + k] *= -1.0;
            }
        }
        // pose features are vec(R − I) per joint; reflecting R -> M·R·M scales
        // entry (r, c) by m_r·m_c
        let bp = self.num_pose;
        for v in 0..self.vertex_count() {
            for a in 0..3 {
                for k in 0..bp {
                    let entry = k % 9;
                    let scale = m[a] * m[entry / 3] * m[entry % 3];
                    out.pose_basis[(v * 3 + a) * bp + k] *= scale;
                }
            }
        }
        for f in &mut out.faces {
            f.swap(1, 2);
        }
        out.side = match self.side {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        };
        out
    }
}

/// Parents-before-children order. Fails on cycles or when the number of
/// roots is not exactly one.
fn kinematic_order(parents: &[Option<usize>]) -> Result<Vec<usize>> {
    let roots: Vec<usize> = (0..parents.len()).filter(|&j| parents[j].is_none()).collect();
    if roots.len() != 1 {
        return Err(Error::invalid("hand parents", format!("expected exactly one root, found {}", roots.len())));
    }
    let mut order = Vec::with_capacity(parents.len());
    let mut placed = vec![false; parents.len()];
    let mut frontier = roots;
    while let Some(j) = frontier.pop() {
        placed[j] = true;
        order.push(j);
        for (child, p) in parents.iter().enumerate().rev() {
            if *p == Some(j) && !placed[child] {
                frontier.push(child);
            }
        }
    }
    if order.len() != parents.len() {
        return Err(Error::invalid("hand parents", "kinematic tree contains a cycle"));
    }
    Ok(order)
}

pub fn load_hand_model(asset: &[u8]) -> Result<HandModel> {
    let asset: HandAsset = serde_json::from_slice(asset)?;
    HandModel::from_asset(&asset)
}

/// Loads an asset and mirrors it when it was authored for the other side.
pub fn load_hand_model_as(asset: &[u8], side: Side) -> Result<HandModel> {
    let model = load_hand_model(asset)?;
    Ok(if model.side == side { model } else { model.mirrored() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::handmodel::make_toy_hand;

    #[test]
    fn toy_asset_roundtrips_through_json() {
        let toy = make_toy_hand();
        let back = load_hand_model(toy.to_json().as_bytes()).unwrap();
        assert_eq!(back, toy);
    }

    #[test]
    fn bad_weight_row_is_rejected() {
        let mut asset = make_toy_hand().to_asset();
        let row = &mut asset.weights[5];
        let scale = 0.9 / row.iter().sum::<f64>();
        row.iter_mut().for_each(|w| *w *= scale);
        let err = HandModel::from_asset(&asset).unwrap_err();
        assert!(err.to_string().contains("skinning weights"), "{err}");
    }

    #[test]
    fn cyclic_parents_are_rejected() {
        let mut asset = make_toy_hand().to_asset();
        // 1 -> 3 -> 2 -> 1 detaches the index chain into a loop
        asset.parents[1] = 3;
        assert!(HandModel::from_asset(&asset).is_err());
        let mut asset = make_toy_hand().to_asset();
        asset.parents[4] = -1;
        assert!(HandModel::from_asset(&asset).is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut asset = make_toy_hand().to_asset();
        asset.joint_regressor.pop();
        assert!(matches!(HandModel::from_asset(&asset), Err(Error::Shape(_))));
        let mut asset = make_toy_hand().to_asset();
        asset.shape_basis[3][1].push(0.0);
        assert!(matches!(HandModel::from_asset(&asset), Err(Error::Shape(_))));
    }

    #[test]
    fn loading_as_other_side_mirrors() {
        let toy = make_toy_hand();
        let left = load_hand_model_as(toy.to_json().as_bytes(), Side::Left).unwrap();
        assert_eq!(left.side(), Side::Left);
        assert_eq!(left.template()[7].x, -toy.template()[7].x);
        assert_eq!(left.mirrored(), toy);
    }
}
