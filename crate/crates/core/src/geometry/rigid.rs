use nalgebra::{Quaternion, Rotation3, UnitQuaternion, SVD};
use serde::{Deserialize, Serialize};

use crate::{Error, Mat3, Result, Vec3};

/// Rotation as a unit quaternion stored `(a, b, c, w)` (vector part first)
/// plus a translation `(x, y, k)` in meters. Applies as `R·p + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    #[serde(rename = "q")]
    pub rotation: [f64; 4],
    #[serde(rename = "l")]
    pub translation: [f64; 3],
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub const QUATERNION_TOLERANCE: f64 = 1e-6;

    pub fn identity() -> Self {
        RigidTransform { rotation: [0.0, 0.0, 0.0, 1.0], translation: [0.0; 3] }
    }

    pub fn new(rotation: [f64; 4], translation: [f64; 3]) -> Result<Self> {
        let t = RigidTransform { rotation, translation };
        t.validate()?;
        Ok(t)
    }

    pub fn from_unit_quaternion(q: &UnitQuaternion<f64>, translation: Vec3) -> Self {
        let c = q.as_ref().coords;
        RigidTransform { rotation: [c.x, c.y, c.z, c.w], translation: translation.into() }
    }

    pub fn from_rotation_matrix(rotation: &Mat3, translation: Vec3) -> Self {
        let rot = Rotation3::from_matrix_unchecked(*rotation);
        Self::from_unit_quaternion(&UnitQuaternion::from_rotation_matrix(&rot), translation)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.rotation.iter().chain(&self.translation).all(|v| v.is_finite()) {
            return Err(Error::invalid("rigid transform", "non-finite component"));
        }
        let norm = self.rotation.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > Self::QUATERNION_TOLERANCE {
            return Err(Error::invalid("rigid transform", format!("quaternion norm {norm} is not 1")));
        }
        Ok(())
    }

    pub fn unit_quaternion(&self) -> UnitQuaternion<f64> {
        let [a, b, c, w] = self.rotation;
        UnitQuaternion::new_normalize(Quaternion::new(w, a, b, c))
    }

    pub fn rotation_matrix(&self) -> Mat3 {
        *self.unit_quaternion().to_rotation_matrix().matrix()
    }

    pub fn translation_vector(&self) -> Vec3 {
        Vec3::from(self.translation)
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation_matrix() * p + self.translation_vector()
    }

    pub fn inverse(&self) -> Self {
        let q = self.unit_quaternion().inverse();
        Self::from_unit_quaternion(&q, -(q * self.translation_vector()))
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        let q = self.unit_quaternion() * other.unit_quaternion();
        Self::from_unit_quaternion(&q, self.apply(&other.translation_vector()))
    }
}

fn centroid(points: &[Vec3]) -> Vec3 {
    points.iter().sum::<Vec3>() / points.len() as f64
}

/// Least-squares rigid transform mapping `src[i]` onto `dst[i]`.
///
/// The rotation comes from the SVD of the cross-covariance; a reflection is
/// corrected by flipping the direction of the smallest singular value.
pub fn kabsch_solve(src: &[Vec3], dst: &[Vec3]) -> Result<RigidTransform> {
    if src.len() != dst.len() {
        return Err(Error::shape(format!("{} source vs {} target points", src.len(), dst.len())));
    }
    if src.len() < 3 {
        return Err(Error::Degenerate(format!("need at least 3 point pairs, got {}", src.len())));
    }
    if !src.iter().chain(dst).all(|p| p.iter().all(|c| c.is_finite())) {
        return Err(Error::invalid("point set", "non-finite coordinate"));
    }
    let cs = centroid(src);
    let cd = centroid(dst);

    let mut scatter = Mat3::zeros();
    let mut cross = Mat3::zeros();
    for (s, d) in src.iter().zip(dst) {
        let s = s - cs;
        scatter += s * s.transpose();
        cross += s * (d - cd).transpose();
    }

    let mut spread = scatter.symmetric_eigen().eigenvalues.iter().copied().collect::<Vec<_>>();
    spread.sort_by(|a, b| b.total_cmp(a));
    if spread[0] <= 0.0 || spread[1] <= 1e-14 * spread[0] {
        return Err(Error::Degenerate("source points are coincident or collinear".into()));
    }

    let svd = SVD::new(cross, true, true);
    let u = svd.u.expect("u requested");
    let v = svd.v_t.expect("v_t requested").transpose();
    let mut flip = Mat3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        let smallest = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        flip[(smallest, smallest)] = -1.0;
    }
    let rotation = v * flip * u.transpose();
    let translation = cd - rotation * cs;
    Ok(RigidTransform::from_rotation_matrix(&rotation, translation))
}

/// Root-mean-square distance between `transform(src[i])` and `dst[i]`.
pub fn residual_rms(transform: &RigidTransform, src: &[Vec3], dst: &[Vec3]) -> f64 {
    let rot = transform.rotation_matrix();
    let t = transform.translation_vector();
    let sum: f64 = src.iter().zip(dst).map(|(s, d)| (rot * s + t - d).norm_squared()).sum();
    (sum / src.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn markers() -> Vec<Vec3> {
        vec![
            Vec3::new(0.1, -0.2, 0.05),
            Vec3::new(-0.3, 0.1, 0.2),
            Vec3::new(0.25, 0.3, -0.1),
            Vec3::new(-0.05, -0.15, -0.3),
        ]
    }

    #[test]
    fn identical_sets_give_identity() {
        let t = kabsch_solve(&markers(), &markers()).unwrap();
        assert_abs_diff_eq!(t.rotation_matrix(), Mat3::identity(), epsilon = 1e-12);
        assert_abs_diff_eq!(t.translation_vector(), Vec3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn recovers_quarter_turn_about_z() {
        // exact matrix for Rz(90°): x -> y, y -> -x
        let rz = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let t = Vec3::new(1.0, 2.0, 3.0);
        let src = markers();
        let dst: Vec<_> = src.iter().map(|p| rz * p + t).collect();
        let fit = kabsch_solve(&src, &dst).unwrap();
        let err = (fit.rotation_matrix() - rz).abs().max().max((fit.translation_vector() - t).abs().max());
        assert!(err <= 1e-9, "max element error {err}");
    }

    #[test]
    fn reflection_is_never_returned() {
        // mirror image of the markers: best proper rotation still has det +1
        let src = markers();
        let dst: Vec<_> = src.iter().map(|p| Vec3::new(-p.x, p.y, p.z)).collect();
        let fit = kabsch_solve(&src, &dst).unwrap();
        assert_abs_diff_eq!(fit.rotation_matrix().determinant(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn planar_sets_are_solvable_collinear_are_not() {
        let planar = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        assert!(kabsch_solve(&planar, &planar).is_ok());
        let line: Vec<_> = (0..4).map(|i| Vec3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        assert!(matches!(kabsch_solve(&line, &line), Err(Error::Degenerate(_))));
        assert!(matches!(kabsch_solve(&planar[..2], &planar[..2]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn compose_and_inverse() {
        let a = RigidTransform::from_unit_quaternion(
            &UnitQuaternion::from_scaled_axis(Vec3::new(0.3, -0.2, 0.9)),
            Vec3::new(0.5, 0.1, -2.0),
        );
        let id = a.compose(&a.inverse());
        assert_abs_diff_eq!(id.rotation_matrix(), Mat3::identity(), epsilon = 1e-12);
        assert_abs_diff_eq!(id.translation_vector(), Vec3::zeros(), epsilon = 1e-12);
        assert!(RigidTransform::new([0.0, 0.0, 0.0, 2.0], [0.0; 3]).is_err());
    }

    #[test]
    fn json_uses_q_and_l_keys() {
        let t = RigidTransform::identity();
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, r#"{"q":[0.0,0.0,0.0,1.0],"l":[0.0,0.0,0.0]}"#);
    }
}
