use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geometry::RigidTransform;
use crate::{Error, Result, Vec3};

/// Frames between rotation and translation keyframes.
pub const KEYFRAME_SPACING: usize = 8;

/// Per-frame rigid pose of the object. Quaternions are `(a, b, c, w)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectMotion {
    #[serde(rename = "q")]
    pub rotations: Vec<[f64; 4]>,
    #[serde(rename = "l")]
    pub translations: Vec<[f64; 3]>,
}

impl ObjectMotion {
    pub fn identity(frames: usize) -> Self {
        ObjectMotion { rotations: vec![[0.0, 0.0, 0.0, 1.0]; frames], translations: vec![[0.0; 3]; frames] }
    }

    pub fn len(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotations.is_empty()
    }

    pub fn pose(&self, frame: usize) -> RigidTransform {
        RigidTransform { rotation: self.rotations[frame], translation: self.translations[frame] }
    }

    /// Angle between consecutive frames, `2·acos(|q_i·q_{i+1}|)`.
    pub fn step_angles(&self) -> Vec<f64> {
        self.rotations.windows(2).map(|w| 2.0 * dot4(&w[0], &w[1]).abs().min(1.0).acos()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.rotations.is_empty() || self.rotations.len() != self.translations.len() {
            return Err(Error::shape(format!(
                "motion needs T ≥ 1 matching rotations and translations, got {} and {}",
                self.rotations.len(),
                self.translations.len()
            )));
        }
        for (i, q) in self.rotations.iter().enumerate() {
            RigidTransform { rotation: *q, translation: self.translations[i] }.validate()?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("motion serializes")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionConfig {
    /// Upper bound on the rotation between consecutive frames, radians.
    pub rot_rate_max: f64,
    pub trans_min: [f64; 3],
    pub trans_max: [f64; 3],
}

impl Default for MotionConfig {
    fn default() -> Self {
        MotionConfig { rot_rate_max: 0.05, trans_min: [-0.05; 3], trans_max: [0.05; 3] }
    }
}

fn dot4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize4(q: [f64; 4]) -> [f64; 4] {
    let n = dot4(&q, &q).sqrt();
    q.map(|c| c / n)
}

/// Hamilton product on `(a, b, c, w)` tuples.
fn mul4(p: &[f64; 4], q: &[f64; 4]) -> [f64; 4] {
    let [px, py, pz, pw] = *p;
    let [qx, qy, qz, qw] = *q;
    [
        pw * qx + px * qw + py * qz - pz * qy,
        pw * qy - px * qz + py * qw + pz * qx,
        pw * qz + px * qy - py * qx + pz * qw,
        pw * qw - px * qx - py * qy - pz * qz,
    ]
}

/// Constant-speed interpolation along the great arc from `q0` to `q1`.
/// The arc is taken as given; callers wanting the shorter rotation align
/// signs first. Nearly parallel inputs fall back to normalized lerp.
pub fn slerp(q0: &[f64; 4], q1: &[f64; 4], t: f64) -> [f64; 4] {
    let cos = dot4(q0, q1).clamp(-1.0, 1.0);
    let theta = cos.acos();
    if theta.sin().abs() < 1e-12 {
        let mut out = [0.0; 4];
        for k in 0..4 {
            out[k] = q0[k] + (q1[k] - q0[k]) * t;
        }
        return normalize4(out);
    }
    let s = theta.sin();
    let w0 = ((1.0 - t) * theta).sin() / s;
    let w1 = (t * theta).sin() / s;
    let mut out = [0.0; 4];
    for k in 0..4 {
        out[k] = w0 * q0[k] + w1 * q1[k];
    }
    out
}

fn random_unit_vector(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

fn catmull_rom(p0: f64, p1: f64, p2: f64, p3: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    0.5 * (2.0 * p1 + (p2 - p0) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2 + (3.0 * p1 - p0 - 3.0 * p2 + p3) * t3)
}

/// Seeded random motion. Rotation keyframes every [`KEYFRAME_SPACING`]
/// frames are joined by slerp; each key differs from the previous by at most
/// `0.95·spacing·rot_rate_max`, so every frame step stays below the rate.
/// Translations follow a Catmull-Rom spline through keypoints drawn
/// uniformly in the box, clamped to the box.
pub fn simulate_motion(seed: u64, frames: usize, config: &MotionConfig) -> Result<ObjectMotion> {
    if frames == 0 {
        return Err(Error::invalid("motion", "frame count must be at least 1"));
    }
    if !(config.rot_rate_max > 0.0) || !config.rot_rate_max.is_finite() {
        return Err(Error::invalid("motion", format!("rot_rate_max must be positive, got {}", config.rot_rate_max)));
    }
    if (0..3).any(|a| !(config.trans_min[a] <= config.trans_max[a])) {
        return Err(Error::invalid("motion", "translation box has min > max"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keys = (frames - 1) / KEYFRAME_SPACING + 2;
    let max_key_angle = (0.95 * KEYFRAME_SPACING as f64 * config.rot_rate_max).min(0.9 * std::f64::consts::PI);

    let first = normalize4(std::array::from_fn(|_| rng.sample(StandardNormal)));
    let mut rot_keys = vec![first];
    for _ in 1..keys {
        let axis = random_unit_vector(&mut rng);
        let angle = rng.random_range(0.0..=max_key_angle);
        let h = 0.5 * angle;
        let delta = [axis.x * h.sin(), axis.y * h.sin(), axis.z * h.sin(), h.cos()];
        let mut next = normalize4(mul4(rot_keys.last().unwrap(), &delta));
        if dot4(rot_keys.last().unwrap(), &next) < 0.0 {
            next = next.map(|c| -c);
        }
        rot_keys.push(next);
    }
    let trans_keys: Vec<[f64; 3]> = (0..keys)
        .map(|_| std::array::from_fn(|a| rng.random_range(config.trans_min[a]..=config.trans_max[a])))
        .collect();

    let mut motion = ObjectMotion { rotations: Vec::with_capacity(frames), translations: Vec::with_capacity(frames) };
    for f in 0..frames {
        let k = f / KEYFRAME_SPACING;
        let t = (f % KEYFRAME_SPACING) as f64 / KEYFRAME_SPACING as f64;
        motion.rotations.push(if t == 0.0 { rot_keys[k] } else { slerp(&rot_keys[k], &rot_keys[k + 1], t) });
        let p = |i: isize| trans_keys[i.clamp(0, keys as isize - 1) as usize];
        let (p0, p1, p2, p3) = (p(k as isize - 1), p(k as isize), p(k as isize + 1), p(k as isize + 2));
        motion.translations.push(std::array::from_fn(|a| {
            catmull_rom(p0[a], p1[a], p2[a], p3[a], t).clamp(config.trans_min[a], config.trans_max[a])
        }));
    }
    Ok(motion)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_count_and_determinism() {
        let cfg = MotionConfig::default();
        let a = simulate_motion(3, 24, &cfg).unwrap();
        assert_eq!(a.len(), 24);
        assert_eq!(a, simulate_motion(3, 24, &cfg).unwrap());
        assert_ne!(a, simulate_motion(4, 24, &cfg).unwrap());
        a.validate().unwrap();
    }

    #[test]
    fn step_angles_respect_rate() {
        for seed in 0..20 {
            for rate in [0.01, 0.1, 0.5, 2.0] {
                let cfg = MotionConfig { rot_rate_max: rate, ..Default::default() };
                let m = simulate_motion(seed, 41, &cfg).unwrap();
                assert!(m.step_angles().iter().all(|&a| a <= rate), "seed {seed} rate {rate}");
            }
        }
    }

    #[test]
    fn nonpositive_rate_is_rejected() {
        let cfg = MotionConfig { rot_rate_max: 0.0, ..Default::default() };
        assert!(simulate_motion(0, 4, &cfg).is_err());
    }

    #[test]
    fn translations_stay_in_box() {
        let cfg = MotionConfig { trans_min: [0.0, -1.0, 2.0], trans_max: [0.1, -0.5, 2.0], ..Default::default() };
        let m = simulate_motion(9, 50, &cfg).unwrap();
        for l in &m.translations {
            for a in 0..3 {
                assert!(l[a] >= cfg.trans_min[a] && l[a] <= cfg.trans_max[a]);
            }
        }
    }

    #[test]
    fn slerp_endpoints_and_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let q0 = normalize4(std::array::from_fn(|_| rng.sample(StandardNormal)));
            let q1 = normalize4(std::array::from_fn(|_| rng.sample(StandardNormal)));
            let a = slerp(&q0, &q1, 0.0);
            let b = slerp(&q0, &q1, 1.0);
            for k in 0..4 {
                assert!((a[k] - q0[k]).abs() <= 1e-9 && (b[k] - q1[k]).abs() <= 1e-9);
            }
            for i in 0..=20 {
                let q = slerp(&q0, &q1, i as f64 / 20.0);
                assert!((dot4(&q, &q).sqrt() - 1.0).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn json_keys() {
        let json = ObjectMotion::identity(1).to_json();
        assert_eq!(json, r#"{"q":[[0.0,0.0,0.0,1.0]],"l":[[0.0,0.0,0.0]]}"#);
    }
}
