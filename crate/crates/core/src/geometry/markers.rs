use serde::{Deserialize, Serialize};

use crate::geometry::{kabsch_solve, RigidTransform, TriMesh};
use crate::{Error, Result, Vec3};

/// Captured marker positions, `frames × markers`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerTracks {
    pub markers: Vec<Vec<[f64; 3]>>,
}

impl MarkerTracks {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let tracks: MarkerTracks = serde_json::from_slice(bytes)?;
        tracks.validate()?;
        Ok(tracks)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.markers.first().map(Vec::len).unwrap_or(0);
        if self.markers.is_empty() {
            return Err(Error::invalid("marker tracks", "no frames"));
        }
        if k < 3 {
            return Err(Error::invalid("marker tracks", format!("need at least 3 markers, got {k}")));
        }
        if let Some(t) = self.markers.iter().position(|f| f.len() != k) {
            return Err(Error::shape(format!("frame {t} has {} markers, expected {k}", self.markers[t].len())));
        }
        if !self.markers.iter().flatten().flatten().all(|v| v.is_finite()) {
            return Err(Error::invalid("marker tracks", "non-finite coordinate"));
        }
        Ok(())
    }

    pub fn frames(&self) -> Vec<Vec<Vec3>> {
        self.markers.iter().map(|f| f.iter().map(|&p| Vec3::from(p)).collect()).collect()
    }
}

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Brute-force nearest-surface queries over the non-degenerate faces.
pub struct SurfaceIndex<'a> {
    mesh: &'a TriMesh,
    faces: Vec<usize>,
}

impl<'a> SurfaceIndex<'a> {
    pub fn new(mesh: &'a TriMesh) -> Result<Self> {
        let faces: Vec<usize> = (0..mesh.faces().len()).filter(|&f| !mesh.is_degenerate(f)).collect();
        if faces.is_empty() {
            return Err(Error::Degenerate("mesh has no non-degenerate face".into()));
        }
        Ok(SurfaceIndex { mesh, faces })
    }

    pub fn closest(&self, p: &Vec3) -> Vec3 {
        let mut best = Vec3::zeros();
        let mut best_d = f64::INFINITY;
        for &f in &self.faces {
            let [a, b, c] = self.mesh.face_corners(f);
            let q = closest_point_on_triangle(p, &a, &b, &c);
            let d = (q - p).norm_squared();
            if d < best_d {
                best_d = d;
                best = q;
            }
        }
        best
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RefineOptions {
    pub max_iter: usize,
    /// Stop once `(previous - current) / previous` drops below this.
    pub rel_tol: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions { max_iter: 200, rel_tol: 1e-9 }
    }
}

#[derive(Clone, Debug)]
pub struct MarkerRefinement {
    /// Marker positions in the object frame.
    pub offsets: Vec<Vec3>,
    pub poses: Vec<RigidTransform>,
    pub objective: f64,
    /// Objective after initialization and after every accepted iteration.
    pub history: Vec<f64>,
}

/// Sum over frames and markers of `‖R_t·o_j + t_t − y_tj‖²`.
pub fn marker_objective(offsets: &[Vec3], poses: &[RigidTransform], tracks: &[Vec<Vec3>]) -> f64 {
    poses
        .iter()
        .zip(tracks)
        .map(|(pose, frame)| {
            let rot = pose.rotation_matrix();
            let t = pose.translation_vector();
            offsets.iter().zip(frame).map(|(o, y)| (rot * o + t - y).norm_squared()).sum::<f64>()
        })
        .sum()
}

fn solve_poses(offsets: &[Vec3], tracks: &[Vec<Vec3>]) -> Result<Vec<RigidTransform>> {
    tracks
        .iter()
        .enumerate()
        .map(|(t, frame)| {
            kabsch_solve(offsets, frame).map_err(|e| match e {
                Error::Degenerate(msg) => Error::Degenerate(format!("frame {t}: {msg}")),
                other => other,
            })
        })
        .collect()
}

/// Alternating refinement of marker-on-surface offsets and per-frame poses.
///
/// Each iteration moves every offset to the surface point nearest the mean of
/// its back-projected observations (accepted only when that does not increase
/// the marker's data term), then re-solves all poses with Kabsch. Both steps
/// are exact minimizers of their block, so the objective never increases; an
/// iteration that would raise it through rounding is discarded and ends the
/// loop.
pub fn refine_marker_correspondence(
    mesh: &TriMesh,
    tracks: &[Vec<Vec3>],
    init_offsets: &[Vec3],
    options: RefineOptions,
) -> Result<MarkerRefinement> {
    let k = init_offsets.len();
    if tracks.is_empty() {
        return Err(Error::invalid("marker tracks", "no frames"));
    }
    if k < 3 {
        return Err(Error::invalid("marker offsets", format!("need at least 3 markers, got {k}")));
    }
    if let Some(t) = tracks.iter().position(|f| f.len() != k) {
        return Err(Error::shape(format!("frame {t} has {} markers, expected {k}", tracks[t].len())));
    }
    let surface = SurfaceIndex::new(mesh)?;

    let mut offsets = init_offsets.to_vec();
    let mut poses = solve_poses(&offsets, tracks)?;
    let mut objective = marker_objective(&offsets, &poses, tracks);
    let mut history = vec![objective];

    for _ in 0..options.max_iter {
        if objective == 0.0 {
            break;
        }
        let inverse: Vec<_> = poses.iter().map(|p| (p.rotation_matrix().transpose(), p.translation_vector())).collect();
        let mut next = offsets.clone();
        for (j, slot) in next.iter_mut().enumerate() {
            let mean = tracks
                .iter()
                .zip(&inverse)
                .map(|(frame, (rt, t))| rt * (frame[j] - t))
                .sum::<Vec3>()
                / tracks.len() as f64;
            let candidate = surface.closest(&mean);
            if (candidate - mean).norm_squared() <= (*slot - mean).norm_squared() {
                *slot = candidate;
            }
        }
        let next_poses = solve_poses(&next, tracks)?;
        let next_objective = marker_objective(&next, &next_poses, tracks);
        if next_objective > objective {
            break;
        }
        let improvement = (objective - next_objective) / objective;
        offsets = next;
        poses = next_poses;
        objective = next_objective;
        history.push(objective);
        if improvement < options.rel_tol {
            break;
        }
    }

    Ok(MarkerRefinement { offsets, poses, objective, history })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closest_point_regions() {
        let a = Vec3::new(0.0, 0.0, 0.0);
        let b = Vec3::new(1.0, 0.0, 0.0);
        let c = Vec3::new(0.0, 1.0, 0.0);
        let inside = closest_point_on_triangle(&Vec3::new(0.2, 0.3, 5.0), &a, &b, &c);
        assert!((inside - Vec3::new(0.2, 0.3, 0.0)).norm() < 1e-15);
        assert_eq!(closest_point_on_triangle(&Vec3::new(-1.0, -1.0, 0.0), &a, &b, &c), a);
        assert_eq!(closest_point_on_triangle(&Vec3::new(3.0, -0.5, 0.0), &a, &b, &c), b);
        let edge = closest_point_on_triangle(&Vec3::new(1.0, 1.0, 0.0), &a, &b, &c);
        assert!((edge - Vec3::new(0.5, 0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn tracks_json_shape_checks() {
        let ok = br#"{"markers": [[[0,0,0],[1,0,0],[0,1,0]]]}"#;
        assert_eq!(MarkerTracks::from_json(ok).unwrap().frames().len(), 1);
        let ragged = br#"{"markers": [[[0,0,0],[1,0,0],[0,1,0]], [[0,0,0],[1,0,0]]]}"#;
        assert!(MarkerTracks::from_json(ragged).is_err());
        let few = br#"{"markers": [[[0,0,0],[1,0,0]]]}"#;
        assert!(MarkerTracks::from_json(few).is_err());
    }
}
