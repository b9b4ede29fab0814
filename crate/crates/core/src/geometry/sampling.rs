use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::TriMesh;
use crate::{Error, Result, Vec3};

pub const DEFAULT_SAMPLE_COUNT: usize = 2048;

#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub source_face: Vec<usize>,
    pub barycentric: Vec<[f64; 3]>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Row-major `n × 3` coordinates.
    pub fn flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
    }
}

/// Area-uniform surface samples: a face is drawn with probability
/// proportional to its area, then a point uniformly inside it.
pub fn sample_surface(mesh: &TriMesh, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::invalid("sample count", "must be at least 1"));
    }
    let areas: Vec<f64> = (0..mesh.faces().len())
        .map(|f| if mesh.is_degenerate(f) { 0.0 } else { mesh.face_area(f) })
        .collect();
    let picker = WeightedIndex::new(&areas)
        .map_err(|_| Error::Degenerate("mesh has no non-degenerate face to sample".into()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cloud = PointCloud {
        points: Vec::with_capacity(n),
        source_face: Vec::with_capacity(n),
        barycentric: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let face = picker.sample(&mut rng);
        let r1: f64 = rng.random();
        let r2: f64 = rng.random();
        let s = r1.sqrt();
        let bary = [1.0 - s, s * (1.0 - r2), s * r2];
        let [a, b, c] = mesh.face_corners(face);
        cloud.points.push(a * bary[0] + b * bary[1] + c * bary[2]);
        cloud.source_face.push(face);
        cloud.barycentric.push(bary);
    }
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::load_mesh;

    fn unit_square() -> TriMesh {
        load_mesh(b"v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3\nf 1 3 4\n").unwrap()
    }

    #[test]
    fn points_stay_on_the_square() {
        let cloud = sample_surface(&unit_square(), DEFAULT_SAMPLE_COUNT, 3).unwrap();
        assert_eq!(cloud.len(), 2048);
        for (p, b) in cloud.points.iter().zip(&cloud.barycentric) {
            assert!((0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y));
            assert_eq!(p.z, 0.0);
            assert!(b.iter().all(|&w| w >= 0.0));
            assert!((b.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn same_seed_same_points() {
        let a = sample_surface(&unit_square(), 100, 11).unwrap();
        let b = sample_surface(&unit_square(), 100, 11).unwrap();
        let c = sample_surface(&unit_square(), 100, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn one_to_three_area_split() {
        // face 0 has area 0.5, face 1 has area 1.5
        let mesh = load_mesh(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nv 4 0 0\nv 4 1 0\nf 1 2 3\nf 2 4 5\n").unwrap();
        let cloud = sample_surface(&mesh, 2048, 5).unwrap();
        let first = cloud.source_face.iter().filter(|&&f| f == 0).count() as f64;
        // binomial(2048, 1/4): mean 512, sigma sqrt(2048 * 0.25 * 0.75) = 19.6
        let sigma = (2048.0_f64 * 0.25 * 0.75).sqrt();
        assert!((first - 512.0).abs() <= 3.0 * sigma, "face-0 count {first}");
        assert!(((2048.0 - first) - 1536.0).abs() <= 3.0 * sigma);
    }

    #[test]
    fn degenerate_only_mesh_errors() {
        let mesh = load_mesh(b"v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n").unwrap();
        assert!(matches!(sample_surface(&mesh, 10, 0), Err(Error::Degenerate(_))));
        assert!(sample_surface(&unit_square(), 0, 0).is_err());
    }

    #[test]
    fn degenerate_faces_never_sampled() {
        let mesh = load_mesh(b"v 0 0 0\nv 1 0 0\nv 2 0 0\nv 0 1 0\nf 1 2 3\nf 1 2 4\n").unwrap();
        let cloud = sample_surface(&mesh, 500, 9).unwrap();
        assert!(cloud.source_face.iter().all(|&f| f == 1));
    }
}
