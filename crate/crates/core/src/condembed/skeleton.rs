use super::tensor::FeatureMap;
use crate::{Error, Result};

/// Body keypoints in the 18-joint layout (nose, neck, right arm, left arm,
/// right leg, left leg, eyes, ears).
pub const SKELETON_JOINTS: usize = 18;

pub const SKELETON_LIMBS: [(usize, usize); 17] = [
    (1, 2),
    (1, 5),
    (2, 3),
    (3, 4),
    (5, 6),
    (6, 7),
    (1, 8),
    (8, 9),
    (9, 10),
    (1, 11),
    (11, 12),
    (12, 13),
    (1, 0),
    (0, 14),
    (14, 16),
    (0, 15),
    (15, 17),
];

/// Fully saturated color for limb `i`, evenly spaced in hue.
fn limb_color(i: usize) -> [f64; 3] {
    let h = 6.0 * i as f64 / SKELETON_LIMBS.len() as f64;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    match h as usize {
        0 => [1.0, x, 0.0],
        1 => [x, 1.0, 0.0],
        2 => [0.0, 1.0, x],
        3 => [0.0, x, 1.0],
        4 => [x, 0.0, 1.0],
        _ => [1.0, 0.0, x],
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (ex, ey) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    (ex * ex + ey * ey).sqrt()
}

/// 3-channel skeleton map: every limb with both endpoints present is drawn
/// as a colored capsule of the given pixel width; later limbs overwrite
/// earlier ones. Background is zero.
pub fn rasterize_skeleton(keypoints: &[Option<[f64; 2]>], width: usize, height: usize, thickness: f64) -> Result<FeatureMap> {
    if keypoints.len() != SKELETON_JOINTS {
        return Err(Error::shape(format!("expected {SKELETON_JOINTS} keypoints, got {}", keypoints.len())));
    }
    if !(thickness > 0.0) {
        return Err(Error::invalid("skeleton", "line thickness must be positive"));
    }
    let mut map = FeatureMap::zeros(height, width, 3);
    let r = 0.5 * thickness;
    for (li, &(ja, jb)) in SKELETON_LIMBS.iter().enumerate() {
        let (Some(a), Some(b)) = (keypoints[ja], keypoints[jb]) else { continue };
        let color = limb_color(li);
        let x0 = (a[0].min(b[0]) - r).floor().max(0.0) as usize;
        let x1 = ((a[0].max(b[0]) + r).ceil().max(0.0) as usize).min(width);
        let y0 = (a[1].min(b[1]) - r).floor().max(0.0) as usize;
        let y1 = ((a[1].max(b[1]) + r).ceil().max(0.0) as usize).min(height);
        for y in y0..y1 {
            for x in x0..x1 {
                if segment_distance([x as f64 + 0.5, y as f64 + 0.5], a, b) <= r {
                    let i = map.index(y, x, 0);
                    map.data[i..i + 3].copy_from_slice(&color);
                }
            }
        }
    }
    Ok(map)
}
