use mlocond::geometry::TriMesh;
use mlocond::objrep::{canonical_cameras, render_reference_views, simulate_motion, MotionConfig, ViewName};
use mlocond::Vec3;

/// Asymmetric solid: a box with one corner pulled out, so each side looks
/// different.
fn lopsided() -> TriMesh {
    let mesh = mlocond::geometry::shapes::flat_box(Vec3::new(0.1, 0.07, 0.05));
    let verts = mesh
        .vertices()
        .iter()
        .map(|v| if v.x > 0.0 && v.y > 0.0 && v.z > 0.0 { v * 1.6 } else { *v })
        .collect();
    TriMesh::new(verts, mesh.faces().to_vec()).unwrap()
}

fn view(name: ViewName) -> usize {
    ViewName::ALL.iter().position(|&v| v == name).unwrap()
}

#[test]
fn quarter_turn_about_up_permutes_side_views() {
    let mesh = lopsided();
    // exact coordinate permutation for a +90° turn about y: (x, y, z) → (z, y, −x)
    let turned_verts = mesh.vertices().iter().map(|v| Vec3::new(v.z, v.y, -v.x)).collect();
    let turned = TriMesh::new(turned_verts, mesh.faces().to_vec()).unwrap();
    let res = 48;
    let a = render_reference_views(&mesh, &canonical_cameras(&mesh, res, 1.2).unwrap()).unwrap();
    let b = render_reference_views(&turned, &canonical_cameras(&turned, res, 1.2).unwrap()).unwrap();
    // what faced +z now faces +x, and so on around the circle
    for (from, to) in [(ViewName::Front, ViewName::Right), (ViewName::Right, ViewName::Back), (ViewName::Back, ViewName::Left), (ViewName::Left, ViewName::Front)] {
        let (x, y) = (&a[view(from)], &b[view(to)]);
        let differing = x.data.iter().zip(&y.data).filter(|(p, q)| p.iter().zip(q.iter()).any(|(s, t)| (s - t).abs() > 1e-9)).count();
        assert!(differing * 100 <= x.data.len(), "{from:?} → {to:?}: {differing} pixels differ");
    }
    let same = a[view(ViewName::Front)].data == a[view(ViewName::Right)].data;
    assert!(!same, "test mesh must not be symmetric");
}

#[test]
fn every_view_sees_the_whole_object() {
    let mesh = lopsided();
    let views = render_reference_views(&mesh, &canonical_cameras(&mesh, 32, 1.0).unwrap()).unwrap();
    for img in &views {
        let border = (0..32).flat_map(|i| [img.get(i, 0), img.get(i, 31), img.get(0, i), img.get(31, i)]);
        assert!(border.into_iter().all(|p| p == [0.0; 3]));
    }
}

#[test]
fn simulated_motion_respects_rate_and_box() {
    let config = MotionConfig::default();
    for seed in 0..10 {
        let motion = simulate_motion(seed, 61, &config).unwrap();
        assert!(motion.step_angles().iter().all(|&a| a <= config.rot_rate_max + 1e-12));
        for l in &motion.translations {
            assert!((0..3).all(|k| l[k] >= config.trans_min[k] && l[k] <= config.trans_max[k]));
        }
    }
}
