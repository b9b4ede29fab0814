use mlocond::io::Tensor;
use mlocond::pipeline::{overlap_average, pack_conditions, plan_windows, read_pack_dir, ConditionInputs, ConditionKind, Slot, WindowMode};

#[test]
fn pack_directory_roundtrips() {
    let mut inputs = ConditionInputs { frames: Some(2), ..Default::default() };
    let bg: Vec<f32> = (0..4 * 6 * 3).map(|i| i as f32 / 72.0).collect();
    inputs.set(Slot::BackgroundRef, Tensor::f32(vec![4, 6, 3], bg).unwrap());
    inputs.background_role = Some("first_frame".into());
    let pack = pack_conditions(ConditionKind::Human, inputs).unwrap();
    let dir = tempfile::TempDir::new().unwrap();
    pack.write_dir(dir.path()).unwrap();
    let (manifest, tensors) = read_pack_dir(dir.path()).unwrap();
    assert_eq!(manifest, pack.manifest());
    assert_eq!(manifest.background_role, "first_frame");
    for slot in Slot::ALL {
        assert_eq!(&tensors[slot.name()], &pack.tensors[&slot]);
    }
    assert_eq!(tensors["mlo"].shape(), &[2, 13, 4, 6, 4]);
}

#[test]
fn tail_plan_covers_every_frame_and_ends_on_last() {
    for n in 16..80 {
        let plan = plan_windows(n, 16, 5, WindowMode::Tail).unwrap();
        assert_eq!(plan.windows.last().unwrap().1, n);
        assert!(plan.coverage.iter().all(|&c| c >= 1));
        let outs: Vec<Vec<Vec<f64>>> = plan.windows.iter().map(|&(a, b)| (a..b).map(|f| vec![f as f64]).collect()).collect();
        let avg = overlap_average(&outs, &plan).unwrap();
        assert!(avg.iter().enumerate().all(|(f, v)| v[0] == f as f64));
    }
}

#[test]
fn invalid_plans_are_rejected() {
    assert!(plan_windows(10, 16, 8, WindowMode::Strict).is_err());
    assert!(plan_windows(24, 16, 0, WindowMode::Strict).is_err());
    assert!(plan_windows(24, 16, 17, WindowMode::Tail).is_err());
    assert!(plan_windows(25, 16, 8, WindowMode::Strict).is_err());
}
