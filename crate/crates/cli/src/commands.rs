use std::fs;
use std::path::{Path, PathBuf};

use mlocond::condembed::{rasterize_skeleton, run_embed_check, FeatureMap, SKELETON_JOINTS};
use mlocond::geometry::{
    kabsch_solve, load_mesh, refine_marker_correspondence, residual_rms, MarkerTracks, RefineOptions, RigidTransform,
};
use mlocond::io::{decode_ppm, encode_pgm16, encode_ppm, read_mlot, write_mlot, Tensor, TensorData};
use mlocond::objrep::{build_object_rep_with, canonical_cameras, simulate_motion, MotionConfig, ObjectRepConfig};
use mlocond::pipeline::{pack_conditions, plan_windows, ConditionInputs, ConditionKind, Slot, WindowMode};
use mlocond::raster::{build_mlo, LayerStack, LAYER_COUNT, LAYER_ORDER};
use mlocond::Vec3;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::scene::Scene;

/// Margin of the default scene camera, looser than the reference views so
/// moving objects stay in frame.
pub const SCENE_CAMERA_MARGIN: f64 = 2.0;
/// Line width of rasterized skeleton limbs, in pixels.
pub const SKELETON_THICKNESS: f64 = 4.0;
/// Slots that build-objrep stores as tensors for later packing.
const OBJREP_SLOTS: [Slot; 4] = [Slot::ObjectViews, Slot::ObjectPoints, Slot::ObjectMotion, Slot::ObjectNormals];

fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(&path.display().to_string(), e))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(&path.display().to_string(), e))
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(&path.display().to_string(), e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct MloManifest {
    frames: usize,
    width: usize,
    height: usize,
    layers: Vec<String>,
    tensors: Vec<String>,
    tensor_shape: [usize; 4],
    channels: [&'static str; 4],
}

pub fn render_mlo(scene_path: &Path, out: &Path, width: usize, height: usize) -> CliResult<()> {
    let mut scene = Scene::load(scene_path)?;
    scene.camera = scene.camera.resized(width, height);
    scene.camera.validate()?;
    create_dir(out)?;
    let preview = out.join("preview");
    create_dir(&preview)?;
    let mut tensors = Vec::with_capacity(scene.frames);
    for t in 0..scene.frames {
        let (left, right, object) = scene.frame(t)?;
        let stack = build_mlo(left.as_ref(), right.as_ref(), object.as_ref(), &scene.camera)?;
        let name = format!("mlo_{t:04}.mlot");
        write_mlot(out.join(&name), &stack.to_tensor())?;
        write_previews(&preview, t, &stack)?;
        tensors.push(name);
    }
    let manifest = MloManifest {
        frames: scene.frames,
        width,
        height,
        layers: LAYER_ORDER.iter().map(|l| l.name()).collect(),
        tensors,
        tensor_shape: [LAYER_COUNT, height, width, 4],
        channels: ["normal_x", "normal_y", "normal_z", "confidence"],
    };
    write(&out.join("manifest.json"), to_json(&manifest))
}

fn write_previews(dir: &Path, t: usize, stack: &LayerStack) -> CliResult<()> {
    for (slot, (layer, conf)) in LAYER_ORDER.iter().zip(stack.layers.iter().zip(&stack.confidence)) {
        let stem = format!("frame_{t:04}_{}", slot.name());
        write(&dir.join(format!("{stem}_normal.ppm")), encode_ppm(layer.width, layer.height, &layer.normal_map))?;
        write(&dir.join(format!("{stem}_confidence.pgm")), encode_pgm16(layer.width, layer.height, conf))?;
    }
    Ok(())
}

pub struct ObjrepArgs<'a> {
    pub mesh: &'a Path,
    pub frames: usize,
    pub seed: u64,
    pub out: &'a Path,
    pub width: usize,
    pub height: usize,
    pub view_resolution: usize,
}

pub fn build_objrep(args: &ObjrepArgs) -> CliResult<()> {
    let mesh = load_mesh(&read(args.mesh)?)?;
    if args.frames == 0 {
        return Err(CliError::Validation("--frames must be positive".into()));
    }
    let square = args.width.max(args.height);
    let scene_camera = canonical_cameras(&mesh, square, SCENE_CAMERA_MARGIN)?[0].resized(args.width, args.height);
    let config = ObjectRepConfig { view_resolution: args.view_resolution, ..Default::default() };
    let rep = build_object_rep_with(&mesh, args.frames, args.seed, &scene_camera, &config)?;
    rep.write_dir(args.out)?;
    let inputs = ConditionInputs::default().with_object_rep(&rep)?;
    for slot in OBJREP_SLOTS {
        write_mlot(args.out.join(format!("{}.mlot", slot.name())), &inputs.tensors[&slot])?;
    }
    write(&args.out.join("scene_camera.json"), to_json(&scene_camera))
}

pub fn simulate(frames: usize, seed: u64, config: MotionConfig, out: &Path) -> CliResult<()> {
    let motion = simulate_motion(seed, frames, &config)?;
    create_dir(out)?;
    write(&out.join("motion.json"), motion.to_json())
}

pub struct PackArgs<'a> {
    pub kind: &'a str,
    pub mlo: Option<&'a Path>,
    pub objrep: Option<&'a Path>,
    pub background: Option<&'a Path>,
    pub background_role: &'a str,
    pub first_frame: Option<&'a Path>,
    pub skeleton: Option<&'a Path>,
    pub frames: Option<usize>,
    pub width: usize,
    pub height: usize,
    pub out: &'a Path,
}

/// Per-frame 2D skeleton keypoints; `null` marks an undetected joint.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SkeletonFile {
    frames: Vec<Vec<Option<[f64; 2]>>>,
}

fn read_mlo_dir(dir: &Path) -> CliResult<Tensor> {
    let mut names: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(&dir.display().to_string(), e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("mlo_") && n.ends_with(".mlot"))
        })
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(CliError::Validation(format!("no mlo_*.mlot tensors in {}", dir.display())));
    }
    let mut shape = None;
    let mut data = Vec::new();
    for path in &names {
        let t = read_mlot(path)?;
        match &shape {
            None => shape = Some(t.shape().to_vec()),
            Some(s) if s.as_slice() != t.shape() => {
                return Err(CliError::Validation(format!("{} has shape {:?}, expected {s:?}", path.display(), t.shape())))
            }
            _ => {}
        }
        match t.data() {
            TensorData::F32(v) => data.extend_from_slice(v),
            TensorData::F64(_) => return Err(CliError::Validation(format!("{} is not f32", path.display()))),
        }
    }
    let mut full = vec![names.len()];
    full.extend(shape.unwrap_or_default());
    Ok(Tensor::f32(full, data)?)
}

pub fn pack(args: &PackArgs) -> CliResult<()> {
    let kind = ConditionKind::parse(args.kind)?;
    let mut inputs = ConditionInputs { frames: args.frames, ..Default::default() };
    if let Some(dir) = args.mlo {
        inputs.set(Slot::Mlo, read_mlo_dir(dir)?);
    }
    if let Some(dir) = args.objrep {
        for slot in OBJREP_SLOTS {
            inputs.set(slot, read_mlot(dir.join(format!("{}.mlot", slot.name())))?);
        }
    }
    if let Some(path) = args.background {
        inputs = inputs.with_background(&decode_ppm(&read(path)?)?, args.background_role);
    }
    if let Some(path) = args.first_frame {
        inputs = inputs.with_first_frame_object(&decode_ppm(&read(path)?)?);
    }
    if let Some(path) = args.skeleton {
        let file: SkeletonFile = serde_json::from_slice(&read(path)?)
            .map_err(|e| CliError::Validation(format!("skeleton {}: {e}", path.display())))?;
        let (w, h) = inputs
            .tensors
            .get(&Slot::Mlo)
            .map(|t| (t.shape()[3], t.shape()[2]))
            .unwrap_or((args.width, args.height));
        let maps = file
            .frames
            .iter()
            .enumerate()
            .map(|(t, kp)| {
                if kp.len() != SKELETON_JOINTS {
                    return Err(CliError::Validation(format!(
                        "skeleton frame {t} has {} joints, expected {SKELETON_JOINTS}",
                        kp.len()
                    )));
                }
                Ok(rasterize_skeleton(kp, w, h, SKELETON_THICKNESS)?)
            })
            .collect::<CliResult<Vec<FeatureMap>>>()?;
        inputs = inputs.with_skeleton(&maps)?;
    }
    let pack = pack_conditions(kind, inputs)?;
    pack.write_dir(args.out)?;
    Ok(())
}

pub fn windows(frames: usize, window: usize, stride: usize, mode: WindowMode, out: Option<&Path>) -> CliResult<String> {
    let text = plan_windows(frames, window, stride, mode)?.to_text();
    if let Some(dir) = out {
        create_dir(dir)?;
        write(&dir.join("windows.txt"), &text)?;
    }
    Ok(text)
}

#[derive(Serialize)]
struct PoseSolution {
    method: &'static str,
    poses: Vec<RigidTransform>,
    /// per-frame marker residual RMS
    rms: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    offsets: Option<Vec<[f64; 3]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    objective: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OffsetsFile {
    offsets: Vec<[f64; 3]>,
}

pub fn solve_pose(markers: &Path, mesh: Option<&Path>, init: Option<&Path>, out: &Path) -> CliResult<()> {
    let tracks = MarkerTracks::from_json(&read(markers)?)?.frames();
    let solution = match mesh {
        None => {
            // Poses relative to the first frame's marker layout.
            let reference = &tracks[0];
            let poses = tracks.iter().map(|f| kabsch_solve(reference, f)).collect::<mlocond::Result<Vec<_>>>()?;
            let rms = poses.iter().zip(&tracks).map(|(p, f)| residual_rms(p, reference, f)).collect();
            PoseSolution { method: "kabsch", poses, rms, offsets: None, objective: None }
        }
        Some(mesh_path) => {
            let mesh = load_mesh(&read(mesh_path)?)?;
            let init_offsets: Vec<Vec3> = match init {
                Some(p) => {
                    let file: OffsetsFile = serde_json::from_slice(&read(p)?)
                        .map_err(|e| CliError::Validation(format!("offsets {}: {e}", p.display())))?;
                    file.offsets.into_iter().map(Vec3::from).collect()
                }
                None => tracks[0].clone(),
            };
            let r = refine_marker_correspondence(&mesh, &tracks, &init_offsets, RefineOptions::default())?;
            let rms = r.poses.iter().zip(&tracks).map(|(p, f)| residual_rms(p, &r.offsets, f)).collect();
            PoseSolution {
                method: "refine",
                offsets: Some(r.offsets.iter().map(|o| [o.x, o.y, o.z]).collect()),
                objective: Some(r.objective),
                poses: r.poses,
                rms,
            }
        }
    };
    create_dir(out)?;
    write(&out.join("poses.json"), to_json(&solution))
}

/// Returns the report text and whether every check passed.
pub fn embed_check(seed: u64, out: Option<&Path>) -> CliResult<(String, bool)> {
    let report = run_embed_check(seed);
    let text = report.to_text();
    if let Some(dir) = out {
        create_dir(dir)?;
        write(&dir.join("embed_check.txt"), &text)?;
    }
    Ok((text, report.all_passed()))
}
