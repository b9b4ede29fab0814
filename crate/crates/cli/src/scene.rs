use std::fs;
use std::path::{Path, PathBuf};

use mlocond::geometry::{load_mesh, RigidTransform, TriMesh};
use mlocond::handmodel::{load_hand_model_as, make_toy_hand, HandModel, HandPose, PosedHand, Side};
use mlocond::raster::Camera;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

/// Built-in toy hand in place of a model asset path.
pub const TOY_MODEL: &str = "TOY";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub camera: Camera,
    pub frames: usize,
    #[serde(default)]
    pub object: Option<ObjectSpec>,
    #[serde(default)]
    pub left_hand: Option<HandSpec>,
    #[serde(default)]
    pub right_hand: Option<HandSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    /// OBJ path, relative to the scene file
    pub mesh: String,
    pub poses: Vec<RigidTransform>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandSpec {
    /// asset path relative to the scene file, or `TOY`
    pub model: String,
    pub poses: Vec<HandPose>,
}

pub struct Scene {
    pub camera: Camera,
    pub frames: usize,
    pub object: Option<(TriMesh, Vec<RigidTransform>)>,
    pub left: Option<(HandModel, Vec<HandPose>)>,
    pub right: Option<(HandModel, Vec<HandPose>)>,
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(&path.display().to_string(), e))
}

fn load_hand(base: &Path, spec: HandSpec, side: Side, frames: usize) -> CliResult<(HandModel, Vec<HandPose>)> {
    let model = if spec.model == TOY_MODEL {
        let toy = make_toy_hand();
        if side == Side::Left {
            toy.mirrored()
        } else {
            toy
        }
    } else {
        load_hand_model_as(&read(&resolve(base, &spec.model))?, side)?
    };
    if spec.poses.len() != frames {
        return Err(CliError::Validation(format!(
            "{} hand has {} poses for {frames} frames",
            side.name(),
            spec.poses.len()
        )));
    }
    let poses = spec.poses.into_iter().map(|p| p.filled_for(&model)).collect::<Vec<_>>();
    for (t, p) in poses.iter().enumerate() {
        p.validate(&model).map_err(|e| CliError::Validation(format!("{} hand frame {t}: {e}", side.name())))?;
    }
    Ok((model, poses))
}

impl Scene {
    pub fn load(path: &Path) -> CliResult<Scene> {
        let bytes = read(path)?;
        let spec: SceneSpec =
            serde_json::from_slice(&bytes).map_err(|e| CliError::Validation(format!("scene {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        spec.camera.validate()?;
        if spec.frames == 0 {
            return Err(CliError::Validation("scene needs at least one frame".into()));
        }
        if spec.object.is_none() && spec.left_hand.is_none() && spec.right_hand.is_none() {
            return Err(CliError::Validation("scene has neither hands nor object".into()));
        }
        let object = match spec.object {
            Some(o) => {
                let mesh = load_mesh(&read(&resolve(base, &o.mesh))?)?;
                if o.poses.len() != spec.frames {
                    return Err(CliError::Validation(format!(
                        "object has {} poses for {} frames",
                        o.poses.len(),
                        spec.frames
                    )));
                }
                for p in &o.poses {
                    p.validate()?;
                }
                Some((mesh.with_computed_normals(), o.poses))
            }
            None => None,
        };
        let left = spec.left_hand.map(|h| load_hand(base, h, Side::Left, spec.frames)).transpose()?;
        let right = spec.right_hand.map(|h| load_hand(base, h, Side::Right, spec.frames)).transpose()?;
        Ok(Scene { camera: spec.camera, frames: spec.frames, object, left, right })
    }

    /// Posed entities of frame `t`.
    pub fn frame(&self, t: usize) -> CliResult<(Option<PosedHand>, Option<PosedHand>, Option<TriMesh>)> {
        let pose = |h: &Option<(HandModel, Vec<HandPose>)>| -> CliResult<Option<PosedHand>> {
            h.as_ref().map(|(m, p)| m.pose(&p[t]).map_err(CliError::from)).transpose()
        };
        let object = self.object.as_ref().map(|(m, p)| m.transformed(&p[t]));
        Ok((pose(&self.left)?, pose(&self.right)?, object))
    }
}
