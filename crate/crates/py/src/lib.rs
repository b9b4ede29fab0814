//! Python bindings. Arrays cross the boundary as nested lists; tensors as
//! MLOT bytes.

use mlocond::condembed::run_embed_check;
use mlocond::geometry::shapes::{flat_box, icosphere};
use mlocond::geometry::{kabsch_solve, load_mesh, sample_surface, write_obj, RigidTransform, TriMesh};
use mlocond::handmodel::{load_hand_model_as, make_toy_hand, HandModel, HandPart, HandPose, PosedHand, Side};
use mlocond::io::{write_mlot, Tensor};
use mlocond::objrep::{simulate_motion, MotionConfig};
use mlocond::pipeline::{overlap_average, plan_windows, WindowMode};
use mlocond::raster::{build_mlo, composite_layers, look_at, Camera, LayerStack, RenderTarget, LAYER_ORDER};
use mlocond::Vec3;
use pyo3::exceptions::{PyIOError, PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

fn err(e: mlocond::Error) -> PyErr {
    if e.is_io() {
        PyIOError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn side_of(name: &str) -> PyResult<Side> {
    match name.to_ascii_lowercase().as_str() {
        "left" => Ok(Side::Left),
        "right" => Ok(Side::Right),
        _ => Err(PyValueError::new_err(format!("side must be 'left' or 'right', got {name:?}"))),
    }
}

fn part_of(name: &str) -> PyResult<HandPart> {
    HandPart::ALL
        .into_iter()
        .find(|p| p.name() == name.to_ascii_lowercase())
        .ok_or_else(|| PyValueError::new_err(format!("unknown hand part {name:?}")))
}

fn points(v: &[Vec3]) -> Vec<[f64; 3]> {
    v.iter().map(|p| [p.x, p.y, p.z]).collect()
}

fn rigid(rotation: [f64; 4], translation: [f64; 3]) -> PyResult<RigidTransform> {
    RigidTransform::new(rotation, translation).map_err(err)
}

#[pyclass(name = "Mesh", frozen, from_py_object)]
#[derive(Clone)]
struct PyMesh(TriMesh);

#[pymethods]
impl PyMesh {
    #[new]
    fn new(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> PyResult<Self> {
        Ok(PyMesh(TriMesh::new(vertices.into_iter().map(Vec3::from).collect(), faces).map_err(err)?))
    }

    #[staticmethod]
    fn from_obj(text: &str) -> PyResult<Self> {
        Ok(PyMesh(load_mesh(text.as_bytes()).map_err(err)?))
    }

    #[staticmethod]
    fn icosphere(subdivisions: usize, radius: f64) -> Self {
        PyMesh(icosphere(subdivisions, radius))
    }

    #[staticmethod]
    fn box_mesh(half_extents: [f64; 3]) -> Self {
        PyMesh(flat_box(Vec3::from(half_extents)))
    }

    #[getter]
    fn vertices(&self) -> Vec<[f64; 3]> {
        points(self.0.vertices())
    }

    #[getter]
    fn faces(&self) -> Vec<[usize; 3]> {
        self.0.faces().to_vec()
    }

    fn to_obj(&self) -> String {
        write_obj(&self.0)
    }

    /// Rotation as a quaternion `(a, b, c, w)`.
    fn transformed(&self, rotation: [f64; 4], translation: [f64; 3]) -> PyResult<Self> {
        Ok(PyMesh(self.0.transformed(&rigid(rotation, translation)?)))
    }

    fn total_area(&self) -> f64 {
        self.0.total_area()
    }

    /// Area-weighted surface samples and the face each came from.
    fn sample_surface(&self, count: usize, seed: u64) -> PyResult<(Vec<[f64; 3]>, Vec<usize>)> {
        let cloud = sample_surface(&self.0, count, seed).map_err(err)?;
        Ok((points(&cloud.points), cloud.source_face))
    }

    fn __repr__(&self) -> String {
        format!("Mesh(vertices={}, faces={})", self.0.vertices().len(), self.0.faces().len())
    }
}

#[pyclass(name = "Camera", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCamera(Camera);

#[pymethods]
impl PyCamera {
    /// Pinhole camera from a vertical field of view in degrees and a
    /// world-to-camera transform.
    #[new]
    #[pyo3(signature = (width, height, fov_y_deg, rotation=[0.0, 0.0, 0.0, 1.0], translation=[0.0, 0.0, 0.0], near=0.05, far=5.0))]
    fn new(
        width: usize,
        height: usize,
        fov_y_deg: f64,
        rotation: [f64; 4],
        translation: [f64; 3],
        near: f64,
        far: f64,
    ) -> PyResult<Self> {
        let cam = Camera::with_fov(width, height, fov_y_deg, rigid(rotation, translation)?, near, far);
        cam.validate().map_err(err)?;
        Ok(PyCamera(cam))
    }

    #[staticmethod]
    #[pyo3(signature = (width, height, fov_y_deg, eye, target, up=[0.0, -1.0, 0.0], near=0.05, far=5.0))]
    fn looking_at(
        width: usize,
        height: usize,
        fov_y_deg: f64,
        eye: [f64; 3],
        target: [f64; 3],
        up: [f64; 3],
        near: f64,
        far: f64,
    ) -> PyResult<Self> {
        let pose = look_at(&Vec3::from(eye), &Vec3::from(target), &Vec3::from(up)).map_err(err)?;
        let cam = Camera::with_fov(width, height, fov_y_deg, pose, near, far);
        cam.validate().map_err(err)?;
        Ok(PyCamera(cam))
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height
    }

    /// Pixel coordinates, or `None` at or behind the near plane.
    fn project(&self, point: [f64; 3]) -> Option<[f64; 2]> {
        self.0.project(&Vec3::from(point))
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("serializable")
    }
}

#[pyclass(name = "HandModel", frozen)]
struct PyHandModel(HandModel);

#[pymethods]
impl PyHandModel {
    /// Built-in toy hand; the left hand is the mirrored right hand.
    #[staticmethod]
    #[pyo3(signature = (side="right"))]
    fn toy(side: &str) -> PyResult<Self> {
        let right = make_toy_hand();
        Ok(PyHandModel(if side_of(side)? == Side::Left { right.mirrored() } else { right }))
    }

    #[staticmethod]
    #[pyo3(signature = (asset_json, side="right"))]
    fn from_json(asset_json: &str, side: &str) -> PyResult<Self> {
        Ok(PyHandModel(load_hand_model_as(asset_json.as_bytes(), side_of(side)?).map_err(err)?))
    }

    #[getter]
    fn joint_count(&self) -> usize {
        self.0.joint_count()
    }

    #[getter]
    fn shape_count(&self) -> usize {
        self.0.shape_count()
    }

    #[getter]
    fn side(&self) -> &'static str {
        self.0.side().name()
    }

    /// Poses the hand; empty `theta` or `beta` mean zeros.
    #[pyo3(signature = (theta=vec![], beta=vec![], translation=[0.0, 0.0, 0.0]))]
    fn pose(&self, theta: Vec<f64>, beta: Vec<f64>, translation: [f64; 3]) -> PyResult<PyPosedHand> {
        let pose = HandPose { theta, beta, root_translation: translation }.filled_for(&self.0);
        Ok(PyPosedHand(self.0.pose(&pose).map_err(err)?))
    }
}

#[pyclass(name = "PosedHand", frozen, from_py_object)]
#[derive(Clone)]
struct PyPosedHand(PosedHand);

#[pymethods]
impl PyPosedHand {
    #[getter]
    fn vertices(&self) -> Vec<[f64; 3]> {
        points(self.0.mesh.vertices())
    }

    #[getter]
    fn faces(&self) -> Vec<[usize; 3]> {
        self.0.mesh.faces().to_vec()
    }

    #[getter]
    fn joints(&self) -> Vec<[f64; 3]> {
        points(&self.0.joints)
    }

    /// Joints followed by the five fingertips.
    fn keypoints(&self) -> Vec<[f64; 3]> {
        points(&self.0.keypoints_3d())
    }

    fn part_faces(&self, part: &str) -> PyResult<Vec<usize>> {
        Ok(self.0.part_faces(part_of(part)?))
    }

    fn mesh(&self) -> PyMesh {
        PyMesh(self.0.mesh.clone())
    }
}

fn target_lists(t: &RenderTarget) -> (Vec<[f64; 3]>, Vec<f64>, Vec<bool>) {
    (t.normal_map.clone(), t.depth_map.clone(), t.mask.clone())
}

#[pyclass(name = "LayerStack", frozen)]
struct PyLayerStack(LayerStack);

#[pymethods]
impl PyLayerStack {
    #[staticmethod]
    fn layer_names() -> Vec<String> {
        LAYER_ORDER.iter().map(|l| l.name()).collect()
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height
    }

    /// `(normals, depth, mask)` of one layer, row-major; off-mask depth is
    /// infinite.
    fn layer(&self, index: usize) -> PyResult<(Vec<[f64; 3]>, Vec<f64>, Vec<bool>)> {
        let t = self.0.layers.get(index).ok_or_else(|| PyIndexError::new_err("layer index out of range"))?;
        Ok(target_lists(t))
    }

    fn confidence(&self, index: usize) -> PyResult<Vec<f64>> {
        self.0.confidence.get(index).cloned().ok_or_else(|| PyIndexError::new_err("layer index out of range"))
    }

    /// Nearest surface over all layers.
    fn composite(&self) -> (Vec<[f64; 3]>, Vec<f64>, Vec<bool>) {
        target_lists(&composite_layers(&self.0))
    }

    /// The `13 × H × W × 4` tensor as MLOT bytes.
    fn to_mlot<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.0.to_tensor().to_bytes())
    }

    fn save(&self, path: &str) -> PyResult<()> {
        write_mlot(path, &self.0.to_tensor()).map_err(err)
    }
}

#[pyfunction(name = "build_mlo")]
#[pyo3(signature = (camera, left=None, right=None, object=None))]
fn py_build_mlo(
    camera: &PyCamera,
    left: Option<PyPosedHand>,
    right: Option<PyPosedHand>,
    object: Option<PyMesh>,
) -> PyResult<PyLayerStack> {
    let object = object.map(|m| m.0.with_computed_normals());
    let stack =
        build_mlo(left.as_ref().map(|h| &h.0), right.as_ref().map(|h| &h.0), object.as_ref(), &camera.0).map_err(err)?;
    Ok(PyLayerStack(stack))
}

fn mode_of(mode: &str) -> PyResult<WindowMode> {
    match mode {
        "strict" => Ok(WindowMode::Strict),
        "tail" => Ok(WindowMode::Tail),
        _ => Err(PyValueError::new_err(format!("mode must be 'strict' or 'tail', got {mode:?}"))),
    }
}

/// Half-open `(start, end)` windows.
#[pyfunction(name = "plan_windows")]
#[pyo3(signature = (frames, window=16, stride=8, mode="strict"))]
fn py_plan_windows(frames: usize, window: usize, stride: usize, mode: &str) -> PyResult<Vec<(usize, usize)>> {
    Ok(plan_windows(frames, window, stride, mode_of(mode)?).map_err(err)?.windows)
}

/// Per-frame mean of overlapping window outputs; `outputs[p][k]` is frame
/// `k` of window `p`.
#[pyfunction(name = "overlap_average")]
#[pyo3(signature = (outputs, frames, window=16, stride=8, mode="strict"))]
fn py_overlap_average(
    outputs: Vec<Vec<Vec<f64>>>,
    frames: usize,
    window: usize,
    stride: usize,
    mode: &str,
) -> PyResult<Vec<Vec<f64>>> {
    let plan = plan_windows(frames, window, stride, mode_of(mode)?).map_err(err)?;
    overlap_average(&outputs, &plan).map_err(err)
}

/// Rigid `(quaternion, translation)` mapping `src` onto `dst`.
#[pyfunction(name = "kabsch")]
fn py_kabsch(src: Vec<[f64; 3]>, dst: Vec<[f64; 3]>) -> PyResult<([f64; 4], [f64; 3])> {
    let to = |v: Vec<[f64; 3]>| v.into_iter().map(Vec3::from).collect::<Vec<_>>();
    let t = kabsch_solve(&to(src), &to(dst)).map_err(err)?;
    Ok((t.rotation, t.translation))
}

/// Per-frame quaternions and translations.
#[pyfunction(name = "simulate_motion")]
#[pyo3(signature = (seed, frames, rot_rate_max=None, trans_bound=None))]
fn py_simulate_motion(
    seed: u64,
    frames: usize,
    rot_rate_max: Option<f64>,
    trans_bound: Option<f64>,
) -> PyResult<(Vec<[f64; 4]>, Vec<[f64; 3]>)> {
    let mut config = MotionConfig::default();
    if let Some(r) = rot_rate_max {
        config.rot_rate_max = r;
    }
    if let Some(b) = trans_bound {
        config.trans_min = [-b; 3];
        config.trans_max = [b; 3];
    }
    let m = simulate_motion(seed, frames, &config).map_err(err)?;
    Ok((m.rotations, m.translations))
}

/// `(report_text, all_passed)`.
#[pyfunction(name = "embed_check")]
#[pyo3(signature = (seed=0))]
fn py_embed_check(py: Python<'_>, seed: u64) -> (String, bool) {
    let report = py.detach(|| run_embed_check(seed));
    (report.to_text(), report.all_passed())
}

/// `(shape, values)` of an MLOT payload.
#[pyfunction(name = "read_mlot")]
fn py_read_mlot(data: &[u8]) -> PyResult<(Vec<usize>, Vec<f64>)> {
    let t = Tensor::from_bytes(data).map_err(err)?;
    Ok((t.shape().to_vec(), t.to_f64_vec()))
}

#[pymodule]
fn pymlocond(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyCamera>()?;
    m.add_class::<PyHandModel>()?;
    m.add_class::<PyPosedHand>()?;
    m.add_class::<PyLayerStack>()?;
    m.add_function(wrap_pyfunction!(py_build_mlo, m)?)?;
    m.add_function(wrap_pyfunction!(py_plan_windows, m)?)?;
    m.add_function(wrap_pyfunction!(py_overlap_average, m)?)?;
    m.add_function(wrap_pyfunction!(py_kabsch, m)?)?;
    m.add_function(wrap_pyfunction!(py_simulate_motion, m)?)?;
    m.add_function(wrap_pyfunction!(py_embed_check, m)?)?;
    m.add_function(wrap_pyfunction!(py_read_mlot, m)?)?;
    m.add("LAYER_COUNT", mlocond::raster::LAYER_COUNT)?;
    Ok(())
}
