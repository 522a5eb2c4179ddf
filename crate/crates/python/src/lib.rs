//! Python bindings. Rasters cross the boundary as flat row-major lists.

use lgimap_core::bridgemath::{self, LatentVec};
use lgimap_core::io::{self as lio, SceneConfig};
use lgimap_core::synth;
use lgimap_core::{self as core, metrics, Interp, MaskKind, Point3};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: core::Error) -> PyErr {
    match e {
        core::Error::Io(io) => PyOSError::new_err(io.to_string()),
        e if e.is_input_error() => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

#[pyclass(name = "CameraIntrinsics", module = "lgimap", from_py_object)]
#[derive(Clone)]
struct PyIntrinsics(core::CameraIntrinsics);

#[pymethods]
impl PyIntrinsics {
    #[new]
    fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> PyResult<Self> {
        core::CameraIntrinsics::new(fx, fy, cx, cy, width, height)
            .map(PyIntrinsics)
            .map_err(err)
    }

    #[staticmethod]
    fn default_for(width: usize, height: usize) -> Self {
        PyIntrinsics(core::CameraIntrinsics::default_for(width, height))
    }

    fn lift(&self, u: f64, v: f64, d: f64) -> PyResult<(f64, f64, f64)> {
        let p = self.0.lift(u, v, d).map_err(err)?;
        Ok((p.x, p.y, p.z))
    }

    fn project(&self, x: f64, y: f64, z: f64) -> PyResult<(f64, f64)> {
        self.0.project(Point3::new(x, y, z)).map_err(err)
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height
    }

    fn __repr__(&self) -> String {
        let k = &self.0;
        format!(
            "CameraIntrinsics(fx={}, fy={}, cx={}, cy={}, width={}, height={})",
            k.fx, k.fy, k.cx, k.cy, k.width, k.height
        )
    }
}

#[pyclass(name = "DepthMap", module = "lgimap", from_py_object)]
#[derive(Clone)]
struct PyDepth(core::DepthMap);

#[pymethods]
impl PyDepth {
    #[new]
    fn new(width: usize, height: usize, values: Vec<f32>) -> PyResult<Self> {
        core::DepthMap::new(width, height, values).map(PyDepth).map_err(err)
    }

    #[staticmethod]
    fn read_pfm(path: &str) -> PyResult<Self> {
        let pfm = lio::read_pfm(path).map_err(err)?;
        lio::pfm_to_depth(&pfm).map(PyDepth).map_err(err)
    }

    fn write_pfm(&self, path: &str) -> PyResult<()> {
        lio::write_pfm(path, &lio::depth_to_pfm(&self.0)).map_err(err)
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    fn values(&self) -> Vec<f32> {
        self.0.values().to_vec()
    }

    fn valid_count(&self) -> usize {
        self.0.valid_count()
    }
}

#[pyclass(name = "LightSpec", module = "lgimap", from_py_object)]
#[derive(Clone)]
struct PyLight(core::LightSpec);

#[pymethods]
impl PyLight {
    #[staticmethod]
    fn point(x: f64, y: f64, z: f64) -> Self {
        PyLight(core::LightSpec::point(Point3::new(x, y, z)))
    }

    /// `direction` points toward the light.
    #[staticmethod]
    fn directional(x: f64, y: f64, z: f64) -> PyResult<Self> {
        core::LightSpec::directional(Point3::new(x, y, z))
            .map(PyLight)
            .map_err(err)
    }

    #[staticmethod]
    fn from_angles(azimuth: f64, elevation: f64, distance: f64, anchor: (f64, f64, f64)) -> PyResult<Self> {
        core::light_from_angles(azimuth, elevation, distance, Point3::new(anchor.0, anchor.1, anchor.2))
            .map(PyLight)
            .map_err(err)
    }

    #[getter]
    fn is_point(&self) -> bool {
        matches!(self.0.kind, core::LightKind::Point { .. })
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

#[pyclass(name = "LgiConfig", module = "lgimap", from_py_object)]
#[derive(Clone)]
struct PyLgiConfig(core::LgiConfig);

#[pymethods]
impl PyLgiConfig {
    /// Angles in radians.
    #[new]
    #[pyo3(signature = (n_samples = core::lgi::DEFAULT_N_SAMPLES, eta = core::lgi::DEFAULT_ETA, softness_beta = core::lgi::DEFAULT_SOFTNESS_BETA, interp = "bilinear"))]
    fn new(n_samples: usize, eta: f64, softness_beta: f64, interp: &str) -> PyResult<Self> {
        let interp = match interp {
            "bilinear" => Interp::Bilinear,
            "nearest" => Interp::Nearest,
            other => return Err(PyValueError::new_err(format!("unknown interp `{other}`"))),
        };
        let mut cfg = core::LgiConfig::default()
            .with_samples(n_samples)
            .with_eta(eta)
            .with_interp(interp);
        cfg.softness_beta = softness_beta;
        cfg.validate().map_err(err)?;
        Ok(PyLgiConfig(cfg))
    }

    #[getter]
    fn n_samples(&self) -> usize {
        self.0.n_samples
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.0.eta
    }

    #[getter]
    fn softness_beta(&self) -> f64 {
        self.0.softness_beta
    }
}

#[pyclass(name = "LgiMaps", module = "lgimap")]
struct PyLgiMaps(core::LgiMaps);

#[pymethods]
impl PyLgiMaps {
    #[getter]
    fn width(&self) -> usize {
        self.0.width
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height
    }

    #[getter]
    fn c1(&self) -> Vec<f64> {
        self.0.c1.clone()
    }

    #[getter]
    fn c2(&self) -> Vec<f64> {
        self.0.c2.clone()
    }

    #[getter]
    fn c3(&self) -> Vec<f64> {
        self.0.c3.clone()
    }

    #[getter]
    fn valid(&self) -> Vec<bool> {
        self.0.valid.clone()
    }

    fn digest(&self) -> String {
        lio::digest_lgi(&self.0)
    }
}

#[pyclass(name = "ShadowMask", module = "lgimap", from_py_object)]
#[derive(Clone)]
struct PyMask(core::ShadowMask);

#[pymethods]
impl PyMask {
    #[new]
    #[pyo3(signature = (width, height, values, soft = false))]
    fn new(width: usize, height: usize, values: Vec<f64>, soft: bool) -> PyResult<Self> {
        let kind = if soft { MaskKind::Soft } else { MaskKind::Hard };
        core::ShadowMask::new(width, height, values, kind)
            .map(PyMask)
            .map_err(err)
    }

    #[staticmethod]
    fn read_png(path: &str) -> PyResult<Self> {
        lio::read_mask_png(path).map(PyMask).map_err(err)
    }

    fn write_png(&self, path: &str) -> PyResult<()> {
        lio::write_mask_png(path, &self.0).map_err(err)
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values.clone()
    }

    #[getter]
    fn is_soft(&self) -> bool {
        self.0.kind == MaskKind::Soft
    }

    fn positive_count(&self) -> usize {
        self.0.positive_count()
    }
}

/// A generated scene: depth, camera, its light and the exact shadow mask.
#[pyclass(name = "Scene", module = "lgimap", get_all)]
struct PyScene {
    config_json: String,
    depth: PyDepth,
    intrinsics: PyIntrinsics,
    light: PyLight,
    oracle_mask: PyMask,
}

fn build_scene(cfg: &SceneConfig, light_index: usize) -> PyResult<PyScene> {
    let r = cfg.resolve().map_err(err)?;
    let light = *r
        .lights
        .get(light_index)
        .ok_or_else(|| PyValueError::new_err(format!("light index {light_index} out of range")))?;
    let depth = synth::render_depth(&r.scene, &r.intrinsics).map_err(err)?;
    let gt = synth::oracle_shadow_mask(&r.scene, &depth, &r.intrinsics, &light, &r.oracle).map_err(err)?;
    Ok(PyScene {
        config_json: cfg.to_json().map_err(err)?,
        depth: PyDepth(depth),
        intrinsics: PyIntrinsics(r.intrinsics),
        light: PyLight(light),
        oracle_mask: PyMask(gt),
    })
}

/// Deterministic front-lit scenes for a seed.
#[pyfunction]
#[pyo3(signature = (seed, count = synth::DEFAULT_SUITE_SIZE, resolution = synth::DEFAULT_SUITE_RESOLUTION))]
fn scene_suite(seed: u64, count: usize, resolution: usize) -> PyResult<Vec<PyScene>> {
    synth::scene_suite_with(seed, count, resolution)
        .iter()
        .map(|e| build_scene(&SceneConfig::from_suite_entry(e, Some(seed), Default::default()), 0))
        .collect()
}

/// Parses a JSON scene config and renders it.
#[pyfunction]
#[pyo3(signature = (config_json, light_index = 0))]
fn load_scene(config_json: &str, light_index: usize) -> PyResult<PyScene> {
    let cfg = SceneConfig::from_json(config_json).map_err(err)?;
    build_scene(&cfg, light_index)
}

#[pyfunction]
#[pyo3(signature = (depth, intrinsics, light, config = None))]
fn compute_lgi(
    py: Python<'_>,
    depth: &PyDepth,
    intrinsics: &PyIntrinsics,
    light: &PyLight,
    config: Option<&PyLgiConfig>,
) -> PyResult<PyLgiMaps> {
    let cfg = config.map(|c| c.0).unwrap_or_default();
    py.detach(|| core::compute_lgi(&depth.0, &intrinsics.0, &light.0, &cfg))
        .map(PyLgiMaps)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (maps, eta = core::lgi::DEFAULT_ETA))]
fn hard_mask(maps: &PyLgiMaps, eta: f64) -> PyMask {
    PyMask(core::hard_mask(&maps.0, eta))
}

#[pyfunction]
#[pyo3(signature = (maps, eta = core::lgi::DEFAULT_ETA, beta = core::lgi::DEFAULT_SOFTNESS_BETA))]
fn soft_mask(maps: &PyLgiMaps, eta: f64, beta: f64) -> PyResult<PyMask> {
    core::soft_mask(&maps.0, eta, beta).map(PyMask).map_err(err)
}

/// `(tp, fp, fn, tn)` at `value >= threshold`.
#[pyfunction]
#[pyo3(signature = (pred, gt, threshold = metrics::DEFAULT_THRESHOLD))]
fn confusion(pred: &PyMask, gt: &PyMask, threshold: f64) -> PyResult<(u64, u64, u64, u64)> {
    let c = metrics::confusion(&pred.0, &gt.0, threshold).map_err(err)?;
    Ok((c.tp, c.fp, c.fn_, c.tn))
}

/// IoU of the positive class; `None` when both masks are empty.
#[pyfunction]
#[pyo3(signature = (pred, gt, threshold = metrics::DEFAULT_THRESHOLD))]
fn iou(pred: &PyMask, gt: &PyMask, threshold: f64) -> PyResult<Option<f64>> {
    let c = metrics::confusion(&pred.0, &gt.0, threshold).map_err(err)?;
    Ok(metrics::iou(&c).ok())
}

/// Balanced error rate; `None` when either class is absent from `gt`.
#[pyfunction]
#[pyo3(signature = (pred, gt, threshold = metrics::DEFAULT_THRESHOLD))]
fn ber(pred: &PyMask, gt: &PyMask, threshold: f64) -> PyResult<Option<f64>> {
    let c = metrics::confusion(&pred.0, &gt.0, threshold).map_err(err)?;
    Ok(metrics::ber(&c).ok())
}

#[pyfunction]
fn bridge_sample(z0: Vec<f64>, z1: Vec<f64>, t: f64, sigma: f64, noise: Vec<f64>) -> PyResult<Vec<f64>> {
    bridgemath::bridge_sample(&LatentVec(z0), &LatentVec(z1), t, sigma, &LatentVec(noise))
        .map(|v| v.0)
        .map_err(err)
}

#[pyfunction]
fn drift_target(zt: Vec<f64>, z1: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
    bridgemath::drift_target(&LatentVec(zt), &LatentVec(z1), t)
        .map(|v| v.0)
        .map_err(err)
}

#[pyfunction]
fn retrieve_target(zt: Vec<f64>, t: f64, v: Vec<f64>) -> PyResult<Vec<f64>> {
    bridgemath::retrieve_target(&LatentVec(zt), t, &LatentVec(v))
        .map(|v| v.0)
        .map_err(err)
}

#[pyfunction]
fn mask_bce(pred: &PyMask, gt: &PyMask) -> PyResult<f64> {
    bridgemath::mask_bce(&pred.0, &gt.0).map_err(err)
}

#[pyfunction]
fn mask_iou_loss(pred: &PyMask, gt: &PyMask) -> PyResult<f64> {
    bridgemath::mask_iou_loss(&pred.0, &gt.0).map_err(err)
}

#[pymodule]
fn lgimap(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyIntrinsics>()?;
    m.add_class::<PyDepth>()?;
    m.add_class::<PyLight>()?;
    m.add_class::<PyLgiConfig>()?;
    m.add_class::<PyLgiMaps>()?;
    m.add_class::<PyMask>()?;
    m.add_class::<PyScene>()?;
    m.add_function(wrap_pyfunction!(scene_suite, m)?)?;
    m.add_function(wrap_pyfunction!(load_scene, m)?)?;
    m.add_function(wrap_pyfunction!(compute_lgi, m)?)?;
    m.add_function(wrap_pyfunction!(hard_mask, m)?)?;
    m.add_function(wrap_pyfunction!(soft_mask, m)?)?;
    m.add_function(wrap_pyfunction!(confusion, m)?)?;
    m.add_function(wrap_pyfunction!(iou, m)?)?;
    m.add_function(wrap_pyfunction!(ber, m)?)?;
    m.add_function(wrap_pyfunction!(bridge_sample, m)?)?;
    m.add_function(wrap_pyfunction!(drift_target, m)?)?;
    m.add_function(wrap_pyfunction!(retrieve_target, m)?)?;
    m.add_function(wrap_pyfunction!(mask_bce, m)?)?;
    m.add_function(wrap_pyfunction!(mask_iou_loss, m)?)?;
    Ok(())
}
