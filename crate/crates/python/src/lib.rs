//! Python bindings for the pose-aware multi-shot matching pipeline.
//!
//! Exposes the camera model, pose-angle operations, sample confidence, the
//! metric learners, multi-pose matching, the synthetic scene generator, and
//! the full evaluation loop. Multi-pose models cross the boundary as plain
//! dicts mapping the group names `front`/`right`/`back`/`left` to lists of
//! feature vectors.

use pamm_core::camera::{CameraModel, PixelPoint, WorldPoint};
use pamm_core::eval::{run_evaluation, EvalConfig, WeightsMode};
use pamm_core::matching::{
    baseline_cost, pairwise_distances, pamm_cost_or_mean, MatchWeights, Strategy,
};
use pamm_core::metric::{learn_metric, metric_distance, LearnedMetric, LearnerId, PairLabel};
use pamm_core::model::{FeatureVector, GroupMember, MultiPoseModel, PoseGroup, PoseLabel};
use pamm_core::pose::{normalize_degrees, BoundingBox, Track, TrackSample};
use pamm_core::synth::{generate_scene, SceneConfig};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyIOError::new_err(e.to_string())
}

fn matrix3(rows: [[f64; 3]; 3]) -> nalgebra::Matrix3<f64> {
    nalgebra::Matrix3::from_fn(|i, j| rows[i][j])
}

/// Calibrated pinhole camera mapping between world and image coordinates.
#[pyclass(name = "Camera")]
struct PyCamera {
    inner: CameraModel,
}

#[pymethods]
impl PyCamera {
    #[new]
    fn new(camera_id: &str, k: [[f64; 3]; 3], r: [[f64; 3]; 3], t: [f64; 3]) -> PyResult<Self> {
        let inner = CameraModel::new(
            camera_id,
            matrix3(k),
            matrix3(r),
            nalgebra::Vector3::new(t[0], t[1], t[2]),
        )
        .map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Camera at `position` looking at `target` with focal length `f` and
    /// principal point `(cx, cy)`.
    #[staticmethod]
    fn look_at(
        camera_id: &str,
        f: f64,
        cx: f64,
        cy: f64,
        position: [f64; 3],
        target: [f64; 3],
    ) -> PyResult<Self> {
        let inner = CameraModel::look_at(
            camera_id,
            pamm_core::camera::simple_intrinsics(f, cx, cy),
            nalgebra::Vector3::new(position[0], position[1], position[2]),
            nalgebra::Vector3::new(target[0], target[1], target[2]),
        )
        .map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn camera_id(&self) -> &str {
        self.inner.camera_id()
    }

    /// Projects a world point `(x, y, z)` to pixel coordinates `(u, v)`.
    fn project(&self, point: [f64; 3]) -> PyResult<(f64, f64)> {
        let px = self
            .inner
            .project(WorldPoint::new(point[0], point[1], point[2]))
            .map_err(value_err)?;
        Ok((px.u, px.v))
    }

    /// Intersects the viewing ray of pixel `(u, v)` with the ground plane.
    fn back_project_to_ground(&self, pixel: (f64, f64)) -> PyResult<(f64, f64, f64)> {
        let p = self
            .inner
            .back_project_to_ground(PixelPoint::new(pixel.0, pixel.1))
            .map_err(value_err)?;
        Ok((p.x, p.y, p.z))
    }
}

/// PCA projection plus learned PSD matrix defining feature distances.
#[pyclass(name = "Metric")]
struct PyMetric {
    inner: LearnedMetric,
}

#[pymethods]
impl PyMetric {
    /// Learns a metric from `(feature_a, feature_b, same_identity)` pairs.
    #[staticmethod]
    #[pyo3(signature = (pairs, learner="kissme", pca_dim=None, regularization=1e-3))]
    fn learn(
        pairs: Vec<(Vec<f64>, Vec<f64>, bool)>,
        learner: &str,
        pca_dim: Option<usize>,
        regularization: f64,
    ) -> PyResult<Self> {
        let learner: LearnerId = learner.parse().map_err(value_err)?;
        let pairs: Vec<PairLabel> = pairs
            .into_iter()
            .map(|(a, b, same)| PairLabel {
                feature_a: FeatureVector::new(a, "py"),
                feature_b: FeatureVector::new(b, "py"),
                same_identity: same,
            })
            .collect();
        let inner = learn_metric(&pairs, learner, pca_dim, regularization).map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Identity (Euclidean) metric for `dim`-dimensional features.
    #[staticmethod]
    fn euclidean(dim: usize) -> Self {
        Self {
            inner: LearnedMetric::identity(dim),
        }
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = pamm_core::io::load_metric(&path).map_err(io_err)?;
        Ok(Self { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        pamm_core::io::save(&path, &pamm_core::io::metric_to_json(&self.inner)).map_err(io_err)
    }

    #[getter]
    fn learner(&self) -> &'static str {
        self.inner.learner_id.name()
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim
    }

    #[getter]
    fn reduced_dim(&self) -> usize {
        self.inner.reduced_dim()
    }

    /// Distance between two raw feature vectors.
    fn distance(&self, a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
        metric_distance(
            &self.inner,
            &FeatureVector::new(a, "py"),
            &FeatureVector::new(b, "py"),
        )
        .map_err(value_err)
    }
}

fn model_from_dict(dict: &Bound<'_, PyDict>, name: &str) -> PyResult<MultiPoseModel> {
    let mut groups: [PoseGroup; 4] = Default::default();
    for label in PoseLabel::ALL {
        if let Some(list) = dict.get_item(label.name())? {
            let features: Vec<Vec<f64>> = list.extract()?;
            groups[label.index()].members = features
                .into_iter()
                .enumerate()
                .map(|(i, values)| GroupMember {
                    frame: i as i64,
                    feature: FeatureVector::new(values, "py"),
                })
                .collect();
        }
    }
    Ok(MultiPoseModel {
        object_id: name.to_string(),
        camera_id: "py".to_string(),
        groups,
    })
}

fn weights_from_dict(dict: &Bound<'_, PyDict>) -> PyResult<MatchWeights> {
    let json = dict.py().import("json")?;
    let text: String = json.call_method1("dumps", (dict,))?.extract()?;
    serde_json::from_str(&text).map_err(value_err)
}

/// Pose group of an angle in degrees: "front", "right", "back", or "left".
#[pyfunction]
fn assign_pose_group(angle: f64) -> PyResult<&'static str> {
    if !(0.0..360.0).contains(&angle) {
        return Err(PyValueError::new_err("angle must lie in [0, 360)"));
    }
    Ok(pamm_core::assign_pose_group(angle).name())
}

/// Moving-average smoothing of an angle sequence in polar coordinates.
#[pyfunction]
#[pyo3(signature = (angles, half_width=10))]
fn smooth_angles(angles: Vec<f64>, half_width: usize) -> PyResult<Vec<f64>> {
    if angles.is_empty() {
        return Ok(vec![]);
    }
    let samples: Vec<TrackSample> = angles
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut s = TrackSample::new(
                "py",
                "py",
                i as i64,
                [0.0, 0.0],
                BoundingBox::new(0.0, 0.0, 1.0, 1.0),
            );
            s.raw_angle = Some(normalize_degrees(*a));
            s
        })
        .collect();
    let track = Track::new(samples).map_err(value_err)?;
    let smoothed = pamm_core::smooth_angles(&track, half_width).map_err(value_err)?;
    Ok(smoothed
        .samples
        .iter()
        .map(|s| s.smooth_angle.unwrap())
        .collect())
}

/// Wraparound-safe variation between two consecutive angles, in [0, 180].
#[pyfunction]
fn angle_variation(prev_angle: f64, cur_angle: f64) -> f64 {
    pamm_core::angle_variation(prev_angle, cur_angle)
}

/// Sample confidence from angle variation (deg), speed (m/s), and occlusion.
#[pyfunction]
#[pyo3(signature = (delta, speed, occlusion, speed_ref=1.0))]
fn sample_confidence(delta: f64, speed: f64, occlusion: f64, speed_ref: f64) -> f64 {
    pamm_core::sample_confidence(delta, speed, occlusion, speed_ref)
}

/// Cost of matching two multi-pose models under a strategy.
///
/// Models are dicts mapping "front"/"right"/"back"/"left" to lists of
/// feature vectors. PaMM needs `weights`, a dict with the ten pose-pair keys
/// (ff, rr, bb, ll, fr, fb, fl, rb, rl, bl).
#[pyfunction]
#[pyo3(signature = (model_a, model_b, metric, strategy="pamm", weights=None, seed=0))]
fn match_cost(
    model_a: &Bound<'_, PyDict>,
    model_b: &Bound<'_, PyDict>,
    metric: &PyMetric,
    strategy: &str,
    weights: Option<&Bound<'_, PyDict>>,
    seed: u64,
) -> PyResult<f64> {
    let a = model_from_dict(model_a, "a")?;
    let b = model_from_dict(model_b, "b")?;
    let strategy: Strategy = strategy.parse().map_err(value_err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cost = match strategy {
        Strategy::Pamm => {
            let weights = weights.ok_or_else(|| {
                PyValueError::new_err("pamm strategy needs a weights dict")
            })?;
            let w = weights_from_dict(weights)?;
            let table = pairwise_distances(&a, &b, &metric.inner).map_err(value_err)?;
            pamm_cost_or_mean(&table, &w).map_err(value_err)?
        }
        other => baseline_cost(&a, &b, &metric.inner, other, &mut rng).map_err(value_err)?,
    };
    Ok(cost.cost)
}

/// Generates a synthetic ground-truthed scene into `out_dir`.
#[pyfunction]
#[pyo3(signature = (out_dir, identities=20, seed=0, duration=120, pose_strength=0.6,
                    noise_sigma=0.08, occlusion_prob=0.0, appearance_dim=32))]
#[allow(clippy::too_many_arguments)]
fn generate_scene_files(
    out_dir: PathBuf,
    identities: usize,
    seed: u64,
    duration: usize,
    pose_strength: f64,
    noise_sigma: f64,
    occlusion_prob: f64,
    appearance_dim: usize,
) -> PyResult<usize> {
    let mut cfg = SceneConfig::new(identities, seed);
    cfg.duration = duration;
    cfg.pose_appearance_strength = pose_strength;
    cfg.noise_sigma = noise_sigma;
    cfg.occlusion_probability = occlusion_prob;
    cfg.appearance_dim = appearance_dim;
    let scene = generate_scene(&cfg).map_err(value_err)?;
    pamm_core::io::write_scene(&scene, &out_dir).map_err(io_err)?;
    Ok(scene.dataset.tracks.len())
}

/// Runs the full evaluation loop on a scene directory and returns the
/// per-strategy results as parsed JSON.
#[pyfunction]
#[pyo3(signature = (scene_dir, strategies=None, trials=3, base_seed=42, learner="kissme",
                    pca_dim=16, query_camera="cam_a", gallery_camera="cam_b"))]
#[allow(clippy::too_many_arguments)]
fn evaluate_scene(
    py: Python<'_>,
    scene_dir: PathBuf,
    strategies: Option<Vec<String>>,
    trials: usize,
    base_seed: u64,
    learner: &str,
    pca_dim: usize,
    query_camera: &str,
    gallery_camera: &str,
) -> PyResult<Py<PyAny>> {
    let dataset = pamm_core::io::load_dataset(
        &scene_dir.join("tracks.csv"),
        &scene_dir.join("features.csv"),
        &scene_dir.join("calibration.json"),
    )
    .map_err(io_err)?;
    let mut cfg = EvalConfig::new(query_camera, gallery_camera);
    cfg.trial_seeds = (0..trials as u64).map(|i| base_seed + i).collect();
    cfg.learner = learner.parse().map_err(value_err)?;
    cfg.pca_dim = (pca_dim > 0).then_some(pca_dim);
    cfg.weights = WeightsMode::TrainOnce;
    if let Some(names) = strategies {
        cfg.strategies = names
            .iter()
            .map(|n| n.parse::<Strategy>())
            .collect::<Result<_, _>>()
            .map_err(value_err)?;
    }
    let report = run_evaluation(&dataset, &cfg).map_err(value_err)?;
    let json = py.import("json")?;
    Ok(json.call_method1("loads", (report.to_json(),))?.unbind())
}

#[pymodule]
fn pamm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCamera>()?;
    m.add_class::<PyMetric>()?;
    m.add_function(wrap_pyfunction!(assign_pose_group, m)?)?;
    m.add_function(wrap_pyfunction!(smooth_angles, m)?)?;
    m.add_function(wrap_pyfunction!(angle_variation, m)?)?;
    m.add_function(wrap_pyfunction!(sample_confidence, m)?)?;
    m.add_function(wrap_pyfunction!(match_cost, m)?)?;
    m.add_function(wrap_pyfunction!(generate_scene_files, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_scene, m)?)?;
    Ok(())
}
