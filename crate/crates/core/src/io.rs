//! File formats: track CSV, feature CSV, calibration / metric / weights /
//! model / ground-truth JSON, and dataset loading.
//!
//! All writers are deterministic: rows follow sorted key order and floats are
//! printed with the shortest round-trip representation, so identical inputs
//! produce byte-identical files.

use crate::camera::CameraModel;
use crate::confidence::ConfidenceReport;
use crate::descriptor::{FeatureExtractor, ImagePatch};
use crate::metric::{LearnedMetric, LearnerId};
use crate::model::{
    FeatureKey, FeatureStore, FeatureVector, GroupMember, MultiPoseModel, PoseGroup, PoseLabel,
};
use crate::pipeline::Dataset;
use crate::pose::{BoundingBox, Track, TrackSample};
use crate::synth::{GroundTruth, Scene};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FileFormatError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error in {path} line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("invalid {path}: {msg}")]
    Invalid { path: String, msg: String },
}

impl FileFormatError {
    fn parse(path: &str, line: usize, msg: impl Into<String>) -> Self {
        Self::Parse {
            path: path.to_string(),
            line,
            msg: msg.into(),
        }
    }

    fn invalid(path: &str, msg: impl Into<String>) -> Self {
        Self::Invalid {
            path: path.to_string(),
            msg: msg.into(),
        }
    }
}

fn read_to_string(path: &Path) -> Result<String, FileFormatError> {
    std::fs::read_to_string(path).map_err(|source| FileFormatError::Read {
        path: path.display().to_string(),
        source,
    })
}

fn write_string(path: &Path, content: &str) -> Result<(), FileFormatError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| FileFormatError::Write {
                path: path.display().to_string(),
                source,
            })?;
        }
    }
    std::fs::write(path, content).map_err(|source| FileFormatError::Write {
        path: path.display().to_string(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Track CSV
// ---------------------------------------------------------------------------

pub const TRACK_CSV_BASE_HEADER: &str =
    "camera_id,object_id,frame,world_x,world_y,bbox_x,bbox_y,bbox_w,bbox_h";
pub const TRACK_CSV_POSED_HEADER: &str =
    "camera_id,object_id,frame,world_x,world_y,bbox_x,bbox_y,bbox_w,bbox_h,raw_angle,smooth_angle";
pub const TRACK_CSV_SCORED_HEADER: &str = "camera_id,object_id,frame,world_x,world_y,bbox_x,bbox_y,bbox_w,bbox_h,raw_angle,smooth_angle,delta,speed,occlusion,confidence";

fn base_fields(s: &TrackSample) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        s.camera_id,
        s.object_id,
        s.frame,
        s.world_pos[0],
        s.world_pos[1],
        s.bbox.x,
        s.bbox.y,
        s.bbox.w,
        s.bbox.h
    )
}

/// Serializes raw tracks: positions and boxes only.
pub fn tracks_to_csv_base(tracks: &[Track]) -> String {
    let mut out = String::from(TRACK_CSV_BASE_HEADER);
    out.push('\n');
    for track in tracks {
        for s in &track.samples {
            out.push_str(&base_fields(s));
            out.push('\n');
        }
    }
    out
}

/// Serializes tracks with `raw_angle,smooth_angle` columns appended.
pub fn tracks_to_csv_posed(tracks: &[Track]) -> String {
    let mut out = String::from(TRACK_CSV_POSED_HEADER);
    out.push('\n');
    for track in tracks {
        for s in &track.samples {
            out.push_str(&base_fields(s));
            out.push_str(&format!(
                ",{},{}\n",
                s.raw_angle.unwrap_or(f64::NAN),
                s.smooth_angle.unwrap_or(f64::NAN)
            ));
        }
    }
    out
}

/// Serializes tracks with `delta,speed,occlusion,confidence` appended.
pub fn tracks_to_csv_scored(
    tracks: &[Track],
    reports: &BTreeMap<FeatureKey, ConfidenceReport>,
) -> String {
    let mut out = String::from(TRACK_CSV_SCORED_HEADER);
    out.push('\n');
    for track in tracks {
        for s in &track.samples {
            let key = (s.camera_id.clone(), s.object_id.clone(), s.frame);
            let r = reports.get(&key);
            out.push_str(&base_fields(s));
            out.push_str(&format!(
                ",{},{},{},{},{},{}\n",
                s.raw_angle.unwrap_or(f64::NAN),
                s.smooth_angle.unwrap_or(f64::NAN),
                r.map(|r| r.delta).unwrap_or(f64::NAN),
                r.map(|r| r.speed).unwrap_or(f64::NAN),
                r.map(|r| r.occlusion).unwrap_or(f64::NAN),
                s.confidence.unwrap_or(f64::NAN)
            ));
        }
    }
    out
}

/// Parses a track CSV at any stage (9, 11, or 15 columns), grouping rows into
/// per-(camera, object) tracks ordered by frame.
pub fn parse_tracks_csv(text: &str, path: &str) -> Result<Vec<Track>, FileFormatError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| FileFormatError::parse(path, 1, "empty file"))?;
    let cols = header.split(',').count();
    if ![9, 11, 15].contains(&cols) {
        return Err(FileFormatError::parse(
            path,
            1,
            format!("expected 9, 11, or 15 columns, found {cols}"),
        ));
    }
    let mut grouped: BTreeMap<(String, String), Vec<TrackSample>> = BTreeMap::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(FileFormatError::parse(
                path,
                lineno,
                format!("expected {cols} fields, found {}", fields.len()),
            ));
        }
        let num = |i: usize| -> Result<f64, FileFormatError> {
            fields[i]
                .parse::<f64>()
                .map_err(|_| FileFormatError::parse(path, lineno, format!("bad number '{}'", fields[i])))
        };
        let frame: i64 = fields[2]
            .parse()
            .map_err(|_| FileFormatError::parse(path, lineno, format!("bad frame '{}'", fields[2])))?;
        let (w, h) = (num(7)?, num(8)?);
        if w <= 0.0 || h <= 0.0 {
            return Err(FileFormatError::parse(path, lineno, "bbox must have positive size"));
        }
        let mut sample = TrackSample::new(
            fields[1],
            fields[0],
            frame,
            [num(3)?, num(4)?],
            BoundingBox::new(num(5)?, num(6)?, w, h),
        );
        if cols >= 11 {
            let raw = num(9)?;
            let smooth = num(10)?;
            sample.raw_angle = raw.is_finite().then_some(raw);
            sample.smooth_angle = smooth.is_finite().then_some(smooth);
        }
        if cols == 15 {
            let conf = num(14)?;
            sample.confidence = conf.is_finite().then_some(conf);
        }
        grouped
            .entry((fields[0].to_string(), fields[1].to_string()))
            .or_default()
            .push(sample);
    }
    let mut tracks = Vec::with_capacity(grouped.len());
    for ((camera_id, object_id), mut samples) in grouped {
        samples.sort_by_key(|s| s.frame);
        let track = Track::new(samples).map_err(|e| {
            FileFormatError::invalid(path, format!("track {camera_id}/{object_id}: {e}"))
        })?;
        tracks.push(track);
    }
    Ok(tracks)
}

// ---------------------------------------------------------------------------
// Feature CSV
// ---------------------------------------------------------------------------

/// Serializes features: header `object_id,camera_id,frame,d`, then one row
/// per sample with `d` values.
pub fn features_to_csv(store: &FeatureStore) -> String {
    let d = store.values().next().map(FeatureVector::dim).unwrap_or(0);
    let mut out = format!("object_id,camera_id,frame,{d}\n");
    for ((camera_id, object_id, frame), feature) in store {
        out.push_str(&format!("{object_id},{camera_id},{frame}"));
        for v in &feature.values {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

/// Parses a precomputed feature file.
pub fn parse_features_csv(text: &str, path: &str) -> Result<FeatureStore, FileFormatError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| FileFormatError::parse(path, 1, "empty file"))?;
    let head: Vec<&str> = header.split(',').collect();
    if head.len() != 4 || head[0] != "object_id" || head[1] != "camera_id" || head[2] != "frame" {
        return Err(FileFormatError::parse(
            path,
            1,
            "header must be 'object_id,camera_id,frame,<d>'",
        ));
    }
    let d: usize = head[3]
        .parse()
        .map_err(|_| FileFormatError::parse(path, 1, format!("bad dimension '{}'", head[3])))?;
    let mut store = FeatureStore::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 + d {
            return Err(FileFormatError::parse(
                path,
                lineno,
                format!("expected {} fields, found {}", 3 + d, fields.len()),
            ));
        }
        let frame: i64 = fields[2]
            .parse()
            .map_err(|_| FileFormatError::parse(path, lineno, format!("bad frame '{}'", fields[2])))?;
        let mut values = Vec::with_capacity(d);
        for f in &fields[3..] {
            let v = f.parse::<f64>().map_err(|_| {
                FileFormatError::parse(path, lineno, format!("bad feature value '{f}'"))
            })?;
            if !v.is_finite() {
                return Err(FileFormatError::parse(
                    path,
                    lineno,
                    "feature values must be finite",
                ));
            }
            values.push(v);
        }
        store.insert(
            (fields[1].to_string(), fields[0].to_string(), frame),
            FeatureVector::new(values, "precomputed"),
        );
    }
    Ok(store)
}

// ---------------------------------------------------------------------------
// Calibration JSON
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct CalibrationRecord {
    camera_id: String,
    #[serde(rename = "K")]
    k: [[f64; 3]; 3],
    #[serde(rename = "R")]
    r: [[f64; 3]; 3],
    t: [f64; 3],
}

impl CalibrationRecord {
    fn from_camera(camera: &CameraModel) -> Self {
        let to_rows = |m: &Matrix3<f64>| {
            let mut rows = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    rows[i][j] = m[(i, j)];
                }
            }
            rows
        };
        Self {
            camera_id: camera.camera_id().to_string(),
            k: to_rows(camera.intrinsics()),
            r: to_rows(camera.rotation()),
            t: [camera.position().x, camera.position().y, camera.position().z],
        }
    }

    fn into_camera(self, path: &str) -> Result<CameraModel, FileFormatError> {
        let from_rows = |rows: [[f64; 3]; 3]| {
            Matrix3::from_fn(|i, j| rows[i][j])
        };
        CameraModel::new(
            self.camera_id.clone(),
            from_rows(self.k),
            from_rows(self.r),
            Vector3::new(self.t[0], self.t[1], self.t[2]),
        )
        .map_err(|e| FileFormatError::invalid(path, format!("camera {}: {e}", self.camera_id)))
    }
}

/// Serializes cameras as a JSON array of calibration records.
pub fn calibrations_to_json(cameras: &[CameraModel]) -> String {
    let records: Vec<CalibrationRecord> =
        cameras.iter().map(CalibrationRecord::from_camera).collect();
    serde_json::to_string_pretty(&records).expect("calibration serializes")
}

/// Parses a calibration file holding either one record or an array.
pub fn parse_calibrations_json(text: &str, path: &str) -> Result<Vec<CameraModel>, FileFormatError> {
    let records: Vec<CalibrationRecord> = match serde_json::from_str::<Vec<CalibrationRecord>>(text)
    {
        Ok(list) => list,
        Err(_) => vec![serde_json::from_str::<CalibrationRecord>(text)
            .map_err(|e| FileFormatError::invalid(path, e.to_string()))?],
    };
    records.into_iter().map(|r| r.into_camera(path)).collect()
}

// ---------------------------------------------------------------------------
// Metric JSON
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct MetricRecord {
    learner_id: String,
    d: usize,
    r: usize,
    pca_mean: Vec<f64>,
    pca_basis: Vec<Vec<f64>>,
    #[serde(rename = "M")]
    m: Vec<Vec<f64>>,
}

/// Serializes a learned metric.
pub fn metric_to_json(metric: &LearnedMetric) -> String {
    let (d, r) = (metric.input_dim, metric.reduced_dim());
    let record = MetricRecord {
        learner_id: metric.learner_id.name().to_string(),
        d,
        r,
        pca_mean: metric.pca_mean.iter().cloned().collect(),
        pca_basis: (0..d)
            .map(|i| (0..r).map(|j| metric.pca_basis[(i, j)]).collect())
            .collect(),
        m: (0..r)
            .map(|i| (0..r).map(|j| metric.m[(i, j)]).collect())
            .collect(),
    };
    serde_json::to_string_pretty(&record).expect("metric serializes")
}

/// Parses and validates a learned metric.
pub fn parse_metric_json(text: &str, path: &str) -> Result<LearnedMetric, FileFormatError> {
    let record: MetricRecord =
        serde_json::from_str(text).map_err(|e| FileFormatError::invalid(path, e.to_string()))?;
    let learner_id: LearnerId = record
        .learner_id
        .parse()
        .map_err(|e: String| FileFormatError::invalid(path, e))?;
    let (d, r) = (record.d, record.r);
    if d == 0 || r == 0 || r > d {
        return Err(FileFormatError::invalid(path, "need 0 < r <= d"));
    }
    if record.pca_mean.len() != d || record.pca_basis.len() != d || record.m.len() != r {
        return Err(FileFormatError::invalid(path, "dimension fields disagree with matrices"));
    }
    if record.pca_basis.iter().any(|row| row.len() != r)
        || record.m.iter().any(|row| row.len() != r)
    {
        return Err(FileFormatError::invalid(path, "ragged matrix rows"));
    }
    let metric = LearnedMetric {
        learner_id,
        input_dim: d,
        pca_mean: DVector::from_vec(record.pca_mean),
        pca_basis: DMatrix::from_fn(d, r, |i, j| record.pca_basis[i][j]),
        m: DMatrix::from_fn(r, r, |i, j| record.m[i][j]),
    };
    metric
        .validate()
        .map_err(|e| FileFormatError::invalid(path, e))?;
    Ok(metric)
}

// ---------------------------------------------------------------------------
// Multi-pose model JSON
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct MemberRecord {
    frame: i64,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelRecord {
    object_id: String,
    camera_id: String,
    descriptor_id: String,
    front: Vec<MemberRecord>,
    right: Vec<MemberRecord>,
    back: Vec<MemberRecord>,
    left: Vec<MemberRecord>,
}

pub type ModelMap = BTreeMap<(String, String), MultiPoseModel>;

/// Serializes multi-pose models sorted by (camera, object).
pub fn models_to_json(models: &ModelMap) -> String {
    let records: Vec<ModelRecord> = models
        .values()
        .map(|m| {
            let members = |label: PoseLabel| -> Vec<MemberRecord> {
                m.group(label)
                    .members
                    .iter()
                    .map(|member| MemberRecord {
                        frame: member.frame,
                        values: member.feature.values.clone(),
                    })
                    .collect()
            };
            ModelRecord {
                object_id: m.object_id.clone(),
                camera_id: m.camera_id.clone(),
                descriptor_id: m
                    .all_features()
                    .next()
                    .map(|f| f.descriptor_id.clone())
                    .unwrap_or_else(|| "unknown".to_string()),
                front: members(PoseLabel::Front),
                right: members(PoseLabel::Right),
                back: members(PoseLabel::Back),
                left: members(PoseLabel::Left),
            }
        })
        .collect();
    serde_json::to_string_pretty(&records).expect("models serialize")
}

/// Parses a multi-pose model file.
pub fn parse_models_json(text: &str, path: &str) -> Result<ModelMap, FileFormatError> {
    let records: Vec<ModelRecord> =
        serde_json::from_str(text).map_err(|e| FileFormatError::invalid(path, e.to_string()))?;
    let mut map = ModelMap::new();
    for record in records {
        let group = |members: &[MemberRecord]| -> PoseGroup {
            PoseGroup {
                members: members
                    .iter()
                    .map(|m| GroupMember {
                        frame: m.frame,
                        feature: FeatureVector::new(m.values.clone(), record.descriptor_id.clone()),
                    })
                    .collect(),
            }
        };
        let model = MultiPoseModel {
            object_id: record.object_id.clone(),
            camera_id: record.camera_id.clone(),
            groups: [
                group(&record.front),
                group(&record.right),
                group(&record.back),
                group(&record.left),
            ],
        };
        map.insert((record.camera_id, record.object_id), model);
    }
    Ok(map)
}

// ---------------------------------------------------------------------------
// Scene writing and dataset loading
// ---------------------------------------------------------------------------

pub const TRACKS_FILE: &str = "tracks.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const CALIBRATION_FILE: &str = "calibration.json";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

/// Writes a generated scene into `dir` in the formats the pipeline consumes.
pub fn write_scene(scene: &Scene, dir: &Path) -> Result<(), FileFormatError> {
    write_string(&dir.join(TRACKS_FILE), &tracks_to_csv_base(&scene.dataset.tracks))?;
    write_string(&dir.join(FEATURES_FILE), &features_to_csv(&scene.dataset.features))?;
    write_string(
        &dir.join(CALIBRATION_FILE),
        &calibrations_to_json(&scene.dataset.cameras),
    )?;
    write_string(
        &dir.join(GROUND_TRUTH_FILE),
        &serde_json::to_string_pretty(&scene.ground_truth).expect("ground truth serializes"),
    )?;
    Ok(())
}

/// Loads a dataset from its three component files.
pub fn load_dataset(
    tracks_path: &Path,
    features_path: &Path,
    calibration_path: &Path,
) -> Result<Dataset, FileFormatError> {
    let tracks = parse_tracks_csv(
        &read_to_string(tracks_path)?,
        &tracks_path.display().to_string(),
    )?;
    let features = parse_features_csv(
        &read_to_string(features_path)?,
        &features_path.display().to_string(),
    )?;
    let cameras = parse_calibrations_json(
        &read_to_string(calibration_path)?,
        &calibration_path.display().to_string(),
    )?;
    Ok(Dataset {
        cameras,
        tracks,
        features,
    })
}

/// Loads a ground-truth file written by [`write_scene`].
pub fn load_ground_truth(path: &Path) -> Result<GroundTruth, FileFormatError> {
    serde_json::from_str(&read_to_string(path)?)
        .map_err(|e| FileFormatError::invalid(&path.display().to_string(), e.to_string()))
}

/// Convenience wrappers for single-file load/save.
pub fn load_tracks(path: &Path) -> Result<Vec<Track>, FileFormatError> {
    parse_tracks_csv(&read_to_string(path)?, &path.display().to_string())
}

pub fn load_features(path: &Path) -> Result<FeatureStore, FileFormatError> {
    parse_features_csv(&read_to_string(path)?, &path.display().to_string())
}

pub fn load_calibrations(path: &Path) -> Result<Vec<CameraModel>, FileFormatError> {
    parse_calibrations_json(&read_to_string(path)?, &path.display().to_string())
}

pub fn load_metric(path: &Path) -> Result<LearnedMetric, FileFormatError> {
    parse_metric_json(&read_to_string(path)?, &path.display().to_string())
}

pub fn load_models(path: &Path) -> Result<ModelMap, FileFormatError> {
    parse_models_json(&read_to_string(path)?, &path.display().to_string())
}

pub fn load_weights(path: &Path) -> Result<crate::matching::MatchWeights, FileFormatError> {
    serde_json::from_str(&read_to_string(path)?)
        .map_err(|e| FileFormatError::invalid(&path.display().to_string(), e.to_string()))
}

pub fn save(path: &Path, content: &str) -> Result<(), FileFormatError> {
    write_string(path, content)
}

// ---------------------------------------------------------------------------
// Image-patch ingestion (optional path)
// ---------------------------------------------------------------------------

/// Loads a PNG or PPM patch into the common RGB float format.
pub fn load_patch(path: &Path) -> Result<ImagePatch, FileFormatError> {
    let img = image::open(path)
        .map_err(|e| FileFormatError::invalid(&path.display().to_string(), e.to_string()))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels = img
        .pixels()
        .map(|p| [p[0] as f32 / 255.0, p[1] as f32 / 255.0, p[2] as f32 / 255.0])
        .collect();
    Ok(ImagePatch::new(w, h, pixels))
}

/// Extracts features for all patches in `dir` named `<camera>_<object>_<frame>.<ext>`.
///
/// Object and camera identifiers must not contain underscores here; the
/// precomputed-feature CSV has no such restriction.
pub fn extract_patch_features(
    dir: &Path,
    extractor: &dyn FeatureExtractor,
) -> Result<FeatureStore, FileFormatError> {
    let mut store = FeatureStore::new();
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(|source| FileFormatError::Read {
            path: dir.display().to_string(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("png") | Some("ppm")
            )
        })
        .collect();
    entries.sort();
    for path in entries {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default();
        let parts: Vec<&str> = stem.split('_').collect();
        if parts.len() != 3 {
            return Err(FileFormatError::invalid(
                &path.display().to_string(),
                "patch files must be named <camera>_<object>_<frame>",
            ));
        }
        let frame: i64 = parts[2].parse().map_err(|_| {
            FileFormatError::invalid(&path.display().to_string(), "bad frame number in name")
        })?;
        let patch = load_patch(&path)?;
        let feature = extractor.extract(&patch).map_err(|e| {
            FileFormatError::invalid(&path.display().to_string(), e.to_string())
        })?;
        store.insert((parts[0].to_string(), parts[1].to_string(), frame), feature);
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::MatchWeights;
    use crate::metric::{learn_metric, metric_distance, PairLabel};
    use crate::synth::{generate_scene, SceneConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn track_csv_round_trip() {
        let scene = generate_scene(&SceneConfig::new(3, 4)).unwrap();
        let csv = tracks_to_csv_base(&scene.dataset.tracks);
        let parsed = parse_tracks_csv(&csv, "<mem>").unwrap();
        assert_eq!(parsed, scene.dataset.tracks);
    }

    #[test]
    fn feature_csv_round_trip() {
        let scene = generate_scene(&SceneConfig::new(2, 4)).unwrap();
        let csv = features_to_csv(&scene.dataset.features);
        let parsed = parse_features_csv(&csv, "<mem>").unwrap();
        assert_eq!(parsed.len(), scene.dataset.features.len());
        for (key, feature) in &scene.dataset.features {
            assert_eq!(parsed[key].values, feature.values);
        }
    }

    #[test]
    fn calibration_json_round_trip() {
        let scene = generate_scene(&SceneConfig::new(2, 4)).unwrap();
        let json = calibrations_to_json(&scene.dataset.cameras);
        let parsed = parse_calibrations_json(&json, "<mem>").unwrap();
        assert_eq!(parsed, scene.dataset.cameras);
    }

    #[test]
    fn metric_json_round_trip_preserves_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pairs: Vec<PairLabel> = (0..100)
            .map(|i| {
                let a: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
                let b: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
                PairLabel {
                    feature_a: FeatureVector::new(a, "t"),
                    feature_b: FeatureVector::new(b, "t"),
                    same_identity: i % 2 == 0,
                }
            })
            .collect();
        let metric =
            learn_metric(&pairs, crate::metric::LearnerId::Kissme, Some(4), 1e-3).unwrap();
        let parsed = parse_metric_json(&metric_to_json(&metric), "<mem>").unwrap();
        for p in pairs.iter().take(10) {
            let a = metric_distance(&metric, &p.feature_a, &p.feature_b).unwrap();
            let b = metric_distance(&parsed, &p.feature_a, &p.feature_b).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_json_uses_named_pose_pairs() {
        let w =
            MatchWeights::from_values([2.0, 0.1, 0.2, 0.3, 1.5, 0.4, 0.5, 1.2, 0.6, 1.0]).unwrap();
        let json = serde_json::to_string(&w).unwrap();
        assert!(json.contains("\"ff\":2.0"));
        assert!(json.contains("\"rl\":0.5"));
        let parsed: MatchWeights = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, w);
    }

    #[test]
    fn malformed_inputs_are_reported_with_context() {
        let err = parse_tracks_csv("bad header\n", "t.csv").unwrap_err();
        assert!(err.to_string().contains("t.csv"));
        let err = parse_features_csv("object_id,camera_id,frame,zz\n", "f.csv").unwrap_err();
        assert!(err.to_string().contains("f.csv"));
        let err =
            parse_features_csv("object_id,camera_id,frame,2\np,cam,0,1.0,NaN\n", "f.csv")
                .unwrap_err();
        assert!(err.to_string().contains("finite"));
        let err =
            parse_tracks_csv(&format!("{TRACK_CSV_BASE_HEADER}\ncam,p,0,0,0,0,0,-1,5\n"), "t.csv")
                .unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn scene_write_is_deterministic() {
        let cfg = SceneConfig::new(3, 9);
        let scene = generate_scene(&cfg).unwrap();
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        write_scene(&scene, dir1.path()).unwrap();
        write_scene(&generate_scene(&cfg).unwrap(), dir2.path()).unwrap();
        for file in [TRACKS_FILE, FEATURES_FILE, CALIBRATION_FILE, GROUND_TRUTH_FILE] {
            let a = std::fs::read(dir1.path().join(file)).unwrap();
            let b = std::fs::read(dir2.path().join(file)).unwrap();
            assert_eq!(a, b, "{file} differs between identical runs");
        }
    }

    #[test]
    fn patch_features_extract_from_named_images() {
        use crate::descriptor::{BuiltinDescriptor, BUILTIN_DIM};
        let dir = tempfile::tempdir().unwrap();
        for (name, shade) in [("cama_p0_0.png", 40u8), ("cama_p0_3.png", 200u8)] {
            let img = image::RgbImage::from_pixel(20, 52, image::Rgb([shade, shade, shade]));
            img.save(dir.path().join(name)).unwrap();
        }
        let store = extract_patch_features(dir.path(), &BuiltinDescriptor).unwrap();
        assert_eq!(store.len(), 2);
        let f = &store[&("cama".to_string(), "p0".to_string(), 0)];
        assert_eq!(f.dim(), BUILTIN_DIM);
        assert!(store.contains_key(&("cama".to_string(), "p0".to_string(), 3)));
    }

    #[test]
    fn models_json_round_trip() {
        let scene = generate_scene(&SceneConfig::new(2, 15)).unwrap();
        let processed =
            crate::pipeline::ProcessedModels::build(&scene.dataset, &Default::default()).unwrap();
        let json = models_to_json(&processed.models);
        let parsed = parse_models_json(&json, "<mem>").unwrap();
        assert_eq!(parsed.len(), processed.models.len());
        for (key, model) in &processed.models {
            let p = &parsed[key];
            assert_eq!(p.sample_count(), model.sample_count());
            for label in PoseLabel::ALL {
                assert_eq!(p.group(label).len(), model.group(label).len());
            }
        }
    }
}
