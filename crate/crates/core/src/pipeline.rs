//! Stage orchestration over an in-memory dataset.
//!
//! Raw tracks (positions and boxes only) are carried through velocity
//! estimation, pose angles, polar smoothing, confidence scoring, and
//! filtering, and finally grouped into multi-pose models. The CLI, the
//! evaluation harness, and the Python bindings all share this path.

use crate::camera::CameraModel;
use crate::confidence::{filter_samples, score_track, ConfidenceError, ConfidenceReport};
use crate::model::{build_multipose_model, FeatureStore, ModelError, MultiPoseModel};
use crate::pose::{compute_velocity, estimate_track_angles, smooth_angles, PoseError, Track, TrackSample};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("camera {0} referenced by track {1} is not calibrated")]
    UnknownCamera(String, String),
    #[error(transparent)]
    Pose(#[from] PoseError),
    #[error(transparent)]
    Confidence(#[from] ConfidenceError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Per-stage parameters with their documented defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineParams {
    /// Capture frame rate in Hz, for velocities in m/s.
    pub frame_rate: f64,
    /// Moving-average half width `m` for polar smoothing.
    pub smoothing_half_width: usize,
    /// Samples with confidence at or below this are dropped.
    pub conf_threshold: f64,
    /// Speed normalization for the confidence tanh term, m/s.
    pub speed_ref: f64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            frame_rate: 15.0,
            smoothing_half_width: 10,
            conf_threshold: 0.8,
            speed_ref: 1.0,
        }
    }
}

/// Calibrated cameras, raw tracks, and per-sample features.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub cameras: Vec<CameraModel>,
    pub tracks: Vec<Track>,
    pub features: FeatureStore,
}

impl Dataset {
    pub fn camera(&self, camera_id: &str) -> Option<&CameraModel> {
        self.cameras.iter().find(|c| c.camera_id() == camera_id)
    }

    /// Sorted identifiers of all objects observed anywhere.
    pub fn object_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.tracks.iter().map(|t| t.object_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }
}

/// Same-camera samples grouped by frame, for occlusion lookups.
pub struct FrameIndex {
    by_frame: BTreeMap<(String, i64), Vec<TrackSample>>,
    empty: Vec<TrackSample>,
}

impl FrameIndex {
    pub fn build(tracks: &[Track]) -> Self {
        let mut by_frame: BTreeMap<(String, i64), Vec<TrackSample>> = BTreeMap::new();
        for track in tracks {
            for sample in &track.samples {
                by_frame
                    .entry((sample.camera_id.clone(), sample.frame))
                    .or_default()
                    .push(sample.clone());
            }
        }
        Self {
            by_frame,
            empty: Vec::new(),
        }
    }

    pub fn samples(&self, camera_id: &str, frame: i64) -> &[TrackSample] {
        self.by_frame
            .get(&(camera_id.to_string(), frame))
            .unwrap_or(&self.empty)
    }
}

/// A track after pose estimation, smoothing, and confidence scoring.
#[derive(Debug, Clone)]
pub struct ProcessedTrack {
    /// Scored track with velocities, angles, and confidences on every sample.
    pub scored: Track,
    /// Confidence factors per scored sample.
    pub reports: Vec<ConfidenceReport>,
    /// Confidence-filtered track. When filtering would reject everything the
    /// scored track is kept as-is and `all_rejected` is set.
    pub filtered: Track,
    pub all_rejected: bool,
}

/// Runs velocity, angle, smoothing, confidence, and filter stages on one track.
pub fn process_track(
    track: &Track,
    camera: &CameraModel,
    frames: &FrameIndex,
    params: &PipelineParams,
) -> Result<ProcessedTrack, PipelineError> {
    let with_velocity = compute_velocity(track, params.frame_rate)?;
    let with_angles = estimate_track_angles(&with_velocity, camera)?;
    let smoothed = smooth_angles(&with_angles, params.smoothing_half_width)?;
    let camera_id = smoothed.camera_id.clone();
    let (scored, reports) = score_track(&smoothed, camera, params.speed_ref, |frame| {
        frames.samples(&camera_id, frame)
    });
    match filter_samples(&scored, params.conf_threshold) {
        Ok(filtered) => Ok(ProcessedTrack {
            scored,
            reports,
            filtered,
            all_rejected: false,
        }),
        Err(ConfidenceError::AllSamplesRejected(_)) => Ok(ProcessedTrack {
            filtered: scored.clone(),
            scored,
            reports,
            all_rejected: true,
        }),
        Err(e) => Err(e.into()),
    }
}

/// All multi-pose models of a dataset, keyed by `(camera_id, object_id)`.
#[derive(Debug, Clone)]
pub struct ProcessedModels {
    pub models: BTreeMap<(String, String), MultiPoseModel>,
    /// Tracks whose samples were all rejected and kept unfiltered instead.
    pub fallback_tracks: Vec<(String, String)>,
}

impl ProcessedModels {
    pub fn build(dataset: &Dataset, params: &PipelineParams) -> Result<Self, PipelineError> {
        let frames = FrameIndex::build(&dataset.tracks);
        let mut models = BTreeMap::new();
        let mut fallback_tracks = Vec::new();
        for track in &dataset.tracks {
            if track.len() < 2 {
                continue;
            }
            let camera = dataset.camera(&track.camera_id).ok_or_else(|| {
                PipelineError::UnknownCamera(track.camera_id.clone(), track.object_id.clone())
            })?;
            let processed = process_track(track, camera, &frames, params)?;
            if processed.all_rejected {
                fallback_tracks.push((track.camera_id.clone(), track.object_id.clone()));
            }
            let model = build_multipose_model(&processed.filtered, &dataset.features)?;
            models.insert((track.camera_id.clone(), track.object_id.clone()), model);
        }
        Ok(Self {
            models,
            fallback_tracks,
        })
    }
}
