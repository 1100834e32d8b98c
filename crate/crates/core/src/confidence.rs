//! Sample confidence scoring and filtering.
//!
//! A sample is reliable when its smoothed pose angle is stable between
//! neighboring frames, the person is actually walking, and the bounding box
//! is not covered by someone closer to the camera. The three requirements
//! multiply into a confidence in `[0, 1]` and samples below a threshold are
//! discarded before appearance modeling.

use crate::camera::CameraModel;
use crate::pose::{normalize_degrees, Track, TrackSample};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfidenceError {
    #[error("sample in track {0} is missing a confidence score")]
    MissingConfidence(String),
    #[error("every sample of track {0} fell below the confidence threshold")]
    AllSamplesRejected(String),
}

/// Per-sample reliability factors and their product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceReport {
    /// Angle variation to the previous frame, degrees in `[0, 180]`.
    pub delta: f64,
    /// Ground speed in m/s.
    pub speed: f64,
    /// Fraction of the bounding box covered by closer people, `[0, 1]`.
    pub occlusion: f64,
    /// `exp(-delta_rad) * tanh(speed / speed_ref) * (1 - occlusion)`.
    pub confidence: f64,
}

/// Wraparound-safe variation between two consecutive smoothed angles.
///
/// Returns `min(|a - b|, ||a - b| - 360|)`, which stays small across the
/// 0/360 discontinuity; the result lies in `[0, 180]` for angles in
/// `[0, 360)`.
pub fn angle_variation(prev_angle: f64, cur_angle: f64) -> f64 {
    let d = (prev_angle - cur_angle).abs();
    d.min((d - 360.0).abs())
}

/// Largest fraction of `sample`'s bounding box covered by a strictly closer
/// person in the same frame.
///
/// Depth order is the ground-plane distance to the camera position; a person
/// farther from the camera than `sample` never counts as an occluder.
pub fn occlusion_rate(
    sample: &TrackSample,
    same_frame_samples: &[TrackSample],
    camera: &CameraModel,
) -> f64 {
    occlusion_rate_with_occluder(sample, same_frame_samples, camera).0
}

/// As [`occlusion_rate`], also reporting which object occludes most.
pub fn occlusion_rate_with_occluder(
    sample: &TrackSample,
    same_frame_samples: &[TrackSample],
    camera: &CameraModel,
) -> (f64, Option<String>) {
    let cam = camera.ground_position();
    let dist2 = |p: [f64; 2]| {
        let dx = p[0] - cam[0];
        let dy = p[1] - cam[1];
        dx * dx + dy * dy
    };
    let own_dist = dist2(sample.world_pos);
    let own_area = sample.bbox.area();
    let mut best = 0.0f64;
    let mut who = None;
    for other in same_frame_samples {
        if other.object_id == sample.object_id {
            continue;
        }
        debug_assert_eq!(other.frame, sample.frame);
        if dist2(other.world_pos) >= own_dist {
            continue;
        }
        let overlap = sample.bbox.intersection_area(&other.bbox);
        if overlap <= 0.0 {
            continue;
        }
        let ratio = overlap / own_area;
        if ratio > best {
            best = ratio;
            who = Some(other.object_id.clone());
        }
    }
    (best.min(1.0), who)
}

/// Combines the three reliability factors into a confidence in `[0, 1]`.
///
/// `delta` is converted to radians before the exponential so that a few
/// degrees of frame-to-frame variation keeps the factor near 1, and speed is
/// normalized by `speed_ref` so the tanh saturates for ordinary walking.
pub fn sample_confidence(delta: f64, speed: f64, occlusion: f64, speed_ref: f64) -> f64 {
    debug_assert!((0.0..=180.0).contains(&delta));
    debug_assert!((0.0..=1.0).contains(&occlusion));
    debug_assert!(speed >= 0.0 && speed_ref > 0.0);
    (-delta.to_radians()).exp() * (speed / speed_ref).tanh() * (1.0 - occlusion)
}

/// Scores every sample of `track` and stores the confidence on the samples.
///
/// `frame_lookup` must yield all samples of the same camera and frame (used
/// for the occlusion term). The first sample's angle variation is zero by
/// convention; samples without a smoothed angle take `delta = 180` (fully
/// unstable).
pub fn score_track<'a, F>(
    track: &Track,
    camera: &CameraModel,
    speed_ref: f64,
    frame_lookup: F,
) -> (Track, Vec<ConfidenceReport>)
where
    F: Fn(i64) -> &'a [TrackSample],
{
    let mut out = track.clone();
    let mut reports = Vec::with_capacity(track.len());
    let mut prev_angle: Option<f64> = None;
    for (i, sample) in track.samples.iter().enumerate() {
        let delta = match (prev_angle, sample.smooth_angle) {
            (Some(p), Some(c)) => angle_variation(normalize_degrees(p), normalize_degrees(c)),
            (None, Some(_)) => 0.0,
            _ => 180.0,
        };
        prev_angle = sample.smooth_angle;
        let speed = sample.speed().unwrap_or(0.0);
        let occlusion = occlusion_rate(sample, frame_lookup(sample.frame), camera);
        let confidence = sample_confidence(delta, speed, occlusion, speed_ref);
        out.samples[i].confidence = Some(confidence);
        reports.push(ConfidenceReport {
            delta,
            speed,
            occlusion,
            confidence,
        });
    }
    (out, reports)
}

/// Retains exactly the samples with confidence strictly above `threshold`.
pub fn filter_samples(track: &Track, threshold: f64) -> Result<Track, ConfidenceError> {
    let mut kept = Vec::new();
    for sample in &track.samples {
        let conf = sample
            .confidence
            .ok_or_else(|| ConfidenceError::MissingConfidence(track.object_id.clone()))?;
        if conf > threshold {
            kept.push(sample.clone());
        }
    }
    if kept.is_empty() {
        return Err(ConfidenceError::AllSamplesRejected(track.object_id.clone()));
    }
    Ok(Track {
        object_id: track.object_id.clone(),
        camera_id: track.camera_id.clone(),
        samples: kept,
    })
}
