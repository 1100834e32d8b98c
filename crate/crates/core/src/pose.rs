//! Trajectory-based pose estimation.
//!
//! A person's pose angle is the signed angle on the ground plane between the
//! person-to-camera vector and the walking direction: 0 deg means walking
//! straight toward the camera (front view), 180 deg straight away (back
//! view), 90/270 deg lateral. Raw per-frame angles are noisy and are smoothed
//! with a moving average in polar coordinates, which is stable across the
//! 0/360 wraparound where a plain arithmetic average is not.

use crate::camera::CameraModel;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoseError {
    #[error("track {0} has fewer than 2 samples; velocity is undefined")]
    TrackTooShort(String),
    #[error("velocity is zero; pose angle is undefined")]
    ZeroVelocity,
    #[error("object coincides with the camera ground position")]
    ObjectAtCamera,
    #[error("no sample in track {0} has a usable velocity")]
    NoUsableVelocity(String),
    #[error("sample is missing a raw angle; estimate angles before smoothing")]
    MissingRawAngle,
    #[error("track frames must be strictly increasing (frame {0} follows {1})")]
    FramesNotIncreasing(i64, i64),
}

/// Axis-aligned pixel bounding box, top-left anchored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        assert!(w > 0.0 && h > 0.0, "bounding box must have positive size");
        Self { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Area of overlap with `other`; zero when disjoint.
    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let ix = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let iy = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        if ix > 0.0 && iy > 0.0 {
            ix * iy
        } else {
            0.0
        }
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.x && u <= self.x + self.w && v >= self.y && v <= self.y + self.h
    }
}

/// One timestamped observation of one person in one camera.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackSample {
    pub object_id: String,
    pub camera_id: String,
    pub frame: i64,
    /// Ground-plane position `[X, Y]` in meters (`Z = 0` implied).
    pub world_pos: [f64; 2],
    pub bbox: BoundingBox,
    /// Ground-plane velocity in m/s; set by [`compute_velocity`].
    pub velocity: Option<[f64; 2]>,
    /// Pose angle in degrees, `[0, 360)`.
    pub raw_angle: Option<f64>,
    /// Smoothed pose angle in degrees, `[0, 360)`.
    pub smooth_angle: Option<f64>,
    /// Set when polar smoothing degenerated and the raw angle was kept.
    pub smoothing_fallback: bool,
    /// Sample reliability in `[0, 1]`; set by the confidence stage.
    pub confidence: Option<f64>,
}

impl TrackSample {
    pub fn new(
        object_id: impl Into<String>,
        camera_id: impl Into<String>,
        frame: i64,
        world_pos: [f64; 2],
        bbox: BoundingBox,
    ) -> Self {
        Self {
            object_id: object_id.into(),
            camera_id: camera_id.into(),
            frame,
            world_pos,
            bbox,
            velocity: None,
            raw_angle: None,
            smooth_angle: None,
            smoothing_fallback: false,
            confidence: None,
        }
    }

    pub fn speed(&self) -> Option<f64> {
        self.velocity.map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt())
    }
}

/// Time-ordered samples of one person in one camera.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub object_id: String,
    pub camera_id: String,
    pub samples: Vec<TrackSample>,
}

impl Track {
    /// Builds a track, checking that frames are strictly increasing.
    pub fn new(samples: Vec<TrackSample>) -> Result<Self, PoseError> {
        assert!(!samples.is_empty(), "a track needs at least one sample");
        for pair in samples.windows(2) {
            if pair[1].frame <= pair[0].frame {
                return Err(PoseError::FramesNotIncreasing(pair[1].frame, pair[0].frame));
            }
        }
        Ok(Self {
            object_id: samples[0].object_id.clone(),
            camera_id: samples[0].camera_id.clone(),
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn frame_start(&self) -> i64 {
        self.samples.first().map(|s| s.frame).unwrap_or(0)
    }

    pub fn frame_end(&self) -> i64 {
        self.samples.last().map(|s| s.frame).unwrap_or(0)
    }
}

/// Normalizes an angle in degrees to `[0, 360)`.
pub fn normalize_degrees(angle: f64) -> f64 {
    let a = angle % 360.0;
    if a < 0.0 {
        a + 360.0
    } else {
        a
    }
}

/// Signed angle from `from` to `to` in degrees, `[0, 360)`.
fn signed_angle_degrees(from: [f64; 2], to: [f64; 2]) -> f64 {
    let dot = from[0] * to[0] + from[1] * to[1];
    let cross = from[0] * to[1] - from[1] * to[0];
    normalize_degrees(cross.atan2(dot).to_degrees())
}

/// Fills per-sample ground velocities by forward differences scaled to m/s.
///
/// Each sample takes the difference to its successor divided by the elapsed
/// time; the final sample copies its predecessor so that every sample can be
/// pose-classified.
pub fn compute_velocity(track: &Track, frame_rate: f64) -> Result<Track, PoseError> {
    if track.len() < 2 {
        return Err(PoseError::TrackTooShort(track.object_id.clone()));
    }
    assert!(frame_rate > 0.0, "frame rate must be positive");
    let mut out = track.clone();
    let n = out.samples.len();
    for i in 0..n - 1 {
        let (cur, next) = (&track.samples[i], &track.samples[i + 1]);
        let dframes = (next.frame - cur.frame) as f64;
        let dt = dframes / frame_rate;
        out.samples[i].velocity = Some([
            (next.world_pos[0] - cur.world_pos[0]) / dt,
            (next.world_pos[1] - cur.world_pos[1]) / dt,
        ]);
    }
    out.samples[n - 1].velocity = out.samples[n - 2].velocity;
    Ok(out)
}

/// Pose angle of a single sample relative to `camera`, in degrees `[0, 360)`.
///
/// The magnitude folded to `[0, 180]` equals the arccos of the normalized dot
/// product between the person-to-camera vector and the velocity; the sign of
/// their cross product distinguishes left-turning from right-turning poses so
/// the full circle is covered.
pub fn estimate_pose_angle(sample: &TrackSample, camera: &CameraModel) -> Result<f64, PoseError> {
    let v = sample.velocity.ok_or(PoseError::ZeroVelocity)?;
    if v[0] == 0.0 && v[1] == 0.0 {
        return Err(PoseError::ZeroVelocity);
    }
    let cam = camera.ground_position();
    let c = [cam[0] - sample.world_pos[0], cam[1] - sample.world_pos[1]];
    if c[0] == 0.0 && c[1] == 0.0 {
        return Err(PoseError::ObjectAtCamera);
    }
    Ok(signed_angle_degrees(c, v))
}

/// Estimates the raw pose angle of every sample in `track`.
///
/// Samples whose velocity is zero keep the nearest valid neighbor's angle
/// (previous first, then next); the confidence stage scores them near zero
/// through the speed term, so they are rejected rather than mis-binned.
pub fn estimate_track_angles(track: &Track, camera: &CameraModel) -> Result<Track, PoseError> {
    let mut out = track.clone();
    let mut angles: Vec<Option<f64>> = Vec::with_capacity(track.len());
    for sample in &track.samples {
        angles.push(estimate_pose_angle(sample, camera).ok());
    }
    if angles.iter().all(|a| a.is_none()) {
        return Err(PoseError::NoUsableVelocity(track.object_id.clone()));
    }
    let mut last_valid: Option<f64> = None;
    let mut filled = angles.clone();
    for (i, a) in angles.iter().enumerate() {
        match a {
            Some(v) => last_valid = Some(*v),
            None => {
                filled[i] = last_valid.or_else(|| angles[i..].iter().flatten().next().copied());
            }
        }
    }
    for (sample, angle) in out.samples.iter_mut().zip(filled) {
        sample.raw_angle = angle;
    }
    Ok(out)
}

/// Moving-average smoothing of the raw angle sequence in polar coordinates.
///
/// For each sample the window `[t - m, t + m]` (clamped to the track bounds)
/// is summed as unit vectors and the smoothed angle is the atan2 of the sums.
/// When both sums vanish the raw angle is kept and the sample flagged.
pub fn smooth_angles(track: &Track, window_half_width: usize) -> Result<Track, PoseError> {
    let raw: Vec<f64> = track
        .samples
        .iter()
        .map(|s| s.raw_angle.ok_or(PoseError::MissingRawAngle))
        .collect::<Result<_, _>>()?;
    let mut out = track.clone();
    let n = raw.len();
    let m = window_half_width;
    for t in 0..n {
        let lo = t.saturating_sub(m);
        let hi = (t + m).min(n - 1);
        let (mut sin_sum, mut cos_sum) = (0.0f64, 0.0f64);
        for angle in &raw[lo..=hi] {
            let r = angle.to_radians();
            sin_sum += r.sin();
            cos_sum += r.cos();
        }
        if sin_sum.abs() < 1e-12 && cos_sum.abs() < 1e-12 {
            out.samples[t].smooth_angle = Some(raw[t]);
            out.samples[t].smoothing_fallback = true;
        } else {
            out.samples[t].smooth_angle = Some(normalize_degrees(sin_sum.atan2(cos_sum).to_degrees()));
            out.samples[t].smoothing_fallback = false;
        }
    }
    Ok(out)
}

/// Circular distance between two angles in degrees, in `[0, 180]`.
pub fn circular_error(a: f64, b: f64) -> f64 {
    let d = (normalize_degrees(a) - normalize_degrees(b)).abs();
    d.min(360.0 - d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::simple_intrinsics;
    use nalgebra::{Matrix3, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn sample_at(frame: i64, pos: [f64; 2]) -> TrackSample {
        TrackSample::new("p1", "cam", frame, pos, BoundingBox::new(0.0, 0.0, 10.0, 20.0))
    }

    fn track_from_positions(positions: &[[f64; 2]]) -> Track {
        let samples = positions
            .iter()
            .enumerate()
            .map(|(i, p)| sample_at(i as i64, *p))
            .collect();
        Track::new(samples).unwrap()
    }

    fn camera_at_origin() -> CameraModel {
        CameraModel::look_at(
            "cam",
            simple_intrinsics(500.0, 320.0, 240.0),
            Vector3::new(0.0, 0.0, 3.0),
            Vector3::new(0.0, 5.0, 0.0),
        )
        .unwrap()
    }

    #[test]
    fn unit_step_velocity() {
        let track = track_from_positions(&[[0.0, 0.0], [1.0, 0.0]]);
        let out = compute_velocity(&track, 1.0).unwrap();
        assert_eq!(out.samples[0].velocity, Some([1.0, 0.0]));
        // Final sample copies its predecessor.
        assert_eq!(out.samples[1].velocity, Some([1.0, 0.0]));
    }

    #[test]
    fn stationary_track_has_zero_velocity() {
        let track = track_from_positions(&[[2.0, 2.0]; 5]);
        let out = compute_velocity(&track, 15.0).unwrap();
        for s in &out.samples {
            assert_eq!(s.velocity, Some([0.0, 0.0]));
        }
    }

    #[test]
    fn velocity_matches_finite_difference_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fps = 15.0;
        let positions: Vec<[f64; 2]> = (0..60)
            .scan([0.0f64, 0.0f64], |p, _| {
                p[0] += rng.random_range(-0.1..0.1);
                p[1] += rng.random_range(-0.1..0.1);
                Some(*p)
            })
            .collect();
        let out = compute_velocity(&track_from_positions(&positions), fps).unwrap();
        for i in 0..positions.len() - 1 {
            let expect = [
                (positions[i + 1][0] - positions[i][0]) * fps,
                (positions[i + 1][1] - positions[i][1]) * fps,
            ];
            let got = out.samples[i].velocity.unwrap();
            assert!((got[0] - expect[0]).abs() < 1e-12);
            assert!((got[1] - expect[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn track_too_short_for_velocity() {
        let track = track_from_positions(&[[0.0, 0.0]]);
        assert!(matches!(
            compute_velocity(&track, 15.0),
            Err(PoseError::TrackTooShort(_))
        ));
    }

    fn posed_sample(pos: [f64; 2], velocity: [f64; 2]) -> TrackSample {
        let mut s = sample_at(0, pos);
        s.velocity = Some(velocity);
        s
    }

    #[test]
    fn walking_toward_camera_is_front() {
        // Camera ground position is (0, 0); person at (0, 10) walking toward it.
        let cam = camera_at_origin();
        let angle = estimate_pose_angle(&posed_sample([0.0, 10.0], [0.0, -1.0]), &cam).unwrap();
        assert!(angle.abs() < 1e-12);
    }

    #[test]
    fn walking_away_from_camera_is_back() {
        let cam = camera_at_origin();
        let angle = estimate_pose_angle(&posed_sample([0.0, 10.0], [0.0, 1.0]), &cam).unwrap();
        assert!((angle - 180.0).abs() < 1e-12);
    }

    #[test]
    fn pose_angle_matches_atan2_and_arccos_oracles() {
        let cam = camera_at_origin();
        let pos = [3.0, 7.0];
        let c = [-pos[0], -pos[1]];
        for k in 0..36 {
            let phi = (k as f64) * 10.0_f64.to_radians();
            let v = [phi.cos() * 1.3, phi.sin() * 1.3];
            let angle = estimate_pose_angle(&posed_sample(pos, v), &cam).unwrap();
            let cross = c[0] * v[1] - c[1] * v[0];
            let dot = c[0] * v[0] + c[1] * v[1];
            let oracle = normalize_degrees(cross.atan2(dot).to_degrees());
            assert!(circular_error(angle, oracle) < 1e-9);
            // Folding the signed angle to [0, 180] reproduces the arccos form.
            let folded = if angle > 180.0 { 360.0 - angle } else { angle };
            let norm_c = (c[0] * c[0] + c[1] * c[1]).sqrt();
            let norm_v = (v[0] * v[0] + v[1] * v[1]).sqrt();
            let arccos = (dot / (norm_c * norm_v)).clamp(-1.0, 1.0).acos().to_degrees();
            assert!((folded - arccos).abs() < 1e-9);
        }
    }

    #[test]
    fn pose_angle_invariant_under_positive_scaling() {
        let cam = camera_at_origin();
        let base = estimate_pose_angle(&posed_sample([2.0, 5.0], [0.4, -0.9]), &cam).unwrap();
        for scale in [0.01, 0.5, 42.0] {
            let scaled =
                estimate_pose_angle(&posed_sample([2.0, 5.0], [0.4 * scale, -0.9 * scale]), &cam)
                    .unwrap();
            assert!(circular_error(base, scaled) < 1e-9);
        }
    }

    #[test]
    fn zero_velocity_and_object_at_camera_are_errors() {
        let cam = camera_at_origin();
        assert_eq!(
            estimate_pose_angle(&posed_sample([1.0, 1.0], [0.0, 0.0]), &cam),
            Err(PoseError::ZeroVelocity)
        );
        assert_eq!(
            estimate_pose_angle(&posed_sample([0.0, 0.0], [1.0, 0.0]), &cam),
            Err(PoseError::ObjectAtCamera)
        );
    }

    fn track_with_angles(angles: &[f64]) -> Track {
        let mut track = track_from_positions(&vec![[0.0, 0.0]; angles.len()]);
        for (s, a) in track.samples.iter_mut().zip(angles) {
            s.raw_angle = Some(*a);
        }
        track
    }

    #[test]
    fn constant_angles_are_a_fixed_point() {
        let track = track_with_angles(&[42.0; 9]);
        let out = smooth_angles(&track, 3).unwrap();
        for s in &out.samples {
            assert!((s.smooth_angle.unwrap() - 42.0).abs() < 1e-9);
        }
    }

    #[test]
    fn wraparound_alternation_smooths_to_zero() {
        let angles: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 359.0 } else { 1.0 }).collect();
        let out = smooth_angles(&track_with_angles(&angles), 2).unwrap();
        // Windows holding the two values in equal counts cancel exactly:
        // t = 1 and t = 8 clamp to four samples, two of each.
        for t in [1usize, 8] {
            assert!(circular_error(out.samples[t].smooth_angle.unwrap(), 0.0) < 1e-9);
        }
        // Odd windows are off by a fraction of a degree, never near 180.
        for s in &out.samples {
            assert!(circular_error(s.smooth_angle.unwrap(), 0.0) < 0.5);
        }
        // Naive arithmetic averaging lands far on the wrong side of the circle.
        for t in 2..8usize {
            let naive: f64 = angles[t - 2..=t + 2].iter().sum::<f64>() / 5.0;
            assert!(circular_error(naive, 0.0) > 140.0, "naive average {naive}");
        }
    }

    #[test]
    fn smoothing_reduces_circular_error_on_noisy_ramp() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let noise = Normal::new(0.0, 10.0).unwrap();
        let n = 400;
        let truth: Vec<f64> = (0..n).map(|i| 360.0 * i as f64 / n as f64).collect();
        let noisy: Vec<f64> = truth
            .iter()
            .map(|t| normalize_degrees(t + noise.sample(&mut rng)))
            .collect();
        let out = smooth_angles(&track_with_angles(&noisy), 10).unwrap();
        let raw_err: f64 = noisy
            .iter()
            .zip(&truth)
            .map(|(a, t)| circular_error(*a, *t))
            .sum::<f64>()
            / n as f64;
        let smooth_err: f64 = out
            .samples
            .iter()
            .zip(&truth)
            .map(|(s, t)| circular_error(s.smooth_angle.unwrap(), *t))
            .sum::<f64>()
            / n as f64;
        assert!(
            smooth_err < raw_err,
            "smoothed error {smooth_err:.3} should beat raw {raw_err:.3}"
        );
    }

    #[test]
    fn smoothing_is_rotation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let angles: Vec<f64> = (0..50).map(|_| rng.random_range(0.0..360.0)).collect();
        let base = smooth_angles(&track_with_angles(&angles), 4).unwrap();
        for phi in [13.0, 181.5, 350.0] {
            let shifted: Vec<f64> = angles.iter().map(|a| normalize_degrees(a + phi)).collect();
            let out = smooth_angles(&track_with_angles(&shifted), 4).unwrap();
            for (s, b) in out.samples.iter().zip(&base.samples) {
                let expect = normalize_degrees(b.smooth_angle.unwrap() + phi);
                assert!(circular_error(s.smooth_angle.unwrap(), expect) < 1e-9);
            }
        }
    }

    #[test]
    fn cancelling_angles_fall_back_to_raw() {
        // Two opposite unit vectors cancel exactly within every window.
        let out = smooth_angles(&track_with_angles(&[0.0, 180.0]), 1).unwrap();
        assert!(out.samples.iter().any(|s| s.smoothing_fallback));
        assert_eq!(out.samples[0].smooth_angle, Some(0.0));
        assert_eq!(out.samples[1].smooth_angle, Some(180.0));
    }

    #[test]
    fn zero_velocity_samples_borrow_neighbor_angles() {
        let cam = camera_at_origin();
        let track = track_from_positions(&[[0.0, 5.0], [0.0, 4.0], [0.0, 4.0], [0.0, 3.0]]);
        let out = compute_velocity(&track, 1.0).unwrap();
        let out = estimate_track_angles(&out, &cam).unwrap();
        // Sample 1 is stationary (velocity zero): it keeps sample 0's angle.
        assert_eq!(out.samples[1].raw_angle, out.samples[0].raw_angle);
        assert!(out.samples.iter().all(|s| s.raw_angle.is_some()));
    }

    #[test]
    fn rotation_matrix_helper_in_camera_is_consistent() {
        // estimate_pose_angle only uses the camera ground position.
        let cam = CameraModel::new(
            "flat",
            Matrix3::identity(),
            Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0),
            Vector3::new(4.0, -3.0, 10.0),
        )
        .unwrap();
        assert_eq!(cam.ground_position(), [4.0, -3.0]);
    }
}
