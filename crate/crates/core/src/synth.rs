//! Synthetic multi-camera scene generation.
//!
//! Identities walk smooth waypoint paths on the ground plane, observed by
//! calibrated cameras. Every emitted artifact is derived from the same
//! geometry: bounding boxes come from projecting feet and head, occlusions
//! come from actual box overlaps with closer agents (extra "blocker" agents
//! are spawned to cross in front of people), and appearance features combine
//! an identity vector, a pose-bin direction, noise, and occluder mixing. The
//! generator records exact ground truth, which makes it the oracle for the
//! rest of the pipeline.

use crate::camera::{simple_intrinsics, CameraModel, WorldPoint};
use crate::confidence::occlusion_rate_with_occluder;
use crate::model::{assign_pose_group, FeatureStore, FeatureVector, PoseLabel};
use crate::pipeline::Dataset;
use crate::pose::{normalize_degrees, BoundingBox, Track, TrackSample};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid scene config: {0}")]
    ConfigInvalid(String),
}

/// Walkable ground region, in meters.
const REGION: f64 = 6.0;
const PERSON_HEIGHT: f64 = 1.7;
const BLOCKER_HEIGHT: f64 = 1.75;
/// Blockers stand at this fraction of the camera-to-person distance.
const BLOCKER_DEPTH_FRACTION: f64 = 0.62;
const BLOCKER_HALF_LIFE: i64 = 5;
const MAX_BLOCKERS_PER_CAMERA: usize = 200;

/// Scene generation parameters.
#[derive(Debug, Clone)]
pub struct SceneConfig {
    pub identity_count: usize,
    pub cameras: Vec<CameraModel>,
    pub frame_rate: f64,
    /// Scene length in frames.
    pub duration: usize,
    /// Walking speed range in m/s.
    pub walk_speed_range: (f64, f64),
    pub appearance_dim: usize,
    /// How strongly appearance varies with the pose bin, in `[0, 1]`.
    pub pose_appearance_strength: f64,
    /// Per-sample probability of spawning an occluding crosser.
    pub occlusion_probability: f64,
    /// Standard deviation of per-coordinate feature noise.
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Two cameras on opposite sides of the walk region, wide enough to see all
/// of it.
pub fn default_two_camera_rig() -> Vec<CameraModel> {
    let k = simple_intrinsics(420.0, 352.0, 288.0);
    vec![
        CameraModel::look_at(
            "cam_a",
            k,
            Vector3::new(0.0, -20.0, 6.0),
            Vector3::new(0.0, 0.0, 0.0),
        )
        .expect("rig camera A"),
        CameraModel::look_at(
            "cam_b",
            k,
            Vector3::new(16.0, 12.0, 6.0),
            Vector3::new(0.0, 0.0, 0.0),
        )
        .expect("rig camera B"),
    ]
}

impl SceneConfig {
    pub fn new(identity_count: usize, seed: u64) -> Self {
        Self {
            identity_count,
            cameras: default_two_camera_rig(),
            frame_rate: 15.0,
            duration: 120,
            // tanh(speed) gates sample confidence; walkers below ~1.1 m/s
            // could never pass the 0.8 threshold.
            walk_speed_range: (1.2, 1.7),
            appearance_dim: 32,
            pose_appearance_strength: 0.6,
            occlusion_probability: 0.0,
            noise_sigma: 0.08,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let err = |msg: &str| Err(SynthError::ConfigInvalid(msg.to_string()));
        if self.identity_count == 0 {
            return err("identity_count must be positive");
        }
        if self.cameras.is_empty() {
            return err("at least one camera is required");
        }
        if self.frame_rate <= 0.0 {
            return err("frame_rate must be positive");
        }
        if self.duration < 2 {
            return err("duration must be at least 2 frames");
        }
        let (lo, hi) = self.walk_speed_range;
        if !(0.0 < lo && lo <= hi) {
            return err("walk_speed_range must satisfy 0 < lo <= hi");
        }
        if self.appearance_dim < 4 {
            return err("appearance_dim must be at least 4");
        }
        if !(0.0..=1.0).contains(&self.pose_appearance_strength) {
            return err("pose_appearance_strength must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.occlusion_probability) {
            return err("occlusion_probability must lie in [0, 1]");
        }
        if self.noise_sigma < 0.0 {
            return err("noise_sigma must be non-negative");
        }
        Ok(())
    }
}

/// Exact per-sample truth recorded by the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSample {
    pub camera_id: String,
    pub object_id: String,
    pub frame: i64,
    /// Signed angle between camera vector and walk tangent, degrees [0, 360).
    pub true_angle: f64,
    /// Fraction of the box covered by closer agents.
    pub occlusion_fraction: f64,
    pub occluded: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub samples: Vec<GroundTruthSample>,
}

impl GroundTruth {
    pub fn lookup(&self, camera_id: &str, object_id: &str, frame: i64) -> Option<&GroundTruthSample> {
        self.samples
            .iter()
            .find(|s| s.camera_id == camera_id && s.object_id == object_id && s.frame == frame)
    }
}

/// A generated scene: dataset plus its ground truth.
#[derive(Debug, Clone)]
pub struct Scene {
    pub dataset: Dataset,
    pub ground_truth: GroundTruth,
}

struct Agent {
    object_id: String,
    /// Ground positions per frame; None outside the agent's lifetime.
    positions: Vec<Option<[f64; 2]>>,
    /// Cameras that may observe this agent (all for identities, one for blockers).
    camera_filter: Option<String>,
    identity_vector: Vec<f64>,
    /// Per-pose-bin identity components: appearance cues only visible from
    /// that side of the person.
    pose_local_vectors: [Vec<f64>; 4],
    height: f64,
}

/// Fraction of the identity signature that is local to a pose bin, as a
/// multiple of the pose strength. Cross-pose comparisons lose this share of
/// the signature, so they separate classes less cleanly than same-pose ones.
const POSE_LOCAL_SHARE: f64 = 0.9;

fn appearance_mix(strength: f64) -> (f64, f64) {
    let beta = POSE_LOCAL_SHARE * strength;
    let alpha = (1.0 - beta * beta).max(0.0).sqrt();
    (alpha, beta)
}

fn walk_path(
    rng: &mut ChaCha8Rng,
    speed: f64,
    frame_rate: f64,
    duration: usize,
) -> Vec<[f64; 2]> {
    let rand_point = |rng: &mut ChaCha8Rng| {
        [
            rng.random_range(-REGION..REGION),
            rng.random_range(-REGION..REGION),
        ]
    };
    let needed = speed * duration as f64 / frame_rate + 2.0;
    let mut waypoints = vec![rand_point(rng)];
    let mut length = 0.0;
    while length < needed {
        let last = *waypoints.last().unwrap();
        let next = rand_point(rng);
        let seg = ((next[0] - last[0]).powi(2) + (next[1] - last[1]).powi(2)).sqrt();
        if seg < 3.0 {
            continue;
        }
        waypoints.push(next);
        length += seg;
    }
    // Arc-length walk along the polyline at constant speed.
    let mut cumulative = vec![0.0f64];
    for w in waypoints.windows(2) {
        let seg = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
        cumulative.push(cumulative.last().unwrap() + seg);
    }
    let at = |dist: f64| -> [f64; 2] {
        let d = dist.min(*cumulative.last().unwrap() - 1e-9);
        let seg = cumulative.partition_point(|c| *c <= d).max(1) - 1;
        let t = (d - cumulative[seg]) / (cumulative[seg + 1] - cumulative[seg]);
        [
            waypoints[seg][0] + t * (waypoints[seg + 1][0] - waypoints[seg][0]),
            waypoints[seg][1] + t * (waypoints[seg + 1][1] - waypoints[seg][1]),
        ]
    };
    let raw: Vec<[f64; 2]> = (0..duration)
        .map(|t| at(speed * t as f64 / frame_rate))
        .collect();
    // Moving-average pass rounds the waypoint corners.
    let half = 2usize;
    (0..duration)
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half).min(duration - 1);
            let n = (hi - lo + 1) as f64;
            let sum = raw[lo..=hi]
                .iter()
                .fold([0.0, 0.0], |acc, p| [acc[0] + p[0], acc[1] + p[1]]);
            [sum[0] / n, sum[1] / n]
        })
        .collect()
}

fn unit_gaussian_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
    for x in v.iter_mut() {
        *x /= norm;
    }
    v
}

/// Signed pose angle for a ground position and walk direction, as seen from
/// `camera`; degrees in [0, 360).
pub fn true_pose_angle(camera: &CameraModel, position: [f64; 2], tangent: [f64; 2]) -> f64 {
    let cam = camera.ground_position();
    let c = [cam[0] - position[0], cam[1] - position[1]];
    let dot = c[0] * tangent[0] + c[1] * tangent[1];
    let cross = c[0] * tangent[1] - c[1] * tangent[0];
    normalize_degrees(cross.atan2(dot).to_degrees())
}

fn image_bounds(camera: &CameraModel) -> (f64, f64) {
    let k = camera.intrinsics();
    (2.0 * k[(0, 2)], 2.0 * k[(1, 2)])
}

fn project_box(camera: &CameraModel, pos: [f64; 2], height: f64) -> Option<BoundingBox> {
    let feet = camera.project(WorldPoint::on_ground(pos[0], pos[1])).ok()?;
    let head = camera
        .project(WorldPoint::new(pos[0], pos[1], height))
        .ok()?;
    let (width, img_h) = image_bounds(camera);
    if feet.u < 0.0 || feet.u >= width || feet.v < 0.0 || feet.v >= img_h {
        return None;
    }
    let h = feet.v - head.v;
    if h <= 1.0 {
        return None;
    }
    let w = h * 0.375;
    let cu = (feet.u + head.u) / 2.0;
    Some(BoundingBox::new(cu - w / 2.0, head.v, w, h))
}

/// Longest run of consecutive frames where `visible` holds.
fn longest_visible_run(visible: &[bool]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for (i, v) in visible.iter().enumerate() {
        match (start, v) {
            (None, true) => start = Some(i),
            (Some(s), false) => {
                if best.is_none_or(|(bs, be)| be - bs < i - s) {
                    best = Some((s, i));
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        if best.is_none_or(|(bs, be)| be - bs < visible.len() - s) {
            best = Some((s, visible.len()));
        }
    }
    best
}

/// Generates tracks, features, calibrations, and ground truth for `config`.
pub fn generate_scene(config: &SceneConfig) -> Result<Scene, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let duration = config.duration;
    let dim = config.appearance_dim;

    // Main identities with full-length paths.
    let mut agents: Vec<Agent> = Vec::new();
    for k in 0..config.identity_count {
        let speed = rng.random_range(config.walk_speed_range.0..=config.walk_speed_range.1);
        let path = walk_path(&mut rng, speed, config.frame_rate, duration);
        agents.push(Agent {
            object_id: format!("p{k:04}"),
            positions: path.into_iter().map(Some).collect(),
            camera_filter: None,
            identity_vector: unit_gaussian_vector(&mut rng, dim),
            pose_local_vectors: std::array::from_fn(|_| unit_gaussian_vector(&mut rng, dim)),
            height: PERSON_HEIGHT,
        });
    }

    // Occlusion injection: per-camera blockers that cross between the camera
    // and a chosen person around a chosen frame.
    for camera in &config.cameras {
        let mut spawned = 0usize;
        let cam_pos = camera.ground_position();
        let mut blockers = Vec::new();
        for agent in agents.iter().take(config.identity_count) {
            for t in 0..duration {
                if spawned >= MAX_BLOCKERS_PER_CAMERA {
                    break;
                }
                if config.occlusion_probability == 0.0
                    || rng.random_range(0.0..1.0) >= config.occlusion_probability
                {
                    continue;
                }
                let Some(target) = agent.positions[t] else { continue };
                let to_target = [target[0] - cam_pos[0], target[1] - cam_pos[1]];
                let dist = (to_target[0].powi(2) + to_target[1].powi(2)).sqrt();
                if dist < 2.0 {
                    continue;
                }
                let center = [
                    cam_pos[0] + BLOCKER_DEPTH_FRACTION * to_target[0],
                    cam_pos[1] + BLOCKER_DEPTH_FRACTION * to_target[1],
                ];
                let perp = [-to_target[1] / dist, to_target[0] / dist];
                let cross_speed = rng.random_range(1.0..1.5);
                let mut positions = vec![None; duration];
                let t0 = (t as i64 - BLOCKER_HALF_LIFE).max(0) as usize;
                let t1 = ((t as i64 + BLOCKER_HALF_LIFE) as usize).min(duration - 1);
                for (ti, slot) in positions.iter_mut().enumerate().take(t1 + 1).skip(t0) {
                    let dt = (ti as f64 - t as f64) / config.frame_rate;
                    *slot = Some([
                        center[0] + dt * cross_speed * perp[0],
                        center[1] + dt * cross_speed * perp[1],
                    ]);
                }
                blockers.push(Agent {
                    object_id: format!("x_{}_{spawned:03}", camera.camera_id()),
                    positions,
                    camera_filter: Some(camera.camera_id().to_string()),
                    identity_vector: unit_gaussian_vector(&mut rng, dim),
                    pose_local_vectors: std::array::from_fn(|_| unit_gaussian_vector(&mut rng, dim)),
                    height: BLOCKER_HEIGHT,
                });
                spawned += 1;
            }
        }
        agents.extend(blockers);
    }

    // Project every agent into every allowed camera and keep the longest
    // contiguous visible run as its track.
    struct Observation {
        agent_idx: usize,
        frames: Vec<i64>,
        positions: Vec<[f64; 2]>,
        bboxes: Vec<BoundingBox>,
    }
    let mut observations: Vec<(String, Observation)> = Vec::new();
    for camera in &config.cameras {
        for (agent_idx, agent) in agents.iter().enumerate() {
            if let Some(only) = &agent.camera_filter {
                if only != camera.camera_id() {
                    continue;
                }
            }
            let boxes: Vec<Option<BoundingBox>> = agent
                .positions
                .iter()
                .map(|p| p.and_then(|pos| project_box(camera, pos, agent.height)))
                .collect();
            let visible: Vec<bool> = boxes.iter().map(Option::is_some).collect();
            let Some((start, end)) = longest_visible_run(&visible) else { continue };
            if end - start < 4 {
                continue;
            }
            let frames: Vec<i64> = (start..end).map(|t| t as i64).collect();
            let positions: Vec<[f64; 2]> = (start..end)
                .map(|t| agent.positions[t].unwrap())
                .collect();
            let bboxes: Vec<BoundingBox> = (start..end).map(|t| boxes[t].unwrap()).collect();
            observations.push((
                camera.camera_id().to_string(),
                Observation {
                    agent_idx,
                    frames,
                    positions,
                    bboxes,
                },
            ));
        }
    }

    // Assemble tracks.
    let mut tracks: Vec<Track> = Vec::new();
    for (camera_id, obs) in &observations {
        let agent = &agents[obs.agent_idx];
        let samples: Vec<TrackSample> = obs
            .frames
            .iter()
            .zip(&obs.positions)
            .zip(&obs.bboxes)
            .map(|((frame, pos), bbox)| {
                TrackSample::new(agent.object_id.clone(), camera_id.clone(), *frame, *pos, *bbox)
            })
            .collect();
        tracks.push(Track::new(samples).expect("frames increase by construction"));
    }
    tracks.sort_by_key(|t| (t.camera_id.clone(), t.object_id.clone()));

    // Per-camera, per-frame sample index for occlusion computation.
    let mut frame_samples: BTreeMap<(String, i64), Vec<TrackSample>> = BTreeMap::new();
    for track in &tracks {
        for s in &track.samples {
            frame_samples
                .entry((s.camera_id.clone(), s.frame))
                .or_default()
                .push(s.clone());
        }
    }

    // Ground truth and features. Tangents use the same forward differences
    // the velocity stage computes, so truth is exact for the pipeline.
    let agent_by_id: BTreeMap<&str, &Agent> = agents
        .iter()
        .map(|a| (a.object_id.as_str(), a))
        .collect();
    let pose_axis = |label: PoseLabel| -> usize { label.index() };
    let mut features: FeatureStore = BTreeMap::new();
    let mut ground_truth = GroundTruth::default();
    let noise = Normal::new(0.0, 1.0).unwrap();

    // First pass: unpolluted features and truth records.
    struct PerSample {
        occlusion: f64,
        occluder: Option<String>,
    }
    let mut pollution: BTreeMap<(String, String, i64), PerSample> = BTreeMap::new();
    for track in &tracks {
        let camera = config
            .cameras
            .iter()
            .find(|c| c.camera_id() == track.camera_id)
            .expect("track camera exists");
        let agent = agent_by_id[track.object_id.as_str()];
        let n = track.len();
        for (i, sample) in track.samples.iter().enumerate() {
            let (p_cur, p_next) = if i + 1 < n {
                (track.samples[i].world_pos, track.samples[i + 1].world_pos)
            } else {
                (track.samples[i - 1].world_pos, track.samples[i].world_pos)
            };
            let tangent = [p_next[0] - p_cur[0], p_next[1] - p_cur[1]];
            let true_angle = if tangent[0] == 0.0 && tangent[1] == 0.0 {
                0.0
            } else {
                true_pose_angle(camera, sample.world_pos, tangent)
            };
            let same_frame = &frame_samples[&(track.camera_id.clone(), sample.frame)];
            let (occ, occluder) = occlusion_rate_with_occluder(sample, same_frame, camera);
            ground_truth.samples.push(GroundTruthSample {
                camera_id: track.camera_id.clone(),
                object_id: track.object_id.clone(),
                frame: sample.frame,
                true_angle,
                occlusion_fraction: occ,
                occluded: occ > 0.0,
            });
            let bin = assign_pose_group(true_angle);
            let (alpha, beta) = appearance_mix(config.pose_appearance_strength);
            let local = &agent.pose_local_vectors[bin.index()];
            let mut values: Vec<f64> = agent
                .identity_vector
                .iter()
                .zip(local)
                .map(|(u, b)| alpha * u + beta * b)
                .collect();
            values[pose_axis(bin)] += config.pose_appearance_strength;
            if config.noise_sigma > 0.0 {
                for v in values.iter_mut() {
                    *v += config.noise_sigma * noise.sample(&mut rng);
                }
            }
            features.insert(
                (track.camera_id.clone(), track.object_id.clone(), sample.frame),
                FeatureVector::new(values, "synthetic-v1"),
            );
            pollution.insert(
                (track.camera_id.clone(), track.object_id.clone(), sample.frame),
                PerSample {
                    occlusion: occ,
                    occluder,
                },
            );
        }
    }

    // Second pass: occluded samples mix in the occluder's appearance.
    let clean = features.clone();
    for (key, info) in &pollution {
        if info.occlusion <= 0.0 {
            continue;
        }
        let Some(occluder_id) = &info.occluder else { continue };
        let occluder_key = (key.0.clone(), occluder_id.clone(), key.2);
        let Some(occluder_feature) = clean.get(&occluder_key) else { continue };
        let own = features.get_mut(key).expect("feature exists");
        let rho = info.occlusion;
        for (v, o) in own.values.iter_mut().zip(&occluder_feature.values) {
            *v = (1.0 - rho) * *v + rho * o;
        }
    }

    let dataset = Dataset {
        cameras: config.cameras.clone(),
        tracks,
        features,
    };
    Ok(Scene {
        dataset,
        ground_truth,
    })
}
