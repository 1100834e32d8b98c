//! Multi-pose appearance models.
//!
//! Filtered samples are partitioned into four 90-degree pose groups (front,
//! right, back, left) by their smoothed angle, and each retained sample
//! contributes one feature descriptor. Any descriptor source may be plugged
//! in; a simple built-in color/gradient histogram and a pass-through loader
//! for precomputed feature files are provided.

use crate::pose::Track;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("image patch is empty")]
    EmptyPatch,
    #[error("track {0} has no samples to model")]
    EmptyTrack(String),
    #[error("sample {camera_id}/{object_id}@{frame} is missing a smoothed angle")]
    MissingAngle {
        camera_id: String,
        object_id: String,
        frame: i64,
    },
    #[error("no feature for sample {camera_id}/{object_id}@{frame}")]
    MissingFeature {
        camera_id: String,
        object_id: String,
        frame: i64,
    },
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// The four pose groups; each covers 90 degrees of the circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoseLabel {
    Front,
    Right,
    Back,
    Left,
}

impl PoseLabel {
    pub const ALL: [PoseLabel; 4] = [
        PoseLabel::Front,
        PoseLabel::Right,
        PoseLabel::Back,
        PoseLabel::Left,
    ];

    pub fn index(self) -> usize {
        match self {
            PoseLabel::Front => 0,
            PoseLabel::Right => 1,
            PoseLabel::Back => 2,
            PoseLabel::Left => 3,
        }
    }

    pub fn short(self) -> char {
        match self {
            PoseLabel::Front => 'f',
            PoseLabel::Right => 'r',
            PoseLabel::Back => 'b',
            PoseLabel::Left => 'l',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PoseLabel::Front => "front",
            PoseLabel::Right => "right",
            PoseLabel::Back => "back",
            PoseLabel::Left => "left",
        }
    }
}

impl std::fmt::Display for PoseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Maps a smoothed angle in `[0, 360)` to its pose group.
///
/// Front owns `[0, 45) ∪ [315, 360)`, right `[45, 135)`, back `[135, 225)`,
/// left `[225, 315)`; all intervals are half-open.
// The comparisons spell out each bin boundary directly.
#[allow(clippy::manual_range_contains)]
pub fn assign_pose_group(angle: f64) -> PoseLabel {
    debug_assert!((0.0..360.0).contains(&angle), "angle {angle} out of range");
    if angle < 45.0 || angle >= 315.0 {
        PoseLabel::Front
    } else if angle < 135.0 {
        PoseLabel::Right
    } else if angle < 225.0 {
        PoseLabel::Back
    } else {
        PoseLabel::Left
    }
}

/// A d-dimensional appearance descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub descriptor_id: String,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, descriptor_id: impl Into<String>) -> Self {
        Self {
            values,
            descriptor_id: descriptor_id.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// One member of a pose group: which frame it came from and its descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMember {
    pub frame: i64,
    pub feature: FeatureVector,
}

/// All descriptors of one person in one camera whose pose fell in one bin.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseGroup {
    pub members: Vec<GroupMember>,
}

impl PoseGroup {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// A person's appearance split into the four pose groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiPoseModel {
    pub object_id: String,
    pub camera_id: String,
    /// Indexed by [`PoseLabel::index`]: front, right, back, left.
    pub groups: [PoseGroup; 4],
}

impl MultiPoseModel {
    pub fn group(&self, label: PoseLabel) -> &PoseGroup {
        &self.groups[label.index()]
    }

    /// Total number of descriptors across the four groups.
    pub fn sample_count(&self) -> usize {
        self.groups.iter().map(PoseGroup::len).sum()
    }

    /// Iterates all descriptors in group order, then temporal order.
    pub fn all_features(&self) -> impl Iterator<Item = &FeatureVector> {
        self.groups.iter().flat_map(|g| g.members.iter().map(|m| &m.feature))
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.all_features().next().map(FeatureVector::dim)
    }
}

/// Key for looking up the descriptor of one sample.
pub type FeatureKey = (String, String, i64); // (camera_id, object_id, frame)

/// Deterministic per-sample descriptor storage.
pub type FeatureStore = BTreeMap<FeatureKey, FeatureVector>;

/// Groups a confidence-filtered track's descriptors by pose bin.
///
/// Temporal order is preserved inside each group. Every sample must carry a
/// smoothed angle and have a descriptor in `features`.
pub fn build_multipose_model(
    track: &Track,
    features: &FeatureStore,
) -> Result<MultiPoseModel, ModelError> {
    if track.is_empty() {
        return Err(ModelError::EmptyTrack(track.object_id.clone()));
    }
    let mut groups: [PoseGroup; 4] = Default::default();
    let mut dim: Option<usize> = None;
    for sample in &track.samples {
        let angle = sample.smooth_angle.ok_or_else(|| ModelError::MissingAngle {
            camera_id: sample.camera_id.clone(),
            object_id: sample.object_id.clone(),
            frame: sample.frame,
        })?;
        let key = (
            sample.camera_id.clone(),
            sample.object_id.clone(),
            sample.frame,
        );
        let feature = features.get(&key).ok_or_else(|| ModelError::MissingFeature {
            camera_id: sample.camera_id.clone(),
            object_id: sample.object_id.clone(),
            frame: sample.frame,
        })?;
        if let Some(d) = dim {
            if feature.dim() != d {
                return Err(ModelError::DimensionMismatch {
                    expected: d,
                    got: feature.dim(),
                });
            }
        } else {
            dim = Some(feature.dim());
        }
        let label = assign_pose_group(angle);
        groups[label.index()].members.push(GroupMember {
            frame: sample.frame,
            feature: feature.clone(),
        });
    }
    Ok(MultiPoseModel {
        object_id: track.object_id.clone(),
        camera_id: track.camera_id.clone(),
        groups,
    })
}
