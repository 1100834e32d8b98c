//! Pose-aware multi-shot matching for person re-identification.
//!
//! The pipeline runs in stages over multi-camera pedestrian tracks:
//!
//! 1. [`camera`]: pinhole projection between the image and the ground plane;
//! 2. [`pose`]: walking-direction pose angles from trajectories, with
//!    polar-coordinate smoothing;
//! 3. [`confidence`]: per-sample reliability from angle stability, speed,
//!    and occlusion, and filtering;
//! 4. [`model`] / [`descriptor`]: appearance descriptors partitioned into
//!    four pose groups per person;
//! 5. [`metric`]: PCA plus Euclidean / Mahalanobis / KISSME metric learning;
//! 6. [`matching`]: weighted multi-pose matching and the conventional
//!    multi-shot baselines;
//! 7. [`weights`]: SVM training of the ten pose-pair weights;
//! 8. [`eval`]: identity splits, CMC curves, and repeated trials;
//! 9. [`synth`]: a fully ground-truthed synthetic scene generator used as
//!    the oracle for everything above.
//!
//! [`io`] holds the on-disk formats and [`pipeline`] wires stages together.

pub mod camera;
pub mod confidence;
pub mod descriptor;
pub mod eval;
pub mod io;
pub mod matching;
pub mod metric;
pub mod model;
pub mod pipeline;
pub mod pose;
pub mod synth;
pub mod weights;

pub use camera::{CameraModel, PixelPoint, WorldPoint};
pub use confidence::{angle_variation, filter_samples, occlusion_rate, sample_confidence};
pub use eval::{compute_cmc, run_evaluation, split_identities, CmcCurve, EvalConfig, EvaluationReport};
pub use matching::{
    baseline_cost, match_cost, pairwise_distances, pamm_cost, pamm_cost_or_mean, MatchCost,
    MatchWeights, PosePair, Strategy,
};
pub use metric::{fit_pca, learn_metric, metric_distance, LearnedMetric, LearnerId, PairLabel};
pub use model::{assign_pose_group, build_multipose_model, FeatureVector, MultiPoseModel, PoseLabel};
pub use pipeline::{Dataset, PipelineParams};
pub use pose::{
    compute_velocity, estimate_pose_angle, smooth_angles, BoundingBox, Track, TrackSample,
};
pub use synth::{generate_scene, GroundTruth, Scene, SceneConfig};
pub use weights::{
    build_distance_distributions, sample_training_vectors, train_weights, DistanceSample,
    PosedPair, SvmConfig,
};
