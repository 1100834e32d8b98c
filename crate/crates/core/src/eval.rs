//! Evaluation harness.
//!
//! Identities are split at random into train and test halves; a metric is
//! learned on the training half, every test query model is matched against
//! every test gallery model, and the ranking quality is summarized as a
//! cumulative match curve. The whole procedure repeats over several seeds and
//! the curves are averaged.

use crate::confidence::ConfidenceError;
use crate::matching::{
    match_cost_transformed, pairwise_distances_transformed, DistanceTable, MatchError,
    MatchWeights, Strategy, TransformedModel,
};
use crate::metric::{learn_metric, LearnedMetric, LearnerId, MetricError, MetricTransform, PairLabel};
use crate::model::{ModelError, MultiPoseModel, PoseLabel};
use crate::pipeline::{Dataset, PipelineError, PipelineParams, ProcessedModels};
use crate::pose::PoseError;
use crate::weights::{
    build_distance_distributions, sample_training_vectors, train_weights, PosedPair, SvmConfig,
    WeightError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least 2 identities, got {0}")]
    TooFewIdentities(usize),
    #[error("query {0} has no gallery truth entry")]
    TruthMissing(String),
    #[error("cost matrix contains a non-finite value")]
    NonFiniteCost,
    #[error("camera {0} not present in the dataset")]
    CameraNotFound(String),
    #[error("no identity has a model in both {0} and {1}")]
    NoSharedIdentities(String, String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Pose(#[from] PoseError),
    #[error(transparent)]
    Confidence(#[from] ConfidenceError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Weight(#[from] WeightError),
}

/// Cumulative match curve: `accuracy[n-1]` is the fraction of queries whose
/// true match appears within the first `n` ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmcCurve {
    pub accuracy: Vec<f64>,
    /// Mean of the curve over all ranks.
    pub auc: f64,
}

impl CmcCurve {
    fn from_accuracy(accuracy: Vec<f64>) -> Self {
        let auc = accuracy.iter().sum::<f64>() / accuracy.len() as f64;
        Self { accuracy, auc }
    }

    pub fn rank(&self, n: usize) -> f64 {
        self.accuracy[n - 1]
    }

    /// Element-wise mean of several curves of equal length.
    pub fn mean_of(curves: &[CmcCurve]) -> CmcCurve {
        let g = curves[0].accuracy.len();
        let mut acc = vec![0.0; g];
        for c in curves {
            for (a, v) in acc.iter_mut().zip(&c.accuracy) {
                *a += v;
            }
        }
        for a in acc.iter_mut() {
            *a /= curves.len() as f64;
        }
        CmcCurve::from_accuracy(acc)
    }
}

/// Deterministically splits identities into train and test sets.
///
/// The train set receives `ceil(n * split_fraction)` identities (half of them
/// by default) and the two sets are disjoint and cover the input.
pub fn split_identities(
    ids: &[String],
    seed: u64,
    split_fraction: f64,
) -> Result<(Vec<String>, Vec<String>), EvalError> {
    if ids.len() < 2 {
        return Err(EvalError::TooFewIdentities(ids.len()));
    }
    assert!((0.0..=1.0).contains(&split_fraction));
    let mut shuffled: Vec<String> = ids.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fisher-Yates so the split depends only on the seed, not on HashMap order.
    for i in (1..shuffled.len()).rev() {
        let j = rng.random_range(0..=i);
        shuffled.swap(i, j);
    }
    let train_count = (ids.len() as f64 * split_fraction).ceil() as usize;
    let (train, test) = shuffled.split_at(train_count.clamp(1, ids.len() - 1));
    Ok((train.to_vec(), test.to_vec()))
}

/// Computes the CMC of one cost matrix.
///
/// `truth[q]` is the gallery index of query `q`'s true match. A query's rank
/// is one plus the number of gallery entries that beat the true match; ties
/// are broken by gallery order, which must be a stable identifier order.
pub fn compute_cmc(costs: &[Vec<f64>], truth: &[usize]) -> Result<CmcCurve, EvalError> {
    assert!(!costs.is_empty(), "cost matrix must have at least one query");
    let g = costs[0].len();
    if truth.len() != costs.len() {
        return Err(EvalError::TruthMissing(format!(
            "{} truth entries for {} queries",
            truth.len(),
            costs.len()
        )));
    }
    let mut hits_at_rank = vec![0usize; g];
    for (q, row) in costs.iter().enumerate() {
        assert_eq!(row.len(), g, "ragged cost matrix");
        if row.iter().any(|c| !c.is_finite()) {
            return Err(EvalError::NonFiniteCost);
        }
        let ti = truth[q];
        if ti >= g {
            return Err(EvalError::TruthMissing(format!("query {q}")));
        }
        let true_cost = row[ti];
        let mut rank = 1usize;
        for (j, c) in row.iter().enumerate() {
            if j == ti {
                continue;
            }
            if *c < true_cost || (*c == true_cost && j < ti) {
                rank += 1;
            }
        }
        hits_at_rank[rank - 1] += 1;
    }
    let n_q = costs.len() as f64;
    let mut cumulative = 0usize;
    let accuracy: Vec<f64> = hits_at_rank
        .iter()
        .map(|h| {
            cumulative += h;
            cumulative as f64 / n_q
        })
        .collect();
    Ok(CmcCurve::from_accuracy(accuracy))
}

/// Where the matching weights for PaMM come from.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightsMode {
    /// Use these weights as-is.
    Provided(MatchWeights),
    /// Train once on the first trial's training half and reuse everywhere.
    TrainOnce,
    /// Retrain inside every trial on that trial's training half.
    PerTrial,
}

/// Full configuration for [`run_evaluation`].
#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub trial_seeds: Vec<u64>,
    pub split_fraction: f64,
    pub strategies: Vec<Strategy>,
    pub learner: LearnerId,
    pub pca_dim: Option<usize>,
    pub regularization: f64,
    pub pipeline: PipelineParams,
    pub query_camera: String,
    pub gallery_camera: String,
    pub weights: WeightsMode,
    pub weight_lambda: f64,
    pub weight_pos: usize,
    pub weight_neg: usize,
    pub weight_seed: u64,
    /// Positive metric-training pairs sampled per identity.
    pub pairs_per_identity: usize,
    /// Negative pairs per positive pair.
    pub negative_ratio: usize,
    /// Random single-appearance selections averaged for SingleMatch.
    pub single_match_repeats: usize,
}

impl EvalConfig {
    pub fn new(query_camera: impl Into<String>, gallery_camera: impl Into<String>) -> Self {
        Self {
            trial_seeds: (0..10).collect(),
            split_fraction: 0.5,
            strategies: Strategy::ALL.to_vec(),
            learner: LearnerId::Kissme,
            pca_dim: Some(64),
            regularization: 1e-3,
            pipeline: PipelineParams::default(),
            query_camera: query_camera.into(),
            gallery_camera: gallery_camera.into(),
            weights: WeightsMode::TrainOnce,
            weight_lambda: 1.0,
            weight_pos: 1000,
            weight_neg: 10_000,
            weight_seed: 7,
            pairs_per_identity: 16,
            negative_ratio: 10,
            single_match_repeats: 10,
        }
    }
}

/// Mean curve of one strategy over all trials.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyResult {
    pub strategy: String,
    pub ranks: Vec<usize>,
    pub mean_accuracy: Vec<f64>,
    pub std: Vec<f64>,
    pub auc: f64,
    pub trials: usize,
    pub seeds: Vec<u64>,
    /// AUC is taken over ranks 1..=auc_rank_range (the full gallery).
    pub auc_rank_range: usize,
}

/// All per-strategy results of one evaluation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub results: Vec<StrategyResult>,
}

impl EvaluationReport {
    pub fn result(&self, strategy: Strategy) -> Option<&StrategyResult> {
        self.results.iter().find(|r| r.strategy == strategy.name())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.results).expect("report serializes")
    }

    /// `strategy,rank,accuracy` rows for external plotting.
    pub fn to_cmc_csv(&self) -> String {
        let mut out = String::from("strategy,rank,accuracy\n");
        for r in &self.results {
            for (rank, acc) in r.ranks.iter().zip(&r.mean_accuracy) {
                out.push_str(&format!("{},{},{}\n", r.strategy, rank, acc));
            }
        }
        out
    }
}

/// Deterministic seed derivation for nested RNG streams.
pub fn derive_seed(parts: &[u64]) -> u64 {
    // SplitMix64-style mixing; stable across platforms.
    let mut h = 0x9e3779b97f4a7c15u64;
    for &p in parts {
        let mut z = p.wrapping_add(0x9e3779b97f4a7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        h ^= z ^ (z >> 31);
        h = h.rotate_left(17).wrapping_mul(0x2545f4914f6cdd1d);
    }
    h
}

type ModelKey = (String, String); // (camera_id, object_id)

/// Labeled cross-camera feature pairs for metric learning: per identity,
/// `pairs_per_identity` positive pairs plus `negative_ratio` times as many
/// negatives against random other identities. Deterministic under `seed`.
pub fn metric_training_pairs(
    models: &BTreeMap<ModelKey, MultiPoseModel>,
    train_ids: &[String],
    query_camera: &str,
    gallery_camera: &str,
    pairs_per_identity: usize,
    negative_ratio: usize,
    seed: u64,
) -> Vec<PairLabel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    let features_of = |cam: &str, id: &str| -> Vec<&crate::model::FeatureVector> {
        models
            .get(&(cam.to_string(), id.to_string()))
            .map(|m| m.all_features().collect())
            .unwrap_or_default()
    };
    let mut positives = 0usize;
    for id in train_ids {
        let qs = features_of(query_camera, id);
        let gs = features_of(gallery_camera, id);
        if qs.is_empty() || gs.is_empty() {
            continue;
        }
        for _ in 0..pairs_per_identity {
            let a = qs[rng.random_range(0..qs.len())];
            let b = gs[rng.random_range(0..gs.len())];
            pairs.push(PairLabel {
                feature_a: a.clone(),
                feature_b: b.clone(),
                same_identity: true,
            });
            positives += 1;
        }
    }
    let with_models: Vec<&String> = train_ids
        .iter()
        .filter(|id| {
            !features_of(query_camera, id).is_empty() && !features_of(gallery_camera, id).is_empty()
        })
        .collect();
    if with_models.len() >= 2 {
        for _ in 0..positives * negative_ratio {
            let i = rng.random_range(0..with_models.len());
            let mut j = rng.random_range(0..with_models.len() - 1);
            if j >= i {
                j += 1;
            }
            let qs = features_of(query_camera, with_models[i]);
            let gs = features_of(gallery_camera, with_models[j]);
            pairs.push(PairLabel {
                feature_a: qs[rng.random_range(0..qs.len())].clone(),
                feature_b: gs[rng.random_range(0..gs.len())].clone(),
                same_identity: false,
            });
        }
    }
    pairs
}

/// Cross-camera sample pairs with pose labels, for weight training.
///
/// Coverage-first sampling: for every identity and every (p, q) pose pair
/// populated on both sides, up to `per_pair_cap` positive pairs are drawn,
/// each with negatives of the same pose pair against other identities. Every
/// pose pair that exists anywhere in the training identities is therefore
/// represented.
pub fn posed_pairs(
    models: &BTreeMap<ModelKey, MultiPoseModel>,
    train_ids: &[String],
    query_camera: &str,
    gallery_camera: &str,
    per_pair_cap: usize,
    seed: u64,
) -> Vec<PosedPair> {
    const NEGATIVES_PER_POSITIVE: usize = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let model_of = |cam: &str, id: &str| models.get(&(cam.to_string(), id.to_string()));
    let usable: Vec<&String> = train_ids
        .iter()
        .filter(|id| {
            model_of(query_camera, id).is_some_and(|m| m.sample_count() > 0)
                && model_of(gallery_camera, id).is_some_and(|m| m.sample_count() > 0)
        })
        .collect();
    // Per gallery pose label, the identities that can serve as negatives.
    let mut gallery_by_label: [Vec<usize>; 4] = Default::default();
    for (idx, id) in usable.iter().enumerate() {
        let g = model_of(gallery_camera, id).unwrap();
        for label in PoseLabel::ALL {
            if !g.group(label).is_empty() {
                gallery_by_label[label.index()].push(idx);
            }
        }
    }
    for (idx, id) in usable.iter().enumerate() {
        let q = model_of(query_camera, id).unwrap();
        let g = model_of(gallery_camera, id).unwrap();
        for pose_q in PoseLabel::ALL {
            let qp = q.group(pose_q);
            if qp.is_empty() {
                continue;
            }
            for pose_g in PoseLabel::ALL {
                let gp = g.group(pose_g);
                if gp.is_empty() {
                    continue;
                }
                for _ in 0..per_pair_cap {
                    let fa = &qp.members[rng.random_range(0..qp.len())].feature;
                    let fb = &gp.members[rng.random_range(0..gp.len())].feature;
                    out.push(PosedPair {
                        feature_a: fa.clone(),
                        feature_b: fb.clone(),
                        pose_a: pose_q,
                        pose_b: pose_g,
                        same_identity: true,
                    });
                    let candidates = &gallery_by_label[pose_g.index()];
                    let mut added = 0;
                    let mut attempts = 0;
                    while added < NEGATIVES_PER_POSITIVE && attempts < 8 * NEGATIVES_PER_POSITIVE {
                        attempts += 1;
                        let j = candidates[rng.random_range(0..candidates.len())];
                        if j == idx {
                            continue;
                        }
                        let other = model_of(gallery_camera, usable[j]).unwrap().group(pose_g);
                        let fo = &other.members[rng.random_range(0..other.len())].feature;
                        out.push(PosedPair {
                            feature_a: fa.clone(),
                            feature_b: fo.clone(),
                            pose_a: pose_q,
                            pose_b: pose_g,
                            same_identity: false,
                        });
                        added += 1;
                    }
                }
            }
        }
    }
    out
}

fn train_weights_for_split(
    models: &BTreeMap<ModelKey, MultiPoseModel>,
    train_ids: &[String],
    metric: &LearnedMetric,
    config: &EvalConfig,
    trial_seed: u64,
) -> Result<MatchWeights, EvalError> {
    let pairs = posed_pairs(
        models,
        train_ids,
        &config.query_camera,
        &config.gallery_camera,
        (config.pairs_per_identity / 4).max(4),
        derive_seed(&[trial_seed, 0xD15]),
    );
    let dists = build_distance_distributions(&pairs, metric)?;
    let samples = sample_training_vectors(
        &dists,
        config.weight_pos,
        config.weight_neg,
        config.weight_seed,
    )?;
    let trained = train_weights(&samples, &SvmConfig::with_lambda(config.weight_lambda))?;
    Ok(trained.weights)
}

struct TrialOutput {
    curves: BTreeMap<Strategy, CmcCurve>,
}

fn run_trial(
    models: &BTreeMap<ModelKey, MultiPoseModel>,
    identities: &[String],
    config: &EvalConfig,
    trial_seed: u64,
    fixed_weights: Option<&MatchWeights>,
) -> Result<TrialOutput, EvalError> {
    let (train, mut test) = split_identities(identities, trial_seed, config.split_fraction)?;
    test.sort();
    let pairs = metric_training_pairs(
        models,
        &train,
        &config.query_camera,
        &config.gallery_camera,
        config.pairs_per_identity,
        config.negative_ratio,
        derive_seed(&[trial_seed, 0xA11]),
    );
    let metric = learn_metric(&pairs, config.learner, config.pca_dim, config.regularization)?;
    let weights = if config.strategies.contains(&Strategy::Pamm) {
        match fixed_weights {
            Some(w) => Some(w.clone()),
            None => Some(train_weights_for_split(
                models,
                &train,
                &metric,
                config,
                trial_seed,
            )?),
        }
    } else {
        None
    };

    let transform = MetricTransform::new(&metric);
    let key = |cam: &str, id: &str| (cam.to_string(), id.to_string());
    let mut queries = Vec::new();
    let mut gallery = Vec::new();
    for id in &test {
        let q = models.get(&key(&config.query_camera, id));
        let g = models.get(&key(&config.gallery_camera, id));
        if let (Some(q), Some(g)) = (q, g) {
            queries.push((id.clone(), TransformedModel::new(q, &transform)?));
            gallery.push((id.clone(), TransformedModel::new(g, &transform)?));
        }
    }
    if queries.len() < 2 {
        return Err(EvalError::TooFewIdentities(queries.len()));
    }

    let truth: Vec<usize> = (0..queries.len()).collect(); // same sorted id order
    let n_g = gallery.len();
    let repeats = config.single_match_repeats.max(1);

    struct RowCosts {
        per_strategy: BTreeMap<Strategy, Vec<f64>>,
        single_repeats: Vec<Vec<f64>>,
    }

    let rows: Result<Vec<RowCosts>, EvalError> = queries
        .par_iter()
        .enumerate()
        .map(|(qi, (_, q))| {
            let mut per_strategy: BTreeMap<Strategy, Vec<f64>> = BTreeMap::new();
            for s in &config.strategies {
                if *s != Strategy::SingleMatch {
                    per_strategy.insert(*s, Vec::with_capacity(n_g));
                }
            }
            let want_single = config.strategies.contains(&Strategy::SingleMatch);
            let mut single_repeats = vec![Vec::with_capacity(n_g); if want_single { repeats } else { 0 }];
            let mut scratch_rng = ChaCha8Rng::seed_from_u64(derive_seed(&[trial_seed, qi as u64]));
            let needs_table = config.strategies.iter().any(|s| {
                matches!(
                    s,
                    Strategy::FullMatchMin | Strategy::FullMatchAvg | Strategy::Pamm
                )
            });
            let empty = DistanceTable::default();
            for (gi, (_, g)) in gallery.iter().enumerate() {
                let table = if needs_table {
                    pairwise_distances_transformed(q, g)
                } else {
                    DistanceTable::default()
                };
                for s in &config.strategies {
                    match s {
                        Strategy::SingleMatch => {}
                        strategy => {
                            let cost = match_cost_transformed(
                                q,
                                g,
                                &table,
                                *strategy,
                                weights.as_ref(),
                                &mut scratch_rng,
                            )?;
                            per_strategy.get_mut(strategy).unwrap().push(cost);
                        }
                    }
                }
                if want_single {
                    for (rep, row) in single_repeats.iter_mut().enumerate() {
                        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[
                            trial_seed, 0x51, qi as u64, gi as u64, rep as u64,
                        ]));
                        let cost = match_cost_transformed(
                            q,
                            g,
                            &empty,
                            Strategy::SingleMatch,
                            None,
                            &mut rng,
                        )?;
                        row.push(cost);
                    }
                }
            }
            Ok(RowCosts {
                per_strategy,
                single_repeats,
            })
        })
        .collect();
    let rows = rows?;

    let mut curves = BTreeMap::new();
    for s in &config.strategies {
        if *s == Strategy::SingleMatch {
            let mut repeat_curves = Vec::with_capacity(repeats);
            for rep in 0..repeats {
                let costs: Vec<Vec<f64>> = rows
                    .iter()
                    .map(|r| r.single_repeats[rep].clone())
                    .collect();
                repeat_curves.push(compute_cmc(&costs, &truth)?);
            }
            curves.insert(*s, CmcCurve::mean_of(&repeat_curves));
        } else {
            let costs: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| r.per_strategy.get(s).unwrap().clone())
                .collect();
            curves.insert(*s, compute_cmc(&costs, &truth)?);
        }
    }
    Ok(TrialOutput { curves })
}

/// Runs the full protocol and returns per-strategy mean curves.
pub fn run_evaluation(dataset: &Dataset, config: &EvalConfig) -> Result<EvaluationReport, EvalError> {
    for cam in [&config.query_camera, &config.gallery_camera] {
        if dataset.camera(cam).is_none() {
            return Err(EvalError::CameraNotFound(cam.clone()));
        }
    }
    let processed = ProcessedModels::build(dataset, &config.pipeline)?;
    run_evaluation_on_models(&processed.models, config)
}

/// As [`run_evaluation`] but starting from already-built multi-pose models.
pub fn run_evaluation_on_models(
    models: &BTreeMap<ModelKey, MultiPoseModel>,
    config: &EvalConfig,
) -> Result<EvaluationReport, EvalError> {
    let mut identities: Vec<String> = models
        .keys()
        .filter(|(cam, _)| cam == &config.query_camera)
        .filter(|(_, id)| models.contains_key(&(config.gallery_camera.clone(), id.clone())))
        .map(|(_, id)| id.clone())
        .collect();
    identities.sort();
    identities.dedup();
    if identities.len() < 2 {
        return Err(EvalError::NoSharedIdentities(
            config.query_camera.clone(),
            config.gallery_camera.clone(),
        ));
    }

    let fixed_weights: Option<MatchWeights> = if config.strategies.contains(&Strategy::Pamm) {
        match &config.weights {
            WeightsMode::Provided(w) => Some(w.clone()),
            WeightsMode::TrainOnce => {
                let seed = config.trial_seeds.first().copied().unwrap_or(0);
                let (train, _) = split_identities(&identities, seed, config.split_fraction)?;
                let pairs = metric_training_pairs(
                    models,
                    &train,
                    &config.query_camera,
                    &config.gallery_camera,
                    config.pairs_per_identity,
                    config.negative_ratio,
                    derive_seed(&[seed, 0xA11]),
                );
                let metric =
                    learn_metric(&pairs, config.learner, config.pca_dim, config.regularization)?;
                Some(train_weights_for_split(models, &train, &metric, config, seed)?)
            }
            WeightsMode::PerTrial => None,
        }
    } else {
        None
    };

    let mut per_trial = Vec::with_capacity(config.trial_seeds.len());
    for &seed in &config.trial_seeds {
        per_trial.push(run_trial(
            models,
            &identities,
            config,
            seed,
            fixed_weights.as_ref(),
        )?);
    }

    let mut results = Vec::new();
    for s in &config.strategies {
        let curves: Vec<&CmcCurve> = per_trial.iter().map(|t| &t.curves[s]).collect();
        let g = curves[0].accuracy.len();
        let mut mean = vec![0.0f64; g];
        for c in &curves {
            for (m, v) in mean.iter_mut().zip(&c.accuracy) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= curves.len() as f64;
        }
        let mut std = vec![0.0f64; g];
        for c in &curves {
            for ((sd, v), m) in std.iter_mut().zip(&c.accuracy).zip(&mean) {
                *sd += (v - m) * (v - m);
            }
        }
        for sd in std.iter_mut() {
            *sd = (*sd / curves.len() as f64).sqrt();
        }
        let auc = mean.iter().sum::<f64>() / g as f64;
        results.push(StrategyResult {
            strategy: s.name().to_string(),
            ranks: (1..=g).collect(),
            mean_accuracy: mean,
            std,
            auc,
            trials: config.trial_seeds.len(),
            seeds: config.trial_seeds.clone(),
            auc_rank_range: g,
        });
    }
    Ok(EvaluationReport { results })
}
