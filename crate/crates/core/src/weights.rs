//! Training the ten pose-pair matching weights.
//!
//! Labeled feature pairs with known pose bins yield, per pose pair, a
//! distribution of metric distances for same-person and different-person
//! comparisons. Training vectors are assembled by drawing one distance per
//! pose pair from those distributions, and a maximal-margin linear classifier
//! (hinge-loss SVM without bias) separates the two classes. Because same-person
//! distances are small, discriminative coordinates receive negative raw
//! weights; the solution is negated and equalized onto [0, 2].

use crate::matching::{MatchWeights, PosePair};
use crate::metric::{metric_distance, LearnedMetric, MetricError};
use crate::model::{FeatureVector, PoseLabel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("no {class} distances for pose pair {pair}")]
    MissingPosePair { pair: &'static str, class: &'static str },
    #[error("distribution for pose pair {pair} ({class}) is empty")]
    EmptyDistribution { pair: &'static str, class: &'static str },
    #[error("training set must contain both classes")]
    MissingClass,
    #[error("training samples are all identical; no margin exists")]
    Degenerate,
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// A labeled pair of features together with the pose bin of each member.
#[derive(Debug, Clone, PartialEq)]
pub struct PosedPair {
    pub feature_a: FeatureVector,
    pub feature_b: FeatureVector,
    pub pose_a: PoseLabel,
    pub pose_b: PoseLabel,
    pub same_identity: bool,
}

/// Ten per-pose-pair distance lists, split into positive (same person) and
/// negative (different people) classes. Indexed in [`PosePair::ALL`] order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DistanceDistributions {
    pub positive: [Vec<f64>; 10],
    pub negative: [Vec<f64>; 10],
}

impl DistanceDistributions {
    pub fn class(&self, positive: bool) -> &[Vec<f64>; 10] {
        if positive {
            &self.positive
        } else {
            &self.negative
        }
    }
}

/// One 10-dimensional training vector of pairwise distances with its class.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSample {
    /// Ordered as ff, fr, fb, fl, rr, rb, rl, bb, bl, ll.
    pub x: [f64; 10],
    /// +1 for same person, -1 for different people.
    pub y: i8,
}

/// Margin-tradeoff configuration for the weight classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmConfig {
    pub lambda: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            max_iterations: 20_000,
            tolerance: 1e-10,
        }
    }
}

impl SvmConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        assert!(lambda > 0.0, "lambda must be positive");
        Self {
            lambda,
            ..Self::default()
        }
    }
}

/// Trained weights plus solver metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedWeights {
    pub weights: MatchWeights,
    /// Raw hyperplane before negation/clipping/rescaling.
    pub raw: [f64; 10],
    /// Primal objective value at the solution.
    pub objective: f64,
    /// True when some margin constraints needed slack.
    pub non_separable: bool,
}

const RL: usize = 6; // index of the (r, l) pair in PosePair::ALL order
const FB: usize = 2; // index of the (f, b) pair

/// Splits metric distances of labeled, pose-annotated pairs into the ten
/// per-pose-pair positive/negative distributions.
///
/// The (r, l) pair is allowed to be absent: its distribution is copied from
/// (f, b), which behaves similarly. Any other empty class is an error.
pub fn build_distance_distributions(
    pairs: &[PosedPair],
    metric: &LearnedMetric,
) -> Result<DistanceDistributions, WeightError> {
    let mut dists = DistanceDistributions::default();
    for pair in pairs {
        let idx = PosePair::new(pair.pose_a, pair.pose_b).index();
        let d = metric_distance(metric, &pair.feature_a, &pair.feature_b)?;
        if pair.same_identity {
            dists.positive[idx].push(d);
        } else {
            dists.negative[idx].push(d);
        }
    }
    if dists.positive[RL].is_empty() {
        dists.positive[RL] = dists.positive[FB].clone();
    }
    if dists.negative[RL].is_empty() {
        dists.negative[RL] = dists.negative[FB].clone();
    }
    for (i, pair) in PosePair::ALL.iter().enumerate() {
        if dists.positive[i].is_empty() {
            return Err(WeightError::MissingPosePair {
                pair: pair.name(),
                class: "positive",
            });
        }
        if dists.negative[i].is_empty() {
            return Err(WeightError::MissingPosePair {
                pair: pair.name(),
                class: "negative",
            });
        }
    }
    Ok(dists)
}

/// Draws training vectors coordinate-wise from the distributions.
///
/// Each positive vector samples its ten coordinates independently from the
/// ten positive distributions (negatives likewise); the output is
/// deterministic under `seed`.
pub fn sample_training_vectors(
    distributions: &DistanceDistributions,
    count_pos: usize,
    count_neg: usize,
    seed: u64,
) -> Result<Vec<DistanceSample>, WeightError> {
    for (class, count, lists) in [
        ("positive", count_pos, &distributions.positive),
        ("negative", count_neg, &distributions.negative),
    ] {
        if count > 0 {
            for (i, list) in lists.iter().enumerate() {
                if list.is_empty() {
                    return Err(WeightError::EmptyDistribution {
                        pair: PosePair::ALL[i].name(),
                        class,
                    });
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(count_pos + count_neg);
    for (count, lists, y) in [
        (count_pos, &distributions.positive, 1i8),
        (count_neg, &distributions.negative, -1i8),
    ] {
        for _ in 0..count {
            let mut x = [0.0f64; 10];
            for (i, list) in lists.iter().enumerate() {
                x[i] = list[rng.random_range(0..list.len())];
            }
            samples.push(DistanceSample { x, y });
        }
    }
    Ok(samples)
}

fn dot(a: &[f64; 10], b: &[f64; 10]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Primal objective `0.5 ||w||^2 + lambda * sum hinge`.
pub fn svm_objective(weights: &[f64; 10], samples: &[DistanceSample], lambda: f64) -> f64 {
    let reg = 0.5 * dot(weights, weights);
    let hinge: f64 = samples
        .iter()
        .map(|s| (1.0 - s.y as f64 * dot(weights, &s.x)).max(0.0))
        .sum();
    reg + lambda * hinge
}

/// Solves the bias-free hinge-loss SVM by dual coordinate descent.
///
/// Dual: maximize `sum a_i - 0.5 sum a_i a_j y_i y_j x_i.x_j` subject to
/// `0 <= a_i <= lambda`, with `w = sum a_i y_i x_i`. Sweeps are in fixed
/// sample order, so the solution is deterministic.
fn solve_svm(samples: &[DistanceSample], config: &SvmConfig) -> [f64; 10] {
    let n = samples.len();
    let c = config.lambda;
    let q_diag: Vec<f64> = samples.iter().map(|s| dot(&s.x, &s.x).max(1e-12)).collect();
    let mut alpha = vec![0.0f64; n];
    let mut w = [0.0f64; 10];
    for _ in 0..config.max_iterations {
        let mut max_violation = 0.0f64;
        for i in 0..n {
            let yi = samples[i].y as f64;
            let g = yi * dot(&w, &samples[i].x) - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= c {
                g.max(0.0)
            } else {
                g
            };
            max_violation = max_violation.max(pg.abs());
            if pg.abs() > 1e-14 {
                let old = alpha[i];
                let new = (old - g / q_diag[i]).clamp(0.0, c);
                if (new - old).abs() > 0.0 {
                    let delta = (new - old) * yi;
                    for (wk, xk) in w.iter_mut().zip(&samples[i].x) {
                        *wk += delta * xk;
                    }
                    alpha[i] = new;
                }
            }
        }
        if max_violation < config.tolerance {
            break;
        }
    }
    w
}

/// Trains matching weights with a maximal-margin linear classifier.
///
/// The raw hyperplane is negated (same-person distances are small, so
/// discriminative coordinates come out negative) and the result is equalized
/// onto [0, 2] by an affine range map: the least discriminative pose pair
/// lands at 0, the most discriminative at 2. A hard clip at zero instead
/// would zero out every weakly informative pair at once and leave model
/// pairs connected only through zero-weight pose pairs without a usable
/// cost.
pub fn train_weights(
    samples: &[DistanceSample],
    config: &SvmConfig,
) -> Result<TrainedWeights, WeightError> {
    let has_pos = samples.iter().any(|s| s.y > 0);
    let has_neg = samples.iter().any(|s| s.y < 0);
    if !has_pos || !has_neg {
        return Err(WeightError::MissingClass);
    }
    if samples.windows(2).all(|w| w[0].x == w[1].x) && samples.len() > 1 {
        return Err(WeightError::Degenerate);
    }
    let raw = solve_svm(samples, config);
    let non_separable = samples
        .iter()
        .any(|s| s.y as f64 * dot(&raw, &s.x) < 1.0 - 1e-9);
    let objective = svm_objective(&raw, samples, config.lambda);

    let negated = raw.map(|v| -v);
    let min = negated.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = negated.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max <= 0.0 || max - min <= 1e-15 {
        return Err(WeightError::Degenerate);
    }
    let equalized = negated.map(|v| 2.0 * (v - min.min(0.0)) / (max - min.min(0.0)));
    let weights = MatchWeights::from_values(equalized).map_err(|_| WeightError::Degenerate)?;
    Ok(TrainedWeights {
        weights,
        raw,
        objective,
        non_separable,
    })
}

/// Mean of the four same-pose weights minus nothing; helper for reporting.
pub fn same_pose_mean(weights: &MatchWeights) -> f64 {
    PosePair::ALL
        .iter()
        .filter(|p| p.is_same_pose())
        .map(|p| {
            let (a, b) = p.labels();
            weights.get(a, b)
        })
        .sum::<f64>()
        / 4.0
}

/// Mean of the six cross-pose weights.
pub fn cross_pose_mean(weights: &MatchWeights) -> f64 {
    PosePair::ALL
        .iter()
        .filter(|p| !p.is_same_pose())
        .map(|p| {
            let (a, b) = p.labels();
            weights.get(a, b)
        })
        .sum::<f64>()
        / 6.0
}
