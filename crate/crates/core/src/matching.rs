//! Multi-pose model matching.
//!
//! All pairwise feature distances between two multi-pose models are
//! aggregated into a weighted mean: each distance between a pose-p sample and
//! a pose-q sample contributes with weight `w_pq`, and the total is divided
//! by the accumulated weight mass, so absent pose pairs simply drop out and a
//! global rescaling of the weights changes nothing. Lower cost means higher
//! similarity. The five conventional multi-shot baselines are provided for
//! comparison.

use crate::metric::{metric_distance, LearnedMetric, MetricError, MetricTransform};
use crate::model::{FeatureVector, MultiPoseModel, PoseLabel};
use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchError {
    #[error("model {0} has no samples")]
    EmptyModel(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("no pose-group pair exists between the two models")]
    NoExistingPairs,
    #[error("every existing pose-group pair has zero weight")]
    ZeroWeightMass,
    #[error("strategy {0} requires matching weights")]
    MissingWeights(Strategy),
}

/// Unordered pair of pose labels; `(p, q)` and `(q, p)` are the same pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PosePair {
    lo: PoseLabel,
    hi: PoseLabel,
}

impl PosePair {
    /// Canonical order used for distance vectors:
    /// ff, fr, fb, fl, rr, rb, rl, bb, bl, ll.
    pub const ALL: [PosePair; 10] = {
        use PoseLabel::*;
        [
            PosePair { lo: Front, hi: Front },
            PosePair { lo: Front, hi: Right },
            PosePair { lo: Front, hi: Back },
            PosePair { lo: Front, hi: Left },
            PosePair { lo: Right, hi: Right },
            PosePair { lo: Right, hi: Back },
            PosePair { lo: Right, hi: Left },
            PosePair { lo: Back, hi: Back },
            PosePair { lo: Back, hi: Left },
            PosePair { lo: Left, hi: Left },
        ]
    };

    pub fn new(a: PoseLabel, b: PoseLabel) -> Self {
        if a.index() <= b.index() {
            Self { lo: a, hi: b }
        } else {
            Self { lo: b, hi: a }
        }
    }

    pub fn index(self) -> usize {
        // Upper-triangular enumeration of a 4x4 grid.
        const IDX: [[usize; 4]; 4] = [
            [0, 1, 2, 3],
            [1, 4, 5, 6],
            [2, 5, 7, 8],
            [3, 6, 8, 9],
        ];
        IDX[self.lo.index()][self.hi.index()]
    }

    pub fn labels(self) -> (PoseLabel, PoseLabel) {
        (self.lo, self.hi)
    }

    pub fn is_same_pose(self) -> bool {
        self.lo == self.hi
    }

    pub fn name(self) -> &'static str {
        match self.index() {
            0 => "ff",
            1 => "fr",
            2 => "fb",
            3 => "fl",
            4 => "rr",
            5 => "rb",
            6 => "rl",
            7 => "bb",
            8 => "bl",
            _ => "ll",
        }
    }
}

impl std::fmt::Display for PosePair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The ten symmetric pose-pair matching weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchWeights {
    values: [f64; 10],
}

// Serialized field order mirrors how the weights are usually reported:
// the four same-pose weights first, then the six cross-pose weights.
#[derive(Serialize, Deserialize)]
struct MatchWeightsRepr {
    ff: f64,
    rr: f64,
    bb: f64,
    ll: f64,
    fr: f64,
    fb: f64,
    fl: f64,
    rb: f64,
    rl: f64,
    bl: f64,
}

impl Serialize for MatchWeights {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let v = &self.values;
        MatchWeightsRepr {
            ff: v[0],
            fr: v[1],
            fb: v[2],
            fl: v[3],
            rr: v[4],
            rb: v[5],
            rl: v[6],
            bb: v[7],
            bl: v[8],
            ll: v[9],
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MatchWeights {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let r = MatchWeightsRepr::deserialize(deserializer)?;
        MatchWeights::from_values([
            r.ff, r.fr, r.fb, r.fl, r.rr, r.rb, r.rl, r.bb, r.bl, r.ll,
        ])
        .map_err(serde::de::Error::custom)
    }
}

impl MatchWeights {
    /// Builds weights from values in [`PosePair::ALL`] order.
    pub fn from_values(values: [f64; 10]) -> Result<Self, String> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err("weights must be finite and non-negative".into());
        }
        if values.iter().all(|v| *v <= 0.0) {
            return Err("at least one weight must be positive".into());
        }
        Ok(Self { values })
    }

    /// Uniform weights: every pose pair counts equally.
    pub fn uniform() -> Self {
        Self { values: [1.0; 10] }
    }

    pub fn get(&self, a: PoseLabel, b: PoseLabel) -> f64 {
        self.values[PosePair::new(a, b).index()]
    }

    pub fn values(&self) -> &[f64; 10] {
        &self.values
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

/// Matching strategies: the proposed weighted multi-pose matching and the
/// five conventional alternatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// One random appearance per person.
    SingleMatch,
    /// All appearances pooled coordinate-wise by max, one comparison.
    MultiQMax,
    /// All appearances pooled coordinate-wise by mean, one comparison.
    MultiQAvg,
    /// Minimum over all pairwise distances.
    FullMatchMin,
    /// Mean over all pairwise distances.
    FullMatchAvg,
    /// Pose-weighted mean over all pairwise distances.
    Pamm,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::SingleMatch,
        Strategy::MultiQMax,
        Strategy::MultiQAvg,
        Strategy::FullMatchMin,
        Strategy::FullMatchAvg,
        Strategy::Pamm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::SingleMatch => "SingleMatch",
            Strategy::MultiQMax => "MultiQ-max",
            Strategy::MultiQAvg => "MultiQ-avg",
            Strategy::FullMatchMin => "FullMatch-min",
            Strategy::FullMatchAvg => "FullMatch-avg",
            Strategy::Pamm => "PaMM",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "singlematch" | "single" => Ok(Strategy::SingleMatch),
            "multiq-max" | "multiqmax" => Ok(Strategy::MultiQMax),
            "multiq-avg" | "multiqavg" => Ok(Strategy::MultiQAvg),
            "fullmatch-min" | "fullmatchmin" => Ok(Strategy::FullMatchMin),
            "fullmatch-avg" | "fullmatchavg" => Ok(Strategy::FullMatchAvg),
            "pamm" => Ok(Strategy::Pamm),
            other => Err(format!("unknown matching strategy '{other}'")),
        }
    }
}

/// All pairwise distances between two models, grouped by pose pair.
///
/// `by_group[p][q]` holds the distances between group `p` of the first model
/// and group `q` of the second, row-major over (i, j) member indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DistanceTable {
    pub by_group: [[Vec<f64>; 4]; 4],
}

impl DistanceTable {
    pub fn total_count(&self) -> usize {
        self.by_group.iter().flatten().map(Vec::len).sum()
    }

    pub fn existence(&self) -> [[bool; 4]; 4] {
        let mut e = [[false; 4]; 4];
        for (p, row) in self.by_group.iter().enumerate() {
            for (q, cell) in row.iter().enumerate() {
                e[p][q] = !cell.is_empty();
            }
        }
        e
    }

    pub fn all_distances(&self) -> impl Iterator<Item = f64> + '_ {
        self.by_group.iter().flatten().flatten().copied()
    }
}

/// The resolved cost of matching two multi-pose models.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchCost {
    pub cost: f64,
    /// Number of individual distance terms that contributed.
    pub pair_count: usize,
    /// Which (p, q) group pairs existed between the two models.
    pub existence: [[bool; 4]; 4],
}

fn check_nonempty(model: &MultiPoseModel) -> Result<(), MatchError> {
    if model.sample_count() == 0 {
        return Err(MatchError::EmptyModel(format!(
            "{}/{}",
            model.camera_id, model.object_id
        )));
    }
    Ok(())
}

/// Computes one distance per (p, i, q, j) combination with both members
/// present; the total count is the sum over group pairs of `N_p * N_q`.
pub fn pairwise_distances(
    model_a: &MultiPoseModel,
    model_b: &MultiPoseModel,
    metric: &LearnedMetric,
) -> Result<DistanceTable, MatchError> {
    check_nonempty(model_a)?;
    check_nonempty(model_b)?;
    let mut by_group: [[Vec<f64>; 4]; 4] = Default::default();
    for p in PoseLabel::ALL {
        for q in PoseLabel::ALL {
            let ga = model_a.group(p);
            let gb = model_b.group(q);
            let mut cell = Vec::with_capacity(ga.len() * gb.len());
            for ma in &ga.members {
                for mb in &gb.members {
                    cell.push(metric_distance(metric, &ma.feature, &mb.feature)?);
                }
            }
            by_group[p.index()][q.index()] = cell;
        }
    }
    Ok(DistanceTable { by_group })
}

/// Weighted mean of all pairwise distances.
///
/// `cost = sum_pq sum_ij w_pq x / sum_pq sum_ij w_pq` over existing group
/// pairs, so each pose pair weighs in proportionally to `w_pq` times its
/// member-pair count, and uniform weights reduce to the plain mean.
pub fn pamm_cost(table: &DistanceTable, weights: &MatchWeights) -> Result<MatchCost, MatchError> {
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    let mut pair_count = 0usize;
    let mut any_pair = false;
    for p in PoseLabel::ALL {
        for q in PoseLabel::ALL {
            let cell = &table.by_group[p.index()][q.index()];
            if cell.is_empty() {
                continue;
            }
            any_pair = true;
            let w = weights.get(p, q);
            let sum: f64 = cell.iter().sum();
            numerator += w * sum;
            denominator += w * cell.len() as f64;
            pair_count += cell.len();
        }
    }
    if !any_pair {
        return Err(MatchError::NoExistingPairs);
    }
    if denominator <= 0.0 {
        return Err(MatchError::ZeroWeightMass);
    }
    Ok(MatchCost {
        cost: numerator / denominator,
        pair_count,
        existence: table.existence(),
    })
}

/// [`pamm_cost`] that degrades to the plain mean when every existing pose
/// pair carries zero weight.
///
/// Trained weights may clip uninformative pose pairs to exactly zero; a model
/// pair connected only through such pairs has no pose information to exploit,
/// and the unweighted mean is the neutral cost. Harness layers use this;
/// [`pamm_cost`] itself keeps the strict error.
pub fn pamm_cost_or_mean(
    table: &DistanceTable,
    weights: &MatchWeights,
) -> Result<MatchCost, MatchError> {
    match pamm_cost(table, weights) {
        Err(MatchError::ZeroWeightMass) => {
            let count = table.total_count();
            let mut sum = 0.0;
            for p in 0..4 {
                for q in 0..4 {
                    sum += table.by_group[p][q].iter().sum::<f64>();
                }
            }
            Ok(MatchCost {
                cost: sum / count as f64,
                pair_count: count,
                existence: table.existence(),
            })
        }
        other => other,
    }
}

fn pooled_feature(model: &MultiPoseModel, avg: bool) -> FeatureVector {
    let d = model.feature_dim().unwrap_or(0);
    let mut pooled = if avg {
        vec![0.0f64; d]
    } else {
        vec![f64::NEG_INFINITY; d]
    };
    let mut count = 0usize;
    for f in model.all_features() {
        for (acc, v) in pooled.iter_mut().zip(&f.values) {
            if avg {
                *acc += v;
            } else if *v > *acc {
                *acc = *v;
            }
        }
        count += 1;
    }
    if avg && count > 0 {
        for v in pooled.iter_mut() {
            *v /= count as f64;
        }
    }
    FeatureVector::new(pooled, "pooled")
}

fn nth_feature(model: &MultiPoseModel, n: usize) -> (&FeatureVector, PoseLabel) {
    let mut i = n;
    for label in PoseLabel::ALL {
        let g = model.group(label);
        if i < g.len() {
            return (&g.members[i].feature, label);
        }
        i -= g.len();
    }
    unreachable!("index {n} out of bounds");
}

/// Cost of one of the five conventional matching strategies.
///
/// SingleMatch draws one uniformly random sample per model from `rng`; the
/// other strategies are deterministic and ignore it.
pub fn baseline_cost<R: Rng + ?Sized>(
    model_a: &MultiPoseModel,
    model_b: &MultiPoseModel,
    metric: &LearnedMetric,
    strategy: Strategy,
    rng: &mut R,
) -> Result<MatchCost, MatchError> {
    check_nonempty(model_a)?;
    check_nonempty(model_b)?;
    match strategy {
        Strategy::SingleMatch => {
            let (fa, pa) = nth_feature(model_a, rng.random_range(0..model_a.sample_count()));
            let (fb, pb) = nth_feature(model_b, rng.random_range(0..model_b.sample_count()));
            let cost = metric_distance(metric, fa, fb)?;
            let mut existence = [[false; 4]; 4];
            existence[pa.index()][pb.index()] = true;
            Ok(MatchCost {
                cost,
                pair_count: 1,
                existence,
            })
        }
        Strategy::MultiQMax | Strategy::MultiQAvg => {
            let avg = strategy == Strategy::MultiQAvg;
            let fa = pooled_feature(model_a, avg);
            let fb = pooled_feature(model_b, avg);
            let cost = metric_distance(metric, &fa, &fb)?;
            let mut existence = [[false; 4]; 4];
            for p in PoseLabel::ALL {
                for q in PoseLabel::ALL {
                    existence[p.index()][q.index()] =
                        !model_a.group(p).is_empty() && !model_b.group(q).is_empty();
                }
            }
            Ok(MatchCost {
                cost,
                pair_count: 1,
                existence,
            })
        }
        Strategy::FullMatchMin | Strategy::FullMatchAvg => {
            let table = pairwise_distances(model_a, model_b, metric)?;
            let count = table.total_count();
            if count == 0 {
                return Err(MatchError::NoExistingPairs);
            }
            let cost = if strategy == Strategy::FullMatchMin {
                table.all_distances().fold(f64::INFINITY, f64::min)
            } else {
                let mut sum = 0.0;
                for p in 0..4 {
                    for q in 0..4 {
                        sum += table.by_group[p][q].iter().sum::<f64>();
                    }
                }
                sum / count as f64
            };
            Ok(MatchCost {
                cost,
                pair_count: count,
                existence: table.existence(),
            })
        }
        Strategy::Pamm => Err(MatchError::MissingWeights(Strategy::Pamm)),
    }
}

/// Resolves any strategy, with weights required only for [`Strategy::Pamm`].
pub fn match_cost<R: Rng + ?Sized>(
    model_a: &MultiPoseModel,
    model_b: &MultiPoseModel,
    metric: &LearnedMetric,
    strategy: Strategy,
    weights: Option<&MatchWeights>,
    rng: &mut R,
) -> Result<MatchCost, MatchError> {
    match strategy {
        Strategy::Pamm => {
            let weights = weights.ok_or(MatchError::MissingWeights(Strategy::Pamm))?;
            let table = pairwise_distances(model_a, model_b, metric)?;
            pamm_cost(&table, weights)
        }
        other => baseline_cost(model_a, model_b, metric, other, rng),
    }
}

/// A multi-pose model with all features premapped so that the learned metric
/// becomes the Euclidean norm; used by the evaluation loops.
#[derive(Debug, Clone)]
pub struct TransformedModel {
    pub object_id: String,
    pub groups: [Vec<DVector<f64>>; 4],
    pooled_max: DVector<f64>,
    pooled_avg: DVector<f64>,
}

impl TransformedModel {
    pub fn new(
        model: &MultiPoseModel,
        transform: &MetricTransform,
    ) -> Result<Self, MetricError> {
        let mut groups: [Vec<DVector<f64>>; 4] = Default::default();
        for label in PoseLabel::ALL {
            for member in &model.group(label).members {
                groups[label.index()].push(transform.apply(&member.feature)?);
            }
        }
        let pooled_max = transform.apply(&pooled_feature(model, false))?;
        let pooled_avg = transform.apply(&pooled_feature(model, true))?;
        Ok(Self {
            object_id: model.object_id.clone(),
            groups,
            pooled_max,
            pooled_avg,
        })
    }

    pub fn sample_count(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    fn nth(&self, n: usize) -> &DVector<f64> {
        let mut i = n;
        for g in &self.groups {
            if i < g.len() {
                return &g[i];
            }
            i -= g.len();
        }
        unreachable!()
    }
}

/// [`pairwise_distances`] over premapped models.
pub fn pairwise_distances_transformed(a: &TransformedModel, b: &TransformedModel) -> DistanceTable {
    let mut by_group: [[Vec<f64>; 4]; 4] = Default::default();
    for (p, ga) in a.groups.iter().enumerate() {
        for (q, gb) in b.groups.iter().enumerate() {
            let mut cell = Vec::with_capacity(ga.len() * gb.len());
            for va in ga {
                for vb in gb {
                    cell.push((va - vb).norm());
                }
            }
            by_group[p][q] = cell;
        }
    }
    DistanceTable { by_group }
}

/// [`match_cost`] over premapped models, sharing one distance table across
/// the table-based strategies.
pub fn match_cost_transformed<R: Rng + ?Sized>(
    a: &TransformedModel,
    b: &TransformedModel,
    table: &DistanceTable,
    strategy: Strategy,
    weights: Option<&MatchWeights>,
    rng: &mut R,
) -> Result<f64, MatchError> {
    match strategy {
        Strategy::SingleMatch => {
            let va = a.nth(rng.random_range(0..a.sample_count()));
            let vb = b.nth(rng.random_range(0..b.sample_count()));
            Ok((va - vb).norm())
        }
        Strategy::MultiQMax => Ok((&a.pooled_max - &b.pooled_max).norm()),
        Strategy::MultiQAvg => Ok((&a.pooled_avg - &b.pooled_avg).norm()),
        Strategy::FullMatchMin => Ok(table.all_distances().fold(f64::INFINITY, f64::min)),
        Strategy::FullMatchAvg => {
            let count = table.total_count();
            if count == 0 {
                return Err(MatchError::NoExistingPairs);
            }
            let mut sum = 0.0;
            for p in 0..4 {
                for q in 0..4 {
                    sum += table.by_group[p][q].iter().sum::<f64>();
                }
            }
            Ok(sum / count as f64)
        }
        Strategy::Pamm => {
            let weights = weights.ok_or(MatchError::MissingWeights(Strategy::Pamm))?;
            Ok(pamm_cost_or_mean(table, weights)?.cost)
        }
    }
}
