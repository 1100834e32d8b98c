//! Metric learning for pairwise feature distances.
//!
//! Distances are Mahalanobis-style quadratic forms `sqrt((a-b)' M (a-b))`
//! with a positive semi-definite `M` learned from labeled pairs, computed in
//! a PCA subspace (the usual two-stage process). Three learners are
//! provided: plain Euclidean (`M = I`), Mahalanobis (`M` is the inverse
//! covariance of positive-pair differences), and KISSME (difference of the
//! inverse covariances of positive- and negative-pair differences, projected
//! back to the PSD cone). The matching layer accepts any learned metric.

use crate::model::FeatureVector;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("need at least 2 feature vectors, got {0}")]
    InsufficientData(usize),
    #[error("PCA dimension {r} invalid for {count} vectors of dimension {d}")]
    InvalidPcaDim { r: usize, d: usize, count: usize },
    #[error("learner {learner} needs {needed} {class} pairs, got {got}")]
    InsufficientPairs {
        learner: LearnerId,
        class: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("difference covariance is singular even after ridge regularization")]
    SingularCovariance,
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Which metric learner produced a [`LearnedMetric`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerId {
    Euclidean,
    Mahalanobis,
    Kissme,
}

impl LearnerId {
    pub fn name(self) -> &'static str {
        match self {
            LearnerId::Euclidean => "euclidean",
            LearnerId::Mahalanobis => "mahalanobis",
            LearnerId::Kissme => "kissme",
        }
    }
}

impl std::fmt::Display for LearnerId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LearnerId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "l2" => Ok(LearnerId::Euclidean),
            "mahalanobis" | "mahal" => Ok(LearnerId::Mahalanobis),
            "kissme" => Ok(LearnerId::Kissme),
            other => Err(format!("unknown metric learner '{other}'")),
        }
    }
}

/// A labeled training pair of equal-dimension features.
#[derive(Debug, Clone, PartialEq)]
pub struct PairLabel {
    pub feature_a: FeatureVector,
    pub feature_b: FeatureVector,
    pub same_identity: bool,
}

/// PCA of a feature sample: mean, orthonormal basis, explained variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: DVector<f64>,
    /// d x r matrix with orthonormal columns, ordered by descending variance.
    pub basis: DMatrix<f64>,
    /// Variance captured by each retained component.
    pub explained_variance: Vec<f64>,
    /// True when fewer than the requested components had nonzero variance
    /// and the basis was truncated.
    pub truncated: bool,
}

/// Fits a PCA basis of `target_dim` components to `features`.
///
/// The basis is computed from the SVD of the centered data, is deterministic
/// given the input order (each column's largest-magnitude entry is made
/// positive), and is truncated with `truncated = true` when the data has
/// fewer nonzero principal variances than requested.
pub fn fit_pca(features: &[FeatureVector], target_dim: usize) -> Result<Pca, MetricError> {
    let count = features.len();
    if count < 2 {
        return Err(MetricError::InsufficientData(count));
    }
    let d = features[0].dim();
    for f in features {
        if f.dim() != d {
            return Err(MetricError::DimensionMismatch {
                expected: d,
                got: f.dim(),
            });
        }
    }
    if target_dim == 0 || target_dim > d.min(count) {
        return Err(MetricError::InvalidPcaDim {
            r: target_dim,
            d,
            count,
        });
    }
    let mut mean = DVector::zeros(d);
    for f in features {
        mean += DVector::from_column_slice(&f.values);
    }
    mean /= count as f64;
    let mut centered = DMatrix::zeros(count, d);
    for (i, f) in features.iter().enumerate() {
        for j in 0..d {
            centered[(i, j)] = f.values[j] - mean[j];
        }
    }
    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("SVD with V requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap()
    });
    let sigma_max = svd.singular_values[order[0]];
    let nonzero = order
        .iter()
        .filter(|&&i| svd.singular_values[i] > sigma_max * 1e-12 + 1e-300)
        .count();
    let kept = target_dim.min(nonzero.max(1));
    let truncated = kept < target_dim;
    let mut basis = DMatrix::zeros(d, kept);
    let mut explained = Vec::with_capacity(kept);
    for (col, &idx) in order.iter().take(kept).enumerate() {
        let mut column: Vec<f64> = (0..d).map(|j| v_t[(idx, j)]).collect();
        let (mut max_abs, mut max_val) = (0.0f64, 0.0f64);
        for &v in &column {
            if v.abs() > max_abs {
                max_abs = v.abs();
                max_val = v;
            }
        }
        if max_val < 0.0 {
            for v in column.iter_mut() {
                *v = -*v;
            }
        }
        for (j, v) in column.iter().enumerate() {
            basis[(j, col)] = *v;
        }
        let s = svd.singular_values[idx];
        explained.push(s * s / (count as f64 - 1.0));
    }
    Ok(Pca {
        mean,
        basis,
        explained_variance: explained,
        truncated,
    })
}

impl Pca {
    pub fn reduced_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn project(&self, x: &[f64]) -> DVector<f64> {
        let v = DVector::from_column_slice(x) - &self.mean;
        self.basis.transpose() * v
    }

    pub fn reconstruct(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.basis * z + &self.mean
    }
}

/// PCA projection plus the PSD matrix defining the pairwise distance.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedMetric {
    pub learner_id: LearnerId,
    /// Dimension of raw input features.
    pub input_dim: usize,
    pub pca_mean: DVector<f64>,
    /// d x r projection with orthonormal columns.
    pub pca_basis: DMatrix<f64>,
    /// r x r symmetric positive semi-definite matrix.
    pub m: DMatrix<f64>,
}

impl LearnedMetric {
    /// An identity metric (Euclidean on raw features) of dimension `d`.
    pub fn identity(d: usize) -> Self {
        Self {
            learner_id: LearnerId::Euclidean,
            input_dim: d,
            pca_mean: DVector::zeros(d),
            pca_basis: DMatrix::identity(d, d),
            m: DMatrix::identity(d, d),
        }
    }

    pub fn reduced_dim(&self) -> usize {
        self.pca_basis.ncols()
    }

    /// Checks symmetry, PSD-ness, and basis orthonormality.
    pub fn validate(&self) -> Result<(), String> {
        let r = self.m.nrows();
        for i in 0..r {
            for j in 0..r {
                if (self.m[(i, j)] - self.m[(j, i)]).abs() > 1e-10 {
                    return Err(format!("M not symmetric at ({i},{j})"));
                }
            }
        }
        let eig = self.m.clone().symmetric_eigen();
        if let Some(min) = eig.eigenvalues.iter().cloned().reduce(f64::min) {
            if min < -1e-8 {
                return Err(format!("M has negative eigenvalue {min}"));
            }
        }
        let gram = self.pca_basis.transpose() * &self.pca_basis;
        let eye = DMatrix::identity(gram.nrows(), gram.ncols());
        let dev = (&gram - eye).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if dev > 1e-8 {
            return Err(format!("basis not orthonormal (dev {dev:.2e})"));
        }
        Ok(())
    }

    fn project(&self, values: &[f64]) -> DVector<f64> {
        let v = DVector::from_column_slice(values) - &self.pca_mean;
        self.pca_basis.transpose() * v
    }
}

/// Projects a symmetric matrix to the PSD cone by clipping negative
/// eigenvalues to zero. Idempotent on already-PSD matrices.
pub fn psd_project(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let clipped = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&v| v.max(0.0)),
    );
    let rebuilt =
        &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    (&rebuilt + rebuilt.transpose()) * 0.5
}

fn second_moment(diffs: &[DVector<f64>], r: usize) -> DMatrix<f64> {
    let mut sigma = DMatrix::zeros(r, r);
    for z in diffs {
        sigma += z * z.transpose();
    }
    sigma /= diffs.len() as f64;
    sigma
}

fn ridge_inverse(sigma: &DMatrix<f64>, regularization: f64) -> Result<DMatrix<f64>, MetricError> {
    let r = sigma.nrows();
    let trace: f64 = sigma.diagonal().iter().sum();
    if !trace.is_finite() || trace <= 0.0 {
        return Err(MetricError::SingularCovariance);
    }
    let ridged = sigma + DMatrix::identity(r, r) * (regularization * trace / r as f64);
    ridged
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(MetricError::SingularCovariance)
}

/// Learns a metric from labeled pairs.
///
/// Features are first projected onto a PCA basis fit to all pair members
/// (`pca_dim = None` skips the reduction); covariances of pairwise difference
/// vectors are ridge-regularized by `regularization * trace / r` before
/// inversion.
pub fn learn_metric(
    pairs: &[PairLabel],
    learner: LearnerId,
    pca_dim: Option<usize>,
    regularization: f64,
) -> Result<LearnedMetric, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::InsufficientData(0));
    }
    let d = pairs[0].feature_a.dim();
    for p in pairs {
        if p.feature_a.dim() != d || p.feature_b.dim() != d {
            return Err(MetricError::DimensionMismatch {
                expected: d,
                got: p.feature_a.dim().max(p.feature_b.dim()),
            });
        }
    }
    let (mean, basis) = match pca_dim {
        Some(r) => {
            let all: Vec<FeatureVector> = pairs
                .iter()
                .flat_map(|p| [p.feature_a.clone(), p.feature_b.clone()])
                .collect();
            let r_eff = r.min(d).min(all.len());
            let pca = fit_pca(&all, r_eff.max(1))?;
            (pca.mean, pca.basis)
        }
        None => (DVector::zeros(d), DMatrix::identity(d, d)),
    };
    let r = basis.ncols();
    let basis_t = basis.transpose();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for p in pairs {
        let diff = DVector::from_column_slice(&p.feature_a.values)
            - DVector::from_column_slice(&p.feature_b.values);
        let z = &basis_t * diff;
        if p.same_identity {
            pos.push(z);
        } else {
            neg.push(z);
        }
    }

    let m = match learner {
        LearnerId::Euclidean => DMatrix::identity(r, r),
        LearnerId::Mahalanobis => {
            if pos.len() < r + 1 {
                return Err(MetricError::InsufficientPairs {
                    learner,
                    class: "positive",
                    needed: r + 1,
                    got: pos.len(),
                });
            }
            let inv = ridge_inverse(&second_moment(&pos, r), regularization)?;
            (&inv + inv.transpose()) * 0.5
        }
        LearnerId::Kissme => {
            if pos.len() < r + 1 {
                return Err(MetricError::InsufficientPairs {
                    learner,
                    class: "positive",
                    needed: r + 1,
                    got: pos.len(),
                });
            }
            if neg.is_empty() {
                return Err(MetricError::InsufficientPairs {
                    learner,
                    class: "negative",
                    needed: 1,
                    got: 0,
                });
            }
            let pos_inv = ridge_inverse(&second_moment(&pos, r), regularization)?;
            let neg_inv = ridge_inverse(&second_moment(&neg, r), regularization)?;
            psd_project(&(pos_inv - neg_inv))
        }
    };
    Ok(LearnedMetric {
        learner_id: learner,
        input_dim: d,
        pca_mean: mean,
        pca_basis: basis,
        m,
    })
}

/// Distance between two raw feature vectors under `metric`.
pub fn metric_distance(
    metric: &LearnedMetric,
    a: &FeatureVector,
    b: &FeatureVector,
) -> Result<f64, MetricError> {
    if a.dim() != metric.input_dim || b.dim() != metric.input_dim {
        return Err(MetricError::DimensionMismatch {
            expected: metric.input_dim,
            got: if a.dim() != metric.input_dim {
                a.dim()
            } else {
                b.dim()
            },
        });
    }
    let diff = metric.project(&a.values) - metric.project(&b.values);
    let q = (diff.transpose() * &metric.m * diff)[(0, 0)];
    Ok(q.max(0.0).sqrt())
}

/// Precomputed linear map under which the learned metric becomes Euclidean.
///
/// With `M = V D V'`, transforming features by `sqrt(D) V' B' (x - mean)`
/// turns [`metric_distance`] into a plain vector norm, which is much cheaper
/// inside all-pairs matching loops.
#[derive(Debug, Clone)]
pub struct MetricTransform {
    mean: DVector<f64>,
    map: DMatrix<f64>,
    input_dim: usize,
}

impl MetricTransform {
    pub fn new(metric: &LearnedMetric) -> Self {
        let eig = metric.m.clone().symmetric_eigen();
        let sqrt_d = DMatrix::from_diagonal(&DVector::from_iterator(
            eig.eigenvalues.len(),
            eig.eigenvalues.iter().map(|&v| v.max(0.0).sqrt()),
        ));
        let map = sqrt_d * eig.eigenvectors.transpose() * metric.pca_basis.transpose();
        Self {
            mean: metric.pca_mean.clone(),
            map,
            input_dim: metric.input_dim,
        }
    }

    pub fn apply(&self, feature: &FeatureVector) -> Result<DVector<f64>, MetricError> {
        if feature.dim() != self.input_dim {
            return Err(MetricError::DimensionMismatch {
                expected: self.input_dim,
                got: feature.dim(),
            });
        }
        let v = DVector::from_column_slice(&feature.values) - &self.mean;
        Ok(&self.map * v)
    }
}
