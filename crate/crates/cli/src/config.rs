//! Run configuration: a TOML file with one section per stage, merged with
//! command-line flags (flags win). Every field is optional and falls back to
//! the stage's documented default.

use pamm_core::eval::{EvalConfig, WeightsMode};
use pamm_core::matching::Strategy;
use pamm_core::metric::LearnerId;
use pamm_core::pipeline::PipelineParams;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub poses: PosesSection,
    #[serde(default)]
    pub confidence: ConfidenceSection,
    #[serde(default)]
    pub metric: MetricSection,
    #[serde(default)]
    pub weights: WeightsSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub tracks: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub calibration: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub identities: Option<usize>,
    pub duration: Option<usize>,
    pub frame_rate: Option<f64>,
    pub walk_speed_min: Option<f64>,
    pub walk_speed_max: Option<f64>,
    pub appearance_dim: Option<usize>,
    pub pose_strength: Option<f64>,
    pub occlusion_prob: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosesSection {
    pub frame_rate: Option<f64>,
    /// Moving-average half width.
    pub m: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfidenceSection {
    pub threshold: Option<f64>,
    pub speed_ref: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSection {
    pub learner: Option<String>,
    pub pca_dim: Option<usize>,
    pub regularization: Option<f64>,
    pub pairs_per_identity: Option<usize>,
    pub negative_ratio: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    /// "train-once", "per-trial", or a path to a weights JSON file.
    pub mode: Option<String>,
    pub lambda: Option<f64>,
    pub positives: Option<usize>,
    pub negatives: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    pub strategies: Option<Vec<String>>,
    pub trials: Option<usize>,
    pub base_seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub split_fraction: Option<f64>,
    pub query_camera: Option<String>,
    pub gallery_camera: Option<String>,
    pub single_match_repeats: Option<usize>,
    pub out: Option<PathBuf>,
    pub emit_cmc_csv: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))
    }

    pub fn pipeline_params(&self) -> PipelineParams {
        let defaults = PipelineParams::default();
        PipelineParams {
            frame_rate: self.poses.frame_rate.unwrap_or(defaults.frame_rate),
            smoothing_half_width: self.poses.m.unwrap_or(defaults.smoothing_half_width),
            conf_threshold: self.confidence.threshold.unwrap_or(defaults.conf_threshold),
            speed_ref: self.confidence.speed_ref.unwrap_or(defaults.speed_ref),
        }
    }

    pub fn parse_strategies(names: &[String]) -> Result<Vec<Strategy>, String> {
        names.iter().map(|n| n.parse::<Strategy>()).collect()
    }

    /// Resolves the weights mode string; paths are loaded eagerly.
    pub fn weights_mode(&self, flag_file: Option<&Path>) -> Result<WeightsMode, String> {
        if let Some(path) = flag_file {
            let w = pamm_core::io::load_weights(path).map_err(|e| e.to_string())?;
            return Ok(WeightsMode::Provided(w));
        }
        match self.weights.mode.as_deref() {
            None | Some("train-once") => Ok(WeightsMode::TrainOnce),
            Some("per-trial") => Ok(WeightsMode::PerTrial),
            Some(path) => {
                let w = pamm_core::io::load_weights(Path::new(path)).map_err(|e| e.to_string())?;
                Ok(WeightsMode::Provided(w))
            }
        }
    }

    /// Builds the evaluation config, applying defaults for absent fields.
    pub fn eval_config(&self, weights_file: Option<&Path>) -> Result<EvalConfig, String> {
        let query = self
            .evaluate
            .query_camera
            .clone()
            .unwrap_or_else(|| "cam_a".to_string());
        let gallery = self
            .evaluate
            .gallery_camera
            .clone()
            .unwrap_or_else(|| "cam_b".to_string());
        let mut cfg = EvalConfig::new(query, gallery);
        cfg.pipeline = self.pipeline_params();
        if let Some(seeds) = &self.evaluate.seeds {
            if !seeds.is_empty() {
                cfg.trial_seeds = seeds.clone();
            }
        } else {
            let trials = self.evaluate.trials.unwrap_or(10) as u64;
            let base = self.evaluate.base_seed.unwrap_or(42);
            cfg.trial_seeds = (0..trials).map(|i| base + i).collect();
        }
        if let Some(f) = self.evaluate.split_fraction {
            cfg.split_fraction = f;
        }
        if let Some(names) = &self.evaluate.strategies {
            cfg.strategies = Self::parse_strategies(names)?;
        }
        if let Some(r) = self.evaluate.single_match_repeats {
            cfg.single_match_repeats = r;
        }
        if let Some(learner) = &self.metric.learner {
            cfg.learner = learner.parse::<LearnerId>()?;
        }
        if let Some(dim) = self.metric.pca_dim {
            cfg.pca_dim = (dim > 0).then_some(dim);
        }
        if let Some(reg) = self.metric.regularization {
            cfg.regularization = reg;
        }
        if let Some(p) = self.metric.pairs_per_identity {
            cfg.pairs_per_identity = p;
        }
        if let Some(n) = self.metric.negative_ratio {
            cfg.negative_ratio = n;
        }
        cfg.weights = self.weights_mode(weights_file)?;
        if let Some(l) = self.weights.lambda {
            cfg.weight_lambda = l;
        }
        if let Some(p) = self.weights.positives {
            cfg.weight_pos = p;
        }
        if let Some(n) = self.weights.negatives {
            cfg.weight_neg = n;
        }
        if let Some(s) = self.weights.seed {
            cfg.weight_seed = s;
        }
        Ok(cfg)
    }
}
