//! Command-line front end for the pose-aware multi-shot matching pipeline.
//!
//! Subcommands mirror the pipeline stages: scene generation, pose
//! estimation, confidence filtering, model building, metric learning, weight
//! training, matching, and the full evaluation loop. Exit codes: 1 for usage
//! errors, 2 for unreadable or malformed inputs, 3 for stage failures (the
//! stage name is echoed in the error line).

mod config;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use pamm_core::confidence::{filter_samples, score_track, ConfidenceError, ConfidenceReport};
use pamm_core::eval::{derive_seed, metric_training_pairs, posed_pairs, run_evaluation};
use pamm_core::io;
use pamm_core::matching::{baseline_cost, pairwise_distances, pamm_cost_or_mean, Strategy};
use pamm_core::metric::{learn_metric, LearnerId};
use pamm_core::model::{build_multipose_model, FeatureKey};
use pamm_core::pipeline::{Dataset, FrameIndex};
use pamm_core::pose::{compute_velocity, estimate_track_angles, smooth_angles, Track};
use pamm_core::synth::{generate_scene, SceneConfig};
use pamm_core::weights::{
    build_distance_distributions, sample_training_vectors, train_weights, SvmConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pamm",
    version,
    about = "Pose-aware multi-shot matching pipeline for person re-identification"
)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic ground-truthed multi-camera scene.
    SynthGen(SynthGenArgs),
    /// Estimate and smooth per-sample pose angles.
    EstimatePoses(EstimatePosesArgs),
    /// Score sample confidence and drop unreliable samples.
    Filter(FilterArgs),
    /// Group features into per-person multi-pose models.
    BuildModels(BuildModelsArgs),
    /// Learn a distance metric from cross-camera identity pairs.
    TrainMetric(TrainMetricArgs),
    /// Train the ten pose-pair matching weights.
    TrainWeights(TrainWeightsArgs),
    /// Match query models against gallery models.
    Match(MatchArgs),
    /// Run the full split/train/match/CMC evaluation loop.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct SynthGenArgs {
    /// Optional TOML config; the `[synth]` section seeds these flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    identities: Option<usize>,
    #[arg(long)]
    duration: Option<usize>,
    #[arg(long)]
    frame_rate: Option<f64>,
    #[arg(long)]
    appearance_dim: Option<usize>,
    /// Pose-dependent appearance strength in [0, 1].
    #[arg(long)]
    pose_strength: Option<f64>,
    /// Per-sample probability of an injected occlusion event.
    #[arg(long)]
    occlusion_prob: Option<f64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for tracks.csv, features.csv, calibration.json,
    /// ground_truth.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EstimatePosesArgs {
    #[arg(long)]
    tracks: PathBuf,
    #[arg(long)]
    calib: PathBuf,
    #[arg(long, default_value_t = 15.0)]
    frame_rate: f64,
    /// Moving-average half width for polar smoothing.
    #[arg(long, default_value_t = 10)]
    m: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FilterArgs {
    /// Track CSV carrying raw_angle,smooth_angle columns.
    #[arg(long)]
    tracks: PathBuf,
    #[arg(long)]
    calib: PathBuf,
    #[arg(long, default_value_t = 15.0)]
    frame_rate: f64,
    /// Samples with confidence at or below this are dropped; negative
    /// values keep everything.
    #[arg(long, default_value_t = 0.8, allow_negative_numbers = true)]
    conf_threshold: f64,
    /// Speed normalization (m/s) inside the confidence tanh.
    #[arg(long, default_value_t = 1.0)]
    speed_ref: f64,
    /// Keep rejected rows in the output instead of dropping them.
    #[arg(long)]
    keep_rejected: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildModelsArgs {
    /// Track CSV with smooth angles (output of filter or estimate-poses).
    #[arg(long)]
    tracks: PathBuf,
    /// Precomputed feature CSV.
    #[arg(long, conflicts_with = "patches", required_unless_present = "patches")]
    features: Option<PathBuf>,
    /// Directory of PNG/PPM patches named `<camera>_<object>_<frame>`; the
    /// built-in descriptor is extracted from each.
    #[arg(long)]
    patches: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainMetricArgs {
    /// Multi-pose model JSON (training identities).
    #[arg(long)]
    models: PathBuf,
    #[arg(long, default_value = "kissme")]
    learner: String,
    /// PCA dimension; 0 disables the reduction.
    #[arg(long, default_value_t = 64)]
    pca_dim: usize,
    #[arg(long, default_value_t = 1e-3)]
    reg: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    pairs_per_identity: usize,
    #[arg(long, default_value_t = 10)]
    negative_ratio: usize,
    #[arg(long, default_value = "cam_a")]
    query_camera: String,
    #[arg(long, default_value = "cam_b")]
    gallery_camera: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainWeightsArgs {
    /// Multi-pose model JSON; labeled pose pairs are drawn across cameras.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    metric: PathBuf,
    /// Number of positive training vectors.
    #[arg(long, default_value_t = 1000)]
    pos: usize,
    /// Number of negative training vectors.
    #[arg(long, default_value_t = 10000)]
    neg: usize,
    /// Margin tradeoff of the SVM.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    pairs_per_identity: usize,
    #[arg(long, default_value = "cam_a")]
    query_camera: String,
    #[arg(long, default_value = "cam_b")]
    gallery_camera: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MatchArgs {
    #[arg(long)]
    models: PathBuf,
    #[arg(long)]
    metric: PathBuf,
    /// Weights JSON; required for the pamm strategy.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value = "pamm")]
    strategy: String,
    #[arg(long, default_value = "cam_a")]
    query_camera: String,
    #[arg(long, default_value = "cam_b")]
    gallery_camera: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV of query_id,gallery_id,cost rows.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// TOML run configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    tracks: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    calib: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    base_seed: Option<u64>,
    /// Comma-separated strategy list.
    #[arg(long, value_delimiter = ',')]
    strategies: Option<Vec<String>>,
    #[arg(long)]
    learner: Option<String>,
    #[arg(long)]
    pca_dim: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    conf_threshold: Option<f64>,
    #[arg(long)]
    speed_ref: Option<f64>,
    #[arg(long)]
    frame_rate: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    query_camera: Option<String>,
    #[arg(long)]
    gallery_camera: Option<String>,
    /// Fixed weights JSON instead of training.
    #[arg(long)]
    weights_file: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write rank,accuracy rows per strategy for plotting.
    #[arg(long)]
    emit_cmc_csv: Option<PathBuf>,
}

enum CliError {
    Input(String),
    Stage { stage: &'static str, message: String },
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Stage { .. } => 3,
        }
    }

    fn report(&self) {
        match self {
            CliError::Input(msg) => eprintln!("error: input: {msg}"),
            CliError::Stage { stage, message } => eprintln!("error: stage={stage}: {message}"),
        }
    }
}

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

fn stage<E: std::fmt::Display>(name: &'static str) -> impl Fn(E) -> CliError {
    move |e| CliError::Stage {
        stage: name,
        message: e.to_string(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    if let Some(jobs) = cli.jobs {
        // Ignore the error when a pool already exists (tests, repeated init).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let result = match cli.command {
        Command::SynthGen(args) => cmd_synth_gen(args),
        Command::EstimatePoses(args) => cmd_estimate_poses(args),
        Command::Filter(args) => cmd_filter(args),
        Command::BuildModels(args) => cmd_build_models(args),
        Command::TrainMetric(args) => cmd_train_metric(args),
        Command::TrainWeights(args) => cmd_train_weights(args),
        Command::Match(args) => cmd_match(args),
        Command::Evaluate(args) => cmd_evaluate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            e.report();
            ExitCode::from(e.code())
        }
    }
}

fn cmd_synth_gen(args: SynthGenArgs) -> Result<(), CliError> {
    let file_cfg = match &args.config {
        Some(path) => RunConfig::load(path).map_err(input)?,
        None => RunConfig::default(),
    };
    let s = &file_cfg.synth;
    let identities = args.identities.or(s.identities).unwrap_or(20);
    let seed = args.seed.or(s.seed).unwrap_or(0);
    let mut cfg = SceneConfig::new(identities, seed);
    if let Some(v) = args.duration.or(s.duration) {
        cfg.duration = v;
    }
    if let Some(v) = args.frame_rate.or(s.frame_rate) {
        cfg.frame_rate = v;
    }
    if let Some(v) = args.appearance_dim.or(s.appearance_dim) {
        cfg.appearance_dim = v;
    }
    if let Some(v) = args.pose_strength.or(s.pose_strength) {
        cfg.pose_appearance_strength = v;
    }
    if let Some(v) = args.occlusion_prob.or(s.occlusion_prob) {
        cfg.occlusion_probability = v;
    }
    if let Some(v) = args.noise_sigma.or(s.noise_sigma) {
        cfg.noise_sigma = v;
    }
    if let (Some(lo), Some(hi)) = (s.walk_speed_min, s.walk_speed_max) {
        cfg.walk_speed_range = (lo, hi);
    }
    let scene = generate_scene(&cfg).map_err(stage("synth-gen"))?;
    io::write_scene(&scene, &args.out_dir).map_err(stage("synth-gen"))?;
    println!(
        "wrote scene with {} identities, {} tracks to {}",
        identities,
        scene.dataset.tracks.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn load_tracks_and_cameras(
    tracks: &Path,
    calib: &Path,
) -> Result<(Vec<Track>, Vec<pamm_core::CameraModel>), CliError> {
    let tracks = io::load_tracks(tracks).map_err(input)?;
    let cameras = io::load_calibrations(calib).map_err(input)?;
    Ok((tracks, cameras))
}

fn camera_for<'c>(
    cameras: &'c [pamm_core::CameraModel],
    track: &Track,
) -> Result<&'c pamm_core::CameraModel, CliError> {
    cameras
        .iter()
        .find(|c| c.camera_id() == track.camera_id)
        .ok_or_else(|| CliError::Input(format!("no calibration for camera {}", track.camera_id)))
}

fn cmd_estimate_poses(args: EstimatePosesArgs) -> Result<(), CliError> {
    let (tracks, cameras) = load_tracks_and_cameras(&args.tracks, &args.calib)?;
    let mut posed = Vec::new();
    for track in &tracks {
        let camera = camera_for(&cameras, track)?;
        if track.len() < 2 {
            eprintln!(
                "warning: skipping track {}/{} with {} sample(s)",
                track.camera_id,
                track.object_id,
                track.len()
            );
            continue;
        }
        let t = compute_velocity(track, args.frame_rate).map_err(stage("estimate-poses"))?;
        let t = match estimate_track_angles(&t, camera) {
            Ok(t) => t,
            Err(e) => {
                eprintln!(
                    "warning: skipping track {}/{}: {e}",
                    track.camera_id, track.object_id
                );
                continue;
            }
        };
        let t = smooth_angles(&t, args.m).map_err(stage("estimate-poses"))?;
        posed.push(t);
    }
    io::save(&args.out, &io::tracks_to_csv_posed(&posed)).map_err(stage("estimate-poses"))?;
    println!("wrote {} posed tracks to {}", posed.len(), args.out.display());
    Ok(())
}

fn cmd_filter(args: FilterArgs) -> Result<(), CliError> {
    let (tracks, cameras) = load_tracks_and_cameras(&args.tracks, &args.calib)?;
    if tracks
        .iter()
        .all(|t| t.samples.iter().all(|s| s.smooth_angle.is_none()))
    {
        return Err(CliError::Input(format!(
            "{} carries no smooth_angle column; run estimate-poses first",
            args.tracks.display()
        )));
    }
    let frames = FrameIndex::build(&tracks);
    let mut kept_tracks = Vec::new();
    let mut reports: BTreeMap<FeatureKey, ConfidenceReport> = BTreeMap::new();
    for track in &tracks {
        let camera = camera_for(&cameras, track)?;
        if track.len() < 2 {
            continue;
        }
        let t = compute_velocity(track, args.frame_rate).map_err(stage("filter"))?;
        let camera_id = t.camera_id.clone();
        let (scored, track_reports) = score_track(&t, camera, args.speed_ref, |frame| {
            frames.samples(&camera_id, frame)
        });
        for (s, r) in scored.samples.iter().zip(&track_reports) {
            reports.insert((s.camera_id.clone(), s.object_id.clone(), s.frame), *r);
        }
        if args.keep_rejected {
            kept_tracks.push(scored);
            continue;
        }
        match filter_samples(&scored, args.conf_threshold) {
            Ok(filtered) => kept_tracks.push(filtered),
            Err(ConfidenceError::AllSamplesRejected(_)) => {
                eprintln!(
                    "warning: track {}/{} lost all samples at threshold {}",
                    track.camera_id, track.object_id, args.conf_threshold
                );
            }
            Err(e) => return Err(stage("filter")(e)),
        }
    }
    io::save(&args.out, &io::tracks_to_csv_scored(&kept_tracks, &reports))
        .map_err(stage("filter"))?;
    println!(
        "wrote {} filtered tracks to {}",
        kept_tracks.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_build_models(args: BuildModelsArgs) -> Result<(), CliError> {
    let tracks = io::load_tracks(&args.tracks).map_err(input)?;
    let features = match (&args.features, &args.patches) {
        (Some(path), None) => io::load_features(path).map_err(input)?,
        (None, Some(dir)) => {
            io::extract_patch_features(dir, &pamm_core::descriptor::BuiltinDescriptor)
                .map_err(input)?
        }
        _ => unreachable!("clap enforces exactly one feature source"),
    };
    let mut models = io::ModelMap::new();
    for track in &tracks {
        let model = build_multipose_model(track, &features).map_err(stage("build-models"))?;
        models.insert((track.camera_id.clone(), track.object_id.clone()), model);
    }
    io::save(&args.out, &io::models_to_json(&models)).map_err(stage("build-models"))?;
    println!("wrote {} models to {}", models.len(), args.out.display());
    Ok(())
}

fn shared_identities(models: &io::ModelMap, query: &str, gallery: &str) -> Vec<String> {
    let mut ids: Vec<String> = models
        .keys()
        .filter(|(cam, _)| cam == query)
        .filter(|(_, id)| models.contains_key(&(gallery.to_string(), id.clone())))
        .map(|(_, id)| id.clone())
        .collect();
    ids.sort();
    ids.dedup();
    ids
}

fn cmd_train_metric(args: TrainMetricArgs) -> Result<(), CliError> {
    let models = io::load_models(&args.models).map_err(input)?;
    let learner: LearnerId = args.learner.parse().map_err(input)?;
    let ids = shared_identities(&models, &args.query_camera, &args.gallery_camera);
    if ids.len() < 2 {
        return Err(CliError::Stage {
            stage: "train-metric",
            message: format!(
                "need identities in both {} and {}",
                args.query_camera, args.gallery_camera
            ),
        });
    }
    let pairs = metric_training_pairs(
        &models,
        &ids,
        &args.query_camera,
        &args.gallery_camera,
        args.pairs_per_identity,
        args.negative_ratio,
        args.seed,
    );
    let pca = (args.pca_dim > 0).then_some(args.pca_dim);
    let metric = learn_metric(&pairs, learner, pca, args.reg).map_err(stage("train-metric"))?;
    io::save(&args.out, &io::metric_to_json(&metric)).map_err(stage("train-metric"))?;
    println!(
        "learned {} metric on {} pairs (d={}, r={}) -> {}",
        learner,
        pairs.len(),
        metric.input_dim,
        metric.reduced_dim(),
        args.out.display()
    );
    Ok(())
}

fn cmd_train_weights(args: TrainWeightsArgs) -> Result<(), CliError> {
    let models = io::load_models(&args.pairs).map_err(input)?;
    let metric = io::load_metric(&args.metric).map_err(input)?;
    let ids = shared_identities(&models, &args.query_camera, &args.gallery_camera);
    if ids.len() < 2 {
        return Err(CliError::Stage {
            stage: "train-weights",
            message: "need identities in both cameras".to_string(),
        });
    }
    let pairs = posed_pairs(
        &models,
        &ids,
        &args.query_camera,
        &args.gallery_camera,
        args.pairs_per_identity,
        args.seed,
    );
    let dists = build_distance_distributions(&pairs, &metric).map_err(stage("train-weights"))?;
    let samples = sample_training_vectors(&dists, args.pos, args.neg, args.seed)
        .map_err(stage("train-weights"))?;
    let trained = train_weights(&samples, &SvmConfig::with_lambda(args.lambda))
        .map_err(stage("train-weights"))?;
    if trained.non_separable {
        eprintln!("note: training classes overlap; slack was used");
    }
    io::save(
        &args.out,
        &serde_json::to_string_pretty(&trained.weights).expect("weights serialize"),
    )
    .map_err(stage("train-weights"))?;
    println!(
        "trained weights (objective {:.4}) -> {}",
        trained.objective,
        args.out.display()
    );
    Ok(())
}

fn cmd_match(args: MatchArgs) -> Result<(), CliError> {
    let models = io::load_models(&args.models).map_err(input)?;
    let metric = io::load_metric(&args.metric).map_err(input)?;
    let strategy: Strategy = args.strategy.parse().map_err(input)?;
    let weights = match &args.weights {
        Some(path) => Some(io::load_weights(path).map_err(input)?),
        None => None,
    };
    let ids = shared_identities(&models, &args.query_camera, &args.gallery_camera);
    if ids.is_empty() {
        return Err(CliError::Stage {
            stage: "match",
            message: "no identity appears in both cameras".to_string(),
        });
    }
    let mut out = String::from("query_id,gallery_id,cost\n");
    for (qi, qid) in ids.iter().enumerate() {
        let q = &models[&(args.query_camera.clone(), qid.clone())];
        for (gi, gid) in ids.iter().enumerate() {
            let g = &models[&(args.gallery_camera.clone(), gid.clone())];
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(&[args.seed, qi as u64, gi as u64]));
            let cost = if strategy == Strategy::Pamm {
                let w = weights
                    .as_ref()
                    .ok_or_else(|| CliError::Input("pamm strategy needs --weights".into()))?;
                let table = pairwise_distances(q, g, &metric).map_err(stage("match"))?;
                pamm_cost_or_mean(&table, w).map_err(stage("match"))?
            } else {
                baseline_cost(q, g, &metric, strategy, &mut rng).map_err(stage("match"))?
            };
            out.push_str(&format!("{qid},{gid},{}\n", cost.cost));
        }
    }
    io::save(&args.out, &out).map_err(stage("match"))?;
    println!(
        "wrote {}x{} {} cost matrix to {}",
        ids.len(),
        ids.len(),
        strategy,
        args.out.display()
    );
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path).map_err(input)?,
        None => RunConfig::default(),
    };
    // Flags override the config file.
    if let Some(v) = args.trials {
        cfg.evaluate.trials = Some(v);
        cfg.evaluate.seeds = None;
    }
    if let Some(v) = args.base_seed {
        cfg.evaluate.base_seed = Some(v);
    }
    if let Some(v) = &args.strategies {
        cfg.evaluate.strategies = Some(v.clone());
    }
    if let Some(v) = &args.learner {
        cfg.metric.learner = Some(v.clone());
    }
    if let Some(v) = args.pca_dim {
        cfg.metric.pca_dim = Some(v);
    }
    if let Some(v) = args.conf_threshold {
        cfg.confidence.threshold = Some(v);
    }
    if let Some(v) = args.speed_ref {
        cfg.confidence.speed_ref = Some(v);
    }
    if let Some(v) = args.frame_rate {
        cfg.poses.frame_rate = Some(v);
    }
    if let Some(v) = args.m {
        cfg.poses.m = Some(v);
    }
    if let Some(v) = &args.query_camera {
        cfg.evaluate.query_camera = Some(v.clone());
    }
    if let Some(v) = &args.gallery_camera {
        cfg.evaluate.gallery_camera = Some(v.clone());
    }

    let tracks_path = args
        .tracks
        .or(cfg.dataset.tracks.clone())
        .ok_or_else(|| CliError::Input("no tracks file given (flag --tracks or [dataset] tracks)".into()))?;
    let features_path = args
        .features
        .or(cfg.dataset.features.clone())
        .ok_or_else(|| CliError::Input("no features file given".into()))?;
    let calib_path = args
        .calib
        .or(cfg.dataset.calibration.clone())
        .ok_or_else(|| CliError::Input("no calibration file given".into()))?;
    let dataset: Dataset =
        io::load_dataset(&tracks_path, &features_path, &calib_path).map_err(input)?;

    let eval_cfg = cfg
        .eval_config(args.weights_file.as_deref())
        .map_err(input)?;
    let report = run_evaluation(&dataset, &eval_cfg).map_err(stage("evaluate"))?;

    let out_path = args
        .out
        .or(cfg.evaluate.out.clone())
        .unwrap_or_else(|| PathBuf::from("results.json"));
    io::save(&out_path, &report.to_json()).map_err(stage("evaluate"))?;
    if let Some(csv_path) = args.emit_cmc_csv.or(cfg.evaluate.emit_cmc_csv.clone()) {
        io::save(&csv_path, &report.to_cmc_csv()).map_err(stage("evaluate"))?;
    }
    for r in &report.results {
        println!(
            "{:<14} rank-1 {:.3}  rank-5 {:.3}  auc {:.3}",
            r.strategy,
            r.mean_accuracy.first().copied().unwrap_or(0.0),
            r.mean_accuracy.get(4).copied().unwrap_or(1.0),
            r.auc
        );
    }
    println!("wrote results to {}", out_path.display());
    Ok(())
}
