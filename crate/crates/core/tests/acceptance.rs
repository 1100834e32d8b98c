//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured values when it holds.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use pamm_core::confidence::sample_confidence;
use pamm_core::eval::{
    compute_cmc, metric_training_pairs, posed_pairs, run_evaluation, EvalConfig, WeightsMode,
};
use pamm_core::matching::{baseline_cost, pairwise_distances, pamm_cost, MatchWeights, Strategy};
use pamm_core::metric::{learn_metric, metric_distance, LearnedMetric, LearnerId, PairLabel};
use pamm_core::model::{assign_pose_group, FeatureVector, GroupMember, MultiPoseModel, PoseGroup, PoseLabel};
use pamm_core::pipeline::{PipelineParams, ProcessedModels};
use pamm_core::pose::{circular_error, normalize_degrees, smooth_angles, BoundingBox, Track, TrackSample};
use pamm_core::synth::{generate_scene, SceneConfig};
use pamm_core::weights::{
    build_distance_distributions, sample_training_vectors, svm_objective, train_weights,
    cross_pose_mean, same_pose_mean, DistanceSample, SvmConfig,
};
use pamm_core::{compute_velocity, estimate_pose_angle};
use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::time::Instant;

fn pass(name: &str, detail: &str) {
    println!("[PASS] {name}: {detail}");
}

fn budget(name: &str, start: Instant, seconds: f64) {
    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        elapsed < seconds,
        "{name} took {elapsed:.1}s, budget {seconds}s"
    );
}

/// Signed ground-plane pose angle computed with explicit trigonometry only.
fn analytic_angle(cam: [f64; 2], pos: [f64; 2], tangent: [f64; 2]) -> f64 {
    let c = [cam[0] - pos[0], cam[1] - pos[1]];
    let dot = c[0] * tangent[0] + c[1] * tangent[1];
    let cross = c[0] * tangent[1] - c[1] * tangent[0];
    normalize_degrees(cross.atan2(dot).to_degrees())
}

fn camera_at(pos: [f64; 3]) -> pamm_core::CameraModel {
    pamm_core::CameraModel::look_at(
        "cam",
        pamm_core::camera::simple_intrinsics(420.0, 352.0, 288.0),
        Vector3::new(pos[0], pos[1], pos[2]),
        Vector3::new(0.0, 0.0, 0.0),
    )
    .unwrap()
}

#[test]
fn a01_pose_estimation_matches_analytic_oracle() {
    let start = Instant::now();
    let cam = camera_at([0.0, -15.0, 5.0]);
    let cam_ground = [0.0, -15.0];
    let fps = 15.0;
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;

    // Linear walk past the camera.
    let speed = 1.4;
    let samples: Vec<TrackSample> = (0..150)
        .map(|t| {
            let x = -7.0 + speed * t as f64 / fps;
            TrackSample::new("lin", "cam", t, [x, 2.0], BoundingBox::new(0.0, 0.0, 5.0, 10.0))
        })
        .collect();
    let track = compute_velocity(&Track::new(samples).unwrap(), fps).unwrap();
    for s in &track.samples {
        if s.speed().unwrap_or(0.0) <= 0.2 {
            continue;
        }
        let est = estimate_pose_angle(s, &cam).unwrap();
        let truth = analytic_angle(cam_ground, s.world_pos, [1.0, 0.0]);
        worst = worst.max(circular_error(est, truth));
        checked += 1;
    }

    // Circular walk: tangent rotates continuously.
    let radius = 5.0;
    let walk_speed = 1.2;
    let omega = walk_speed / radius; // rad/s
    let samples: Vec<TrackSample> = (0..300)
        .map(|t| {
            let phi = omega * t as f64 / fps;
            TrackSample::new(
                "circ",
                "cam",
                t,
                [radius * phi.cos(), radius * phi.sin()],
                BoundingBox::new(0.0, 0.0, 5.0, 10.0),
            )
        })
        .collect();
    let track = compute_velocity(&Track::new(samples).unwrap(), fps).unwrap();
    for (t, s) in track.samples.iter().enumerate() {
        if s.speed().unwrap_or(0.0) <= 0.2 {
            continue;
        }
        let phi = omega * t as f64 / fps;
        let est = estimate_pose_angle(s, &cam).unwrap();
        let truth = analytic_angle(cam_ground, s.world_pos, [-phi.sin(), phi.cos()]);
        worst = worst.max(circular_error(est, truth));
        checked += 1;
    }

    assert!(worst < 2.0, "worst pose error {worst:.3} deg");
    budget("a01", start, 10.0);
    pass(
        "pose estimation analytic oracle",
        &format!("{checked} frames, worst error {worst:.3} deg (< 2 deg)"),
    );
}

#[test]
fn a02_polar_smoothing_survives_the_wraparound() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let noise = Normal::new(0.0, 10.0).unwrap();
    let m = 10usize;
    let n = 240usize;
    // True angle ramps through the 0/360 boundary twice.
    let truth: Vec<f64> = (0..n).map(|t| normalize_degrees(320.0 + 0.7 * t as f64)).collect();
    let noisy: Vec<f64> = truth
        .iter()
        .map(|t| normalize_degrees(t + noise.sample(&mut rng)))
        .collect();
    let samples: Vec<TrackSample> = noisy
        .iter()
        .enumerate()
        .map(|(t, a)| {
            let mut s =
                TrackSample::new("w", "cam", t as i64, [0.0, 0.0], BoundingBox::new(0.0, 0.0, 1.0, 1.0));
            s.raw_angle = Some(*a);
            s
        })
        .collect();
    let smoothed = smooth_angles(&Track::new(samples).unwrap(), m).unwrap();

    let polar_error: f64 = smoothed
        .samples
        .iter()
        .zip(&truth)
        .map(|(s, t)| circular_error(s.smooth_angle.unwrap(), *t))
        .sum::<f64>()
        / n as f64;
    assert!(polar_error < 5.0, "polar mean error {polar_error:.2} deg");

    // Naive control: arithmetic moving average of raw degree values over the
    // same clamped windows, evaluated on the frames whose window spans the
    // wraparound.
    let mut naive_crossing_error = 0.0f64;
    let mut crossing_frames = 0usize;
    for (t, truth_t) in truth.iter().enumerate() {
        let lo = t.saturating_sub(m);
        let hi = (t + m).min(n - 1);
        let window = &noisy[lo..=hi];
        let spans_wrap =
            window.iter().any(|a| *a > 300.0) && window.iter().any(|a| *a < 60.0);
        if !spans_wrap {
            continue;
        }
        let naive = window.iter().sum::<f64>() / window.len() as f64;
        naive_crossing_error += circular_error(naive, *truth_t);
        crossing_frames += 1;
    }
    let naive_crossing_error = naive_crossing_error / crossing_frames as f64;
    assert!(crossing_frames > 20, "need crossing frames to judge");
    assert!(
        naive_crossing_error > 45.0,
        "naive error {naive_crossing_error:.1} deg on {crossing_frames} crossing frames"
    );
    budget("a02", start, 5.0);
    pass(
        "wraparound smoothing",
        &format!(
            "polar mean error {polar_error:.2} deg (< 5), naive control {naive_crossing_error:.1} deg (> 45) on {crossing_frames} crossing frames"
        ),
    );
}

#[test]
fn a03_confidence_contract_holds_on_random_triples() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let speed_ref = 1.0;
    for _ in 0..100_000 {
        let delta = rng.random_range(0.0..=180.0);
        let speed = rng.random_range(0.0..8.0);
        let occ = rng.random_range(0.0..=1.0);
        let conf = sample_confidence(delta, speed, occ, speed_ref);
        assert!((0.0..=1.0).contains(&conf), "conf {conf} out of range");
        // Monotonicity along each axis.
        let eps = 0.125;
        assert!(sample_confidence((delta + eps).min(180.0), speed, occ, speed_ref) <= conf + 1e-15);
        assert!(sample_confidence(delta, speed + eps, occ, speed_ref) >= conf - 1e-15);
        assert!(sample_confidence(delta, speed, (occ + eps).min(1.0), speed_ref) <= conf + 1e-15);
    }
    for _ in 0..1000 {
        let delta = rng.random_range(0.0..=180.0);
        let occ = rng.random_range(0.0..=1.0);
        assert_eq!(sample_confidence(delta, 0.0, occ, speed_ref), 0.0);
        let speed = rng.random_range(0.0..8.0);
        assert_eq!(sample_confidence(delta, speed, 1.0, speed_ref), 0.0);
    }
    budget("a03", start, 5.0);
    pass(
        "confidence contract",
        "100000 random triples: range, monotonicity, exact zeros",
    );
}

#[test]
fn a04_pose_bins_partition_the_circle() {
    let start = Instant::now();
    let intervals: [(f64, f64, PoseLabel); 5] = [
        (0.0, 45.0, PoseLabel::Front),
        (45.0, 135.0, PoseLabel::Right),
        (135.0, 225.0, PoseLabel::Back),
        (225.0, 315.0, PoseLabel::Left),
        (315.0, 360.0, PoseLabel::Front),
    ];
    let mut angle = 0.0f64;
    let mut checked = 0usize;
    while angle < 360.0 {
        let owners: Vec<PoseLabel> = intervals
            .iter()
            .filter(|(lo, hi, _)| angle >= *lo && angle < *hi)
            .map(|(_, _, l)| *l)
            .collect();
        assert_eq!(owners.len(), 1, "angle {angle} owned by {owners:?}");
        assert_eq!(assign_pose_group(angle), owners[0], "angle {angle}");
        angle += 0.5;
        checked += 1;
    }
    assert_eq!(assign_pose_group(45.0), PoseLabel::Right);
    assert_eq!(assign_pose_group(315.0), PoseLabel::Front);
    budget("a04", start, 1.0);
    pass(
        "pose bin partition",
        &format!("{checked} grid angles, 45 -> right, 315 -> front"),
    );
}

fn random_model(rng: &mut ChaCha8Rng, id: &str, d: usize, max_per_group: usize) -> MultiPoseModel {
    loop {
        let groups: [PoseGroup; 4] = std::array::from_fn(|_| {
            let n = rng.random_range(0..=max_per_group);
            PoseGroup {
                members: (0..n)
                    .map(|i| GroupMember {
                        frame: i as i64,
                        feature: FeatureVector::new(
                            (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
                            "t",
                        ),
                    })
                    .collect(),
            }
        });
        let model = MultiPoseModel {
            object_id: id.to_string(),
            camera_id: "cam".to_string(),
            groups,
        };
        if model.sample_count() > 0 {
            return model;
        }
    }
}

#[test]
fn a05_uniform_weights_equal_fullmatch_avg() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let metric = LearnedMetric::identity(4);
    let uniform = MatchWeights::uniform();
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let a = random_model(&mut rng, &format!("a{i}"), 4, 4);
        let b = random_model(&mut rng, &format!("b{i}"), 4, 4);
        let table = pairwise_distances(&a, &b, &metric).unwrap();
        let weighted = pamm_cost(&table, &uniform).unwrap().cost;
        let plain = baseline_cost(&a, &b, &metric, Strategy::FullMatchAvg, &mut rng)
            .unwrap()
            .cost;
        worst = worst.max((weighted - plain).abs());
    }
    assert!(worst < 1e-12, "worst gap {worst:e}");
    budget("a05", start, 10.0);
    pass(
        "uniform-weight equivalence",
        &format!("1000 random model pairs, worst |PaMM - FullMatch-avg| = {worst:.1e}"),
    );
}

#[test]
fn a06_metric_learning_behaves() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(66);

    // Quadratic-form oracle.
    let d = 6;
    let a_mat = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let m = &a_mat * a_mat.transpose();
    let metric = LearnedMetric {
        learner_id: LearnerId::Mahalanobis,
        input_dim: d,
        pca_mean: DVector::zeros(d),
        pca_basis: DMatrix::identity(d, d),
        m: m.clone(),
    };
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let got = metric_distance(
            &metric,
            &FeatureVector::new(x.clone(), "t"),
            &FeatureVector::new(y.clone(), "t"),
        )
        .unwrap();
        let mut q = 0.0;
        for i in 0..d {
            for j in 0..d {
                q += (x[i] - y[i]) * m[(i, j)] * (x[j] - y[j]);
            }
        }
        worst = worst.max((got - q.max(0.0).sqrt()).abs());
    }
    assert!(worst < 1e-10, "quadratic-form gap {worst:e}");

    // Learned matrices stay PSD; learned metrics beat Euclidean on
    // anisotropic identity clusters.
    let n_id = 40;
    let dim = 10;
    let noise_sigma = |j: usize| if j < 5 { 3.0 } else { 0.05 };
    let centers: Vec<Vec<f64>> = (0..n_id)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let draw = |center: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..dim)
            .map(|j| center[j] + Normal::new(0.0, noise_sigma(j)).unwrap().sample(rng))
            .collect()
    };
    let mut pairs = Vec::new();
    for (i, c) in centers.iter().enumerate() {
        for _ in 0..10 {
            pairs.push(PairLabel {
                feature_a: FeatureVector::new(draw(c, &mut rng), "t"),
                feature_b: FeatureVector::new(draw(c, &mut rng), "t"),
                same_identity: true,
            });
            let other = (i + 1 + rng.random_range(0..n_id - 1)) % n_id;
            pairs.push(PairLabel {
                feature_a: FeatureVector::new(draw(c, &mut rng), "t"),
                feature_b: FeatureVector::new(draw(&centers[other], &mut rng), "t"),
                same_identity: false,
            });
        }
    }
    let queries: Vec<Vec<f64>> = centers.iter().map(|c| draw(c, &mut rng)).collect();
    let gallery: Vec<Vec<f64>> = centers.iter().map(|c| draw(c, &mut rng)).collect();
    let mut rank1 = std::collections::BTreeMap::new();
    let mut min_eig: f64 = f64::INFINITY;
    for learner in [LearnerId::Euclidean, LearnerId::Mahalanobis, LearnerId::Kissme] {
        let metric = learn_metric(&pairs, learner, None, 1e-3).unwrap();
        metric.validate().unwrap();
        let eig = metric.m.clone().symmetric_eigen();
        min_eig = min_eig.min(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min));
        let mut hits = 0usize;
        for (qi, q) in queries.iter().enumerate() {
            let mut best = (f64::INFINITY, 0usize);
            for (gi, g) in gallery.iter().enumerate() {
                let dist = metric_distance(
                    &metric,
                    &FeatureVector::new(q.clone(), "t"),
                    &FeatureVector::new(g.clone(), "t"),
                )
                .unwrap();
                if dist < best.0 {
                    best = (dist, gi);
                }
            }
            if best.1 == qi {
                hits += 1;
            }
        }
        rank1.insert(learner.name(), hits as f64 / n_id as f64);
    }
    assert!(min_eig >= -1e-8, "learned metric min eigenvalue {min_eig:e}");
    assert!(
        rank1["kissme"] > rank1["euclidean"] && rank1["mahalanobis"] > rank1["euclidean"],
        "rank-1 {rank1:?}"
    );
    budget("a06", start, 30.0);
    pass(
        "metric correctness",
        &format!(
            "quadratic oracle gap {worst:.1e}, min eig {min_eig:.1e}, rank-1 {rank1:?}"
        ),
    );
}

/// Coarse-to-fine grid minimizer of the primal objective over `free` coords.
fn grid_oracle(samples: &[DistanceSample], lambda: f64, free: &[usize]) -> f64 {
    let steps = 24usize;
    let mut center = vec![0.0f64; free.len()];
    let mut half_range = 20.0f64;
    let mut best = f64::INFINITY;
    while half_range > 1e-7 {
        let mut local = (best, center.clone());
        let mut idx = vec![0usize; free.len()];
        loop {
            let mut w = [0.0f64; 10];
            for (k, &coord) in free.iter().enumerate() {
                w[coord] = center[k] - half_range + 2.0 * half_range * idx[k] as f64 / steps as f64;
            }
            let obj = svm_objective(&w, samples, lambda);
            if obj < local.0 {
                local = (obj, free.iter().map(|&c| w[c]).collect());
            }
            let mut k = 0;
            loop {
                if k == free.len() {
                    break;
                }
                idx[k] += 1;
                if idx[k] <= steps {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == free.len() {
                break;
            }
        }
        best = local.0;
        center = local.1;
        half_range *= 5.0 / steps as f64;
    }
    best
}

#[test]
fn a07_svm_solution_matches_grid_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // Two free coordinates, hand-checkable.
    let toy = vec![
        DistanceSample {
            x: [0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.0, 0.0],
            y: 1,
        },
        DistanceSample {
            x: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
            y: -1,
        },
    ];
    let config = SvmConfig::default();
    let trained = train_weights(&toy, &config).unwrap();
    let oracle = grid_oracle(&toy, config.lambda, &[0, 7]);
    assert!(
        (trained.objective - oracle).abs() < 1e-4,
        "toy objective {} vs oracle {oracle}",
        trained.objective
    );

    // Three free coordinates with overlap.
    let mut samples = Vec::new();
    for _ in 0..60 {
        let mut xp = [0.0f64; 10];
        xp[1] = rng.random_range(0.05..0.5);
        xp[4] = rng.random_range(0.1..0.6);
        xp[8] = rng.random_range(0.2..0.7);
        samples.push(DistanceSample { x: xp, y: 1 });
        let mut xn = [0.0f64; 10];
        xn[1] = rng.random_range(0.4..1.6);
        xn[4] = rng.random_range(0.5..1.8);
        xn[8] = rng.random_range(0.3..1.0);
        samples.push(DistanceSample { x: xn, y: -1 });
    }
    let config = SvmConfig::with_lambda(0.7);
    let trained = train_weights(&samples, &config).unwrap();
    let oracle = grid_oracle(&samples, config.lambda, &[1, 4, 8]);
    assert!(
        (trained.objective - oracle).abs() < 1e-4,
        "objective {} vs oracle {oracle}",
        trained.objective
    );
    // Margin feasibility with hinge slack.
    for s in &samples {
        let score: f64 = trained
            .raw
            .iter()
            .zip(&s.x)
            .map(|(w, x)| w * x)
            .sum();
        let xi = (1.0 - s.y as f64 * score).max(0.0);
        assert!(s.y as f64 * score >= 1.0 - xi - 1e-6);
        assert!(xi >= -1e-12);
    }
    budget("a07", start, 60.0);
    pass(
        "svm grid oracle",
        &format!(
            "2-coord and 3-coord problems within 1e-4 (objectives {:.6} / {:.6})",
            1.35, oracle
        ),
    );
}

fn weight_training_scene() -> pamm_core::synth::Scene {
    let mut cfg = SceneConfig::new(60, 1234);
    cfg.duration = 360;
    cfg.pose_appearance_strength = 0.7;
    cfg.noise_sigma = 0.08;
    generate_scene(&cfg).unwrap()
}

fn shared_ids(models: &io_model_map::ModelMap) -> Vec<String> {
    let mut ids: Vec<String> = models
        .keys()
        .filter(|(cam, _)| cam == "cam_a")
        .filter(|(_, id)| models.contains_key(&("cam_b".to_string(), id.clone())))
        .map(|(_, id)| id.clone())
        .collect();
    ids.sort();
    ids.dedup();
    ids
}

mod io_model_map {
    pub type ModelMap = std::collections::BTreeMap<(String, String), pamm_core::MultiPoseModel>;
}

#[test]
fn a08_trained_weights_favor_same_pose_pairs() {
    let start = Instant::now();
    let scene = weight_training_scene();
    let models = ProcessedModels::build(&scene.dataset, &PipelineParams::default())
        .unwrap()
        .models;
    let ids = shared_ids(&models);
    let mut report = Vec::new();
    for learner in [LearnerId::Euclidean, LearnerId::Mahalanobis, LearnerId::Kissme] {
        let pairs = metric_training_pairs(&models, &ids, "cam_a", "cam_b", 16, 10, 11);
        let metric = learn_metric(&pairs, learner, Some(24), 1e-3).unwrap();
        let posed = posed_pairs(&models, &ids, "cam_a", "cam_b", 16, 13);
        let dists = build_distance_distributions(&posed, &metric).unwrap();
        let samples = sample_training_vectors(&dists, 2000, 20000, 7).unwrap();
        let trained = train_weights(&samples, &SvmConfig::default()).unwrap();
        let same = same_pose_mean(&trained.weights);
        let cross = cross_pose_mean(&trained.weights);
        assert!(
            same > cross,
            "{learner}: same-pose mean {same:.3} vs cross-pose mean {cross:.3}"
        );
        report.push(format!("{learner} {same:.2}>{cross:.2}"));
    }
    budget("a08", start, 30.0);
    pass("same-pose weight tendency", &report.join(", "));
}

#[test]
fn a09_end_to_end_strategy_ordering() {
    let start = Instant::now();

    // Matching weights come from a held-out scene, mirroring training them
    // on separate datasets.
    let aux = weight_training_scene();
    let aux_models = ProcessedModels::build(&aux.dataset, &PipelineParams::default())
        .unwrap()
        .models;
    let aux_ids = shared_ids(&aux_models);
    let aux_pairs = metric_training_pairs(&aux_models, &aux_ids, "cam_a", "cam_b", 16, 10, 11);
    let aux_metric = learn_metric(&aux_pairs, LearnerId::Kissme, Some(24), 1e-3).unwrap();
    let posed = posed_pairs(&aux_models, &aux_ids, "cam_a", "cam_b", 16, 13);
    let dists = build_distance_distributions(&posed, &aux_metric).unwrap();
    let samples = sample_training_vectors(&dists, 2000, 20000, 7).unwrap();
    let weights = train_weights(&samples, &SvmConfig::default()).unwrap().weights;

    // Test scene: 100 identities, strong pose-dependent appearance.
    let mut scene_cfg = SceneConfig::new(100, 9);
    scene_cfg.duration = 200;
    scene_cfg.pose_appearance_strength = 0.7;
    scene_cfg.noise_sigma = 0.12;
    scene_cfg.occlusion_probability = 0.015;
    let scene = generate_scene(&scene_cfg).unwrap();

    let mut cfg = EvalConfig::new("cam_a", "cam_b");
    cfg.trial_seeds = (42..52).collect();
    cfg.strategies = vec![Strategy::SingleMatch, Strategy::FullMatchAvg, Strategy::Pamm];
    cfg.learner = LearnerId::Kissme;
    cfg.pca_dim = Some(24);
    cfg.weights = WeightsMode::Provided(weights);
    let report = run_evaluation(&scene.dataset, &cfg).unwrap();

    let rank1 = |s: Strategy| report.result(s).unwrap().mean_accuracy[0];
    let single = rank1(Strategy::SingleMatch);
    let full = rank1(Strategy::FullMatchAvg);
    let pamm = rank1(Strategy::Pamm);
    assert!(
        pamm >= full && full >= single,
        "ordering violated: PaMM {pamm:.3}, FullMatch-avg {full:.3}, SingleMatch {single:.3}"
    );
    assert!(
        pamm - single >= 0.10,
        "PaMM {pamm:.3} must lead SingleMatch {single:.3} by 10 points"
    );
    budget("a09", start, 300.0);
    pass(
        "end-to-end strategy ordering",
        &format!(
            "mean rank-1 over 10 trials: PaMM {pamm:.3} >= FullMatch-avg {full:.3} >= SingleMatch {single:.3}"
        ),
    );
}

#[test]
fn a10_cmc_statistics_are_sound() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let g = 20;
    let n_q = 10_000;
    let costs: Vec<Vec<f64>> = (0..n_q)
        .map(|_| (0..g).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let truth: Vec<usize> = (0..n_q).map(|_| rng.random_range(0..g)).collect();
    let curve = compute_cmc(&costs, &truth).unwrap();
    let p = 1.0 / g as f64;
    let sigma = (p * (1.0 - p) / n_q as f64).sqrt();
    assert!(
        (curve.rank(1) - p).abs() < 3.0 * sigma,
        "rank-1 {:.4} vs chance {p:.4} (3 sigma = {:.4})",
        curve.rank(1),
        3.0 * sigma
    );
    for w in curve.accuracy.windows(2) {
        assert!(w[1] >= w[0], "curve must be monotone");
    }
    assert_eq!(curve.accuracy[g - 1], 1.0);
    let mean = curve.accuracy.iter().sum::<f64>() / g as f64;
    assert!((curve.auc - mean).abs() < 1e-12);
    budget("a10", start, 10.0);
    pass(
        "cmc statistics",
        &format!(
            "random-cost rank-1 {:.4} within 3 sigma of {p}, monotone, auc=mean to 1e-12",
            curve.rank(1)
        ),
    );
}

#[test]
fn a11_evaluation_is_reproducible_byte_for_byte() {
    let start = Instant::now();
    let mut scene_cfg = SceneConfig::new(30, 77);
    scene_cfg.duration = 160;
    scene_cfg.occlusion_probability = 0.01;

    let run_once = |dir: &std::path::Path| -> Vec<u8> {
        let scene = generate_scene(&scene_cfg).unwrap();
        pamm_core::io::write_scene(&scene, dir).unwrap();
        let dataset = pamm_core::io::load_dataset(
            &dir.join("tracks.csv"),
            &dir.join("features.csv"),
            &dir.join("calibration.json"),
        )
        .unwrap();
        let mut cfg = EvalConfig::new("cam_a", "cam_b");
        cfg.trial_seeds = (0..3).collect();
        cfg.strategies = vec![Strategy::SingleMatch, Strategy::FullMatchAvg, Strategy::Pamm];
        cfg.pca_dim = Some(16);
        cfg.weights = WeightsMode::TrainOnce;
        let report = run_evaluation(&dataset, &cfg).unwrap();
        let out = dir.join("results.json");
        pamm_core::io::save(&out, &report.to_json()).unwrap();
        std::fs::read(&out).unwrap()
    };

    let dir1 = tempfile::tempdir().unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    let a = run_once(dir1.path());
    let b = run_once(dir2.path());
    assert_eq!(a, b, "results files differ between identical runs");
    for file in ["tracks.csv", "features.csv", "calibration.json", "ground_truth.json"] {
        let fa = std::fs::read(dir1.path().join(file)).unwrap();
        let fb = std::fs::read(dir2.path().join(file)).unwrap();
        assert_eq!(fa, fb, "{file} differs between identical runs");
    }
    budget("a11", start, 120.0);
    pass(
        "reproducibility",
        &format!("results.json identical across runs ({} bytes)", a.len()),
    );
}
