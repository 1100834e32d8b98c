#!/usr/bin/env python3
"""Smoke test for the pamm Python extension.

Builds nothing itself: it locates the compiled cdylib under target/, copies
it next to a temp directory as an importable module, and exercises the main
types and operations end to end.

Usage:
    cargo build -p pamm-python          # or --release
    python3 python/smoke_test.py
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def import_pamm():
    candidates = [
        ROOT / "target" / "release" / "libpamm.so",
        ROOT / "target" / "debug" / "libpamm.so",
    ]
    built = [p for p in candidates if p.exists()]
    if not built:
        sys.exit("libpamm.so not found; run `cargo build -p pamm-python` first")
    newest = max(built, key=lambda p: p.stat().st_mtime)
    stage = Path(tempfile.mkdtemp(prefix="pamm_py_"))
    shutil.copy(newest, stage / "pamm.so")
    sys.path.insert(0, str(stage))
    import pamm

    return pamm


def check(name, cond, detail=""):
    if not cond:
        sys.exit(f"[FAIL] {name} {detail}")
    print(f"[PASS] {name}" + (f": {detail}" if detail else ""))


def main():
    pamm = import_pamm()

    # Camera: projection round trip through the ground plane.
    cam = pamm.Camera.look_at("cam", 420.0, 352.0, 288.0, [0.0, -12.0, 5.0], [0.0, 0.0, 0.0])
    u, v = cam.project([1.5, 2.0, 0.0])
    x, y, z = cam.back_project_to_ground((u, v))
    check(
        "camera ground round trip",
        abs(x - 1.5) < 1e-6 and abs(y - 2.0) < 1e-6 and z == 0.0,
        f"(1.5, 2.0) -> ({u:.1f}, {v:.1f}) -> ({x:.6f}, {y:.6f})",
    )

    # Pose bins and polar smoothing across the wraparound.
    check("pose bins", pamm.assign_pose_group(350.0) == "front" and pamm.assign_pose_group(45.0) == "right")
    smoothed = pamm.smooth_angles([359.0, 1.0] * 10, half_width=2)
    worst = max(min(abs(a), 360 - abs(a)) for a in smoothed)
    check("polar smoothing", worst < 1.0, f"wraparound sequence stays near 0 (worst {worst:.3f} deg)")
    check("angle variation", abs(pamm.angle_variation(359.0, 1.0) - 2.0) < 1e-12)

    # Confidence factors.
    check(
        "confidence zeros",
        pamm.sample_confidence(10.0, 0.0, 0.2) == 0.0 and pamm.sample_confidence(10.0, 2.0, 1.0) == 0.0,
    )
    conf = pamm.sample_confidence(2.0, 1.4, 0.05)
    check("confidence range", 0.0 < conf < 1.0, f"walking sample scores {conf:.3f}")

    # Metric learning: distances shrink along the direction the positives vary.
    import random

    rng = random.Random(7)
    pairs = []
    for _ in range(300):
        base = [rng.uniform(-3, 3) for _ in range(4)]
        jitter = [base[0] + rng.gauss(0, 2.0), base[1] + rng.gauss(0, 0.05), base[2], base[3]]
        pairs.append((base, jitter, True))
        other = [rng.uniform(-3, 3) for _ in range(4)]
        pairs.append((base, other, False))
    metric = pamm.Metric.learn(pairs, learner="kissme", pca_dim=None)
    noisy_dir = metric.distance([0.0] * 4, [1.0, 0.0, 0.0, 0.0])
    tight_dir = metric.distance([0.0] * 4, [0.0, 1.0, 0.0, 0.0])
    check(
        "kissme downweights noisy directions",
        noisy_dir < tight_dir,
        f"unit step costs {noisy_dir:.3f} (noisy) vs {tight_dir:.3f} (tight)",
    )
    check("metric identity", metric.distance([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0]) == 0.0)

    # Matching: uniform-weight PaMM equals FullMatch-avg.
    euclid = pamm.Metric.euclidean(3)
    model_a = {"front": [[0.0, 0.0, 1.0], [0.1, 0.0, 0.9]], "left": [[0.5, 0.5, 0.0]]}
    model_b = {"front": [[0.0, 0.1, 1.0]], "back": [[1.0, 0.0, 0.0]]}
    uniform = {k: 1.0 for k in ["ff", "rr", "bb", "ll", "fr", "fb", "fl", "rb", "rl", "bl"]}
    weighted = pamm.match_cost(model_a, model_b, euclid, strategy="pamm", weights=uniform)
    plain = pamm.match_cost(model_a, model_b, euclid, strategy="fullmatch-avg")
    check("uniform PaMM == FullMatch-avg", abs(weighted - plain) < 1e-12, f"cost {weighted:.6f}")
    single = pamm.match_cost(model_a, model_b, euclid, strategy="single", seed=3)
    check("single match runs", math.isfinite(single))

    # End to end: tiny synthetic scene through the evaluation loop.
    scene_dir = Path(tempfile.mkdtemp(prefix="pamm_scene_"))
    n_tracks = pamm.generate_scene_files(scene_dir, identities=16, seed=5, duration=140)
    check("scene generation", (scene_dir / "tracks.csv").exists(), f"{n_tracks} tracks")
    results = pamm.evaluate_scene(
        scene_dir,
        strategies=["SingleMatch", "FullMatch-avg", "PaMM"],
        trials=2,
        pca_dim=16,
    )
    names = [r["strategy"] for r in results]
    check("evaluation strategies", names == ["SingleMatch", "FullMatch-avg", "PaMM"], ", ".join(names))
    for r in results:
        ok = 0.0 <= r["auc"] <= 1.0 and len(r["mean_accuracy"]) == len(r["ranks"])
        check(f"evaluation result {r['strategy']}", ok, f"rank-1 {r['mean_accuracy'][0]:.3f} auc {r['auc']:.3f}")
    multi = [r for r in results if r["strategy"] != "SingleMatch"]
    single_auc = next(r["auc"] for r in results if r["strategy"] == "SingleMatch")
    check(
        "multi-shot beats single-shot",
        all(r["auc"] >= single_auc for r in multi),
        f"single auc {single_auc:.3f}",
    )

    json.dumps(results)  # results are plain JSON data
    print("smoke test passed")


if __name__ == "__main__":
    main()
