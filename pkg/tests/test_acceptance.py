"""Acceptance gate: one test per criterion, each printing its own pass line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines and timings.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from mpad.cli import main
from mpad.core import (
    Embedding,
    LandmarkSet,
    MANIFEST_COLUMNS,
    RasterImage,
    load_landmarks,
    load_manifest,
    load_score_file,
    save_embedding,
    save_landmarks,
)
from mpad.features import FeatureVector, lbp_grid_features
from mpad.geometry import AlignedFace
from mpad.metrics import bpcer_at_apcer, d_eer, riapar, threshold_at_fmr
from mpad.ppm import write_ppm
from mpad.svm import decision_value, train
from mpad.synth import (
    boundary_points,
    delaunay_mesh,
    piecewise_affine_map,
    quality_gate,
    warp_to_target,
)

from conftest import face_landmarks, render_flat_face, render_smooth_image
from oracles import (
    oracle_bpcer_at_apcer,
    oracle_d_eer,
    oracle_decision_function,
    oracle_threshold_at_fmr,
    qp_dual_oracle,
)

HEADER = ",".join(MANIFEST_COLUMNS)

# held-out D-EER of the first run of criterion 6, pinned thereafter (+-1%)
PINNED_END_TO_END_DEER = 0.0


def gate(name: str, passed: bool, detail: str = ""):
    line = f"[{'PASS' if passed else 'FAIL'}] {name}"
    if detail:
        line += f" :: {detail}"
    print(line)
    assert passed, line


def test_criterion_1_riapar_reproduces_vulnerability_table():
    # (FNMR, IAPMR) -> RIAPAR rows, all in percent, tolerance 1e-3
    rows = [
        (6.274, 0.000, 6.274),
        (0.083, 2.103, 2.186),
        (0.028, 6.308, 6.336),
        (0.028, 17.056, 17.084),
    ]
    worst = 0.0
    for fnmr_pct, iapmr_pct, expected_pct in rows:
        got = riapar(iapmr_pct / 100.0, fnmr_pct / 100.0) * 100.0
        worst = max(worst, abs(got - expected_pct))
    gate(
        "criterion 1: RIAPAR vulnerability-table arithmetic",
        worst <= 1e-3,
        f"max |error| = {worst:.2e} %",
    )


def test_criterion_2_threshold_metrics_match_oracles():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for trial in range(100):
        n_a = int(rng.integers(1, 51))
        n_b = int(rng.integers(1, 51))
        if trial % 4 == 0:
            pool = rng.uniform(0.0, 1.0, 6)  # force duplicate scores
            attack = rng.choice(pool, n_a)
            bona = rng.choice(pool, n_b)
        else:
            attack = rng.uniform(0.0, 1.0, n_a)
            bona = rng.uniform(0.0, 1.0, n_b)

        eer, t = d_eer(attack, bona)
        oracle_eer, oracle_t = oracle_d_eer(attack, bona)
        worst = max(worst, abs(eer - oracle_eer), abs(t - oracle_t))
        for cap in (0.10, 0.05):
            worst = max(
                worst,
                abs(bpcer_at_apcer(attack, bona, cap) - oracle_bpcer_at_apcer(attack, bona, cap)),
            )
        target = float(rng.uniform(0.01, 1.0))
        got = threshold_at_fmr(bona, target)
        want = oracle_threshold_at_fmr(bona, target)
        worst = max(worst, abs(got.threshold - want[0]), abs(got.fmr - want[1]))
    elapsed = time.perf_counter() - start
    gate(
        "criterion 2: threshold metrics vs. exhaustive-sweep oracle (100 sets)",
        worst <= 1e-9 and elapsed < 1.0,
        f"max |diff| = {worst:.2e}, {elapsed:.2f}s",
    )


def test_criterion_3_svm_matches_qp_oracle():
    rng = np.random.default_rng(4096)
    start = time.perf_counter()
    worst_obj = 0.0
    worst_kkt = 0.0
    disagreements = 0
    for _ in range(30):
        n = int(rng.integers(4, 9))
        d = int(rng.integers(1, 4))
        X = rng.normal(size=(n, d)) * rng.uniform(0.5, 2.0)
        y = rng.choice([-1.0, 1.0], size=n)
        if np.all(y > 0) or np.all(y < 0):
            y[0] = -y[0]
        C = float(rng.choice([0.5, 1.0, 10.0]))
        gamma = float(rng.uniform(0.2, 2.0))

        samples = [
            (FeatureVector(x, "embedding_diff"), "attack" if lab > 0 else "bona_fide")
            for x, lab in zip(X, y)
        ]
        model = train(samples, C=C, gamma=gamma)

        sq = ((X[:, None, :] - X[None, :, :]) ** 2).sum(-1)
        K = np.exp(-gamma * sq)
        oracle_obj, oracle_alpha = qp_dual_oracle(K, y, C)
        worst_obj = max(worst_obj, abs(model.diagnostics.dual_objective - oracle_obj))

        # KKT residual on margin (free) vectors
        coef = model.dual_coefficients
        free = (np.abs(coef) > 1e-8) & (np.abs(coef) < C - 1e-8)
        for idx in np.flatnonzero(free):
            sv = FeatureVector(model.support_vectors[idx], "embedding_diff")
            margin = np.sign(coef[idx]) * decision_value(model, sv)
            worst_kkt = max(worst_kkt, abs(margin - 1.0))

        # sign agreement on a 100-point probe grid
        decide = oracle_decision_function(oracle_alpha, y, X, gamma, C)
        lo, hi = X.min(axis=0) - 0.5, X.max(axis=0) + 0.5
        probes = rng.uniform(lo, hi, size=(100, d))
        for probe in probes:
            ours = decision_value(model, FeatureVector(probe, "embedding_diff"))
            theirs = decide(probe)
            if min(abs(ours), abs(theirs)) > 1e-9 and np.sign(ours) != np.sign(theirs):
                disagreements += 1
    elapsed = time.perf_counter() - start
    gate(
        "criterion 3: SMO dual vs. brute-force QP oracle (30 problems)",
        worst_obj <= 1e-6 and worst_kkt <= 1e-2 and disagreements == 0 and elapsed < 10.0,
        f"max |dual gap| = {worst_obj:.2e}, max KKT residual = {worst_kkt:.2e}, "
        f"sign disagreements = {disagreements}, {elapsed:.1f}s",
    )


def test_criterion_4_warp_contracts():
    start = time.perf_counter()
    worst_identity = 0.0
    worst_landmark = 0.0
    worst_round_trip = 0.0
    for size in (64, 128, 224):
        scale = size * 0.38
        probe = face_landmarks(cx=size * 0.48, cy=size * 0.46, scale=scale)
        target = face_landmarks(cx=size * 0.52, cy=size * 0.48, scale=scale * 0.9)
        img = render_smooth_image(size, size)

        self_warp = warp_to_target(img, probe, probe)
        worst_identity = max(
            worst_identity,
            float(np.abs(self_warp.pixels.astype(float) - img.pixels.astype(float)).mean()) / 255.0,
        )

        mesh = delaunay_mesh(target, size, size)
        probe_vertices = np.vstack([probe.points, boundary_points(size, size)])
        mapped = piecewise_affine_map(probe_vertices[:68], probe_vertices, mesh.vertices, mesh.triangles)
        worst_landmark = max(worst_landmark, float(np.abs(mapped - mesh.vertices[:68]).max()))

        fwd = warp_to_target(img, probe, target)
        back = warp_to_target(fwd, target, probe)
        worst_round_trip = max(
            worst_round_trip,
            float(np.abs(back.pixels.astype(float) - img.pixels.astype(float)).mean()) / 255.0,
        )
    elapsed = time.perf_counter() - start
    gate(
        "criterion 4: warp contracts on 64-224 px images",
        worst_identity < 1.0 / 255.0
        and worst_landmark < 0.5
        and worst_round_trip < 4.0 / 255.0
        and elapsed < 5.0,
        f"self-warp mean diff = {worst_identity * 255:.3f}/255, "
        f"landmark error = {worst_landmark:.2e} px, "
        f"round trip = {worst_round_trip * 255:.2f}/255, {elapsed:.1f}s",
    )


def test_criterion_5_lbp_properties():
    start = time.perf_counter()
    identity = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    rng = np.random.default_rng(55)

    def face(px):
        return AlignedFace(image=RasterImage(px), transform=identity)

    ref = rng.integers(0, 246, (224, 224, 3)).astype(np.uint8)
    prb = rng.integers(0, 246, (224, 224, 3)).astype(np.uint8)
    feat = lbp_grid_features(face(ref), face(prb))
    cell_sums = feat.values.reshape(32, 256).sum(axis=1)
    mass_ok = bool(np.all(cell_sums == 54 * 54)) and feat.dim == 8192

    shifted = lbp_grid_features(face(ref + 10), face(prb + 10))
    shift_ok = bool(np.array_equal(feat.values, shifted.values))

    const = np.full((224, 224, 3), 77, dtype=np.uint8)
    const_hist = lbp_grid_features(face(const), face(const)).values.reshape(32, 256)
    const_ok = bool(np.all(const_hist[:, 255] == 54 * 54)) and not const_hist[:, :255].any()

    elapsed = time.perf_counter() - start
    gate(
        "criterion 5: grid LBP mass, shift invariance, constant image",
        mass_ok and shift_ok and const_ok and elapsed < 1.0,
        f"cell mass = {int(cell_sums[0])}, shift bit-identical = {shift_ok}, {elapsed:.2f}s",
    )


def test_criterion_6_end_to_end_pipeline(tmp_path):
    start = time.perf_counter()
    rng = np.random.default_rng(20260809)
    dim = 512

    def build(split, n_pairs):
        rows = []
        for i in range(n_pairs):
            label = "attack" if i % 2 else "bona_fide"
            ref = rng.normal(size=dim)
            diff = rng.normal(scale=0.05, size=dim)
            if label == "attack":
                diff[:10] += 0.3
            probe = ref - diff
            ref_path = tmp_path / f"{split}_ref_{i}.emb"
            probe_path = tmp_path / f"{split}_probe_{i}.emb"
            save_embedding(Embedding(ref), ref_path)
            save_embedding(Embedding(probe), probe_path)
            rows.append(f"{split}{i},,,,,{ref_path.name},{probe_path.name},{label},{split}")
        return rows

    (tmp_path / "train.csv").write_text(HEADER + "\n" + "\n".join(build("train", 400)) + "\n")
    (tmp_path / "test.csv").write_text(HEADER + "\n" + "\n".join(build("test", 400)) + "\n")

    f_train = tmp_path / "features_train.csv"
    f_test = tmp_path / "features_test.csv"
    model = tmp_path / "model.json"
    scores = tmp_path / "scores.csv"
    assert main(["extract", str(tmp_path / "train.csv"), "--out", str(f_train),
                 "--dim", "512", "--normalize-embeddings", "off"]) == 0
    assert main(["extract", str(tmp_path / "test.csv"), "--out", str(f_test),
                 "--dim", "512", "--normalize-embeddings", "off"]) == 0
    assert main(["train", str(f_train), "--out", str(model)]) == 0
    assert main(["score", str(model), str(f_test), "--out", str(scores)]) == 0

    loaded = load_score_file(scores)
    eer, _ = d_eer(loaded.scores_for("attack"), loaded.scores_for("bona_fide"))
    assert main(["evaluate", str(scores)]) == 0
    elapsed = time.perf_counter() - start
    gate(
        "criterion 6: extract-train-score-evaluate chain on the synthetic embedding world",
        eer <= 0.05 and abs(eer - PINNED_END_TO_END_DEER) <= 0.01 and elapsed < 30.0,
        f"held-out D-EER = {eer * 100:.3f}% (pinned {PINNED_END_TO_END_DEER * 100:.3f}%), {elapsed:.1f}s",
    )


def test_criterion_7_synthesis_determinism(tmp_path):
    start = time.perf_counter()

    def write_pool(root, prefix, n, shared_subject=None):
        root.mkdir(parents=True)
        rows = []
        for i in range(n):
            subject = shared_subject if (shared_subject and i == 0) else f"{prefix}{i}"
            lm = face_landmarks(cx=100.0 + 3 * i, cy=100.0 + 2 * i, scale=54.0 + 2 * i)
            img = render_flat_face(lm, lip=(140 + 15 * i, 40, 60), skin=(200 - 5 * i, 160, 130))
            save_landmarks(lm, root / f"{subject}.lm")
            write_ppm(img, root / f"{subject}.ppm")
            rows.append(
                f"{subject},{subject}.ppm,{subject}.ppm,{subject}.lm,{subject}.lm,,,bona_fide,train"
            )
        path = root / "pool.csv"
        path.write_text(HEADER + "\n" + "\n".join(rows) + "\n")
        return path

    targets = write_pool(tmp_path / "targets", "t", 5)
    probes = write_pool(tmp_path / "probes", "p", 5, shared_subject="t0")

    out_a = tmp_path / "corpus_a"
    out_b = tmp_path / "corpus_b"
    args = ["synth", str(targets), str(probes), "--seed", "11", "--count", "10", "--crop", "128"]
    assert main(args + ["--out", str(out_a)]) == 0
    assert main(args + ["--out", str(out_b)]) == 0

    names_a = sorted(p.name for p in out_a.iterdir())
    names_b = sorted(p.name for p in out_b.iterdir())
    identical = names_a == names_b and all(
        (out_a / n).read_bytes() == (out_b / n).read_bytes() for n in names_a
    )

    records = load_manifest(out_a / "manifest.csv")
    attacks = [r for r in records if r.label == "attack"]
    same_subject = 0
    gates_failed = 0
    for record in attacks:
        _, _, tid, pid = record.pair_id.split("_", 3)
        if tid == pid:
            same_subject += 1
        if not quality_gate(load_landmarks(record.probe.landmarks)).passed:
            gates_failed += 1
    elapsed = time.perf_counter() - start
    gate(
        "criterion 7: seeded synthesis determinism over 5x5 pools",
        identical and same_subject == 0 and gates_failed == 0 and len(attacks) == 10 and elapsed < 30.0,
        f"byte-identical = {identical}, same-subject pairs = {same_subject}, "
        f"gate failures = {gates_failed}, {elapsed:.1f}s",
    )


def test_criterion_8_non_reproducibility_documented():
    readme = Path(__file__).resolve().parent.parent / "README.md"
    text = readme.read_text(encoding="utf-8")
    required = [
        "MIFS",          # the database the published numbers depend on
        "ArcFace",
        "FaceNet",
        "dlib",
        "FRGCv2",
        "FERET",
        "CelebA",
        "0.7%",          # headline operating points quoted as not reproduced
        "3.3%",
        "17%",
        "not** reproduced",
        "3290",          # synthetic corpus size in the documented recipe
    ]
    missing = [marker for marker in required if marker not in text]
    gate(
        "criterion 8: README documents the asset-bound recipe and non-reproducibility",
        not missing,
        "all markers present" if not missing else f"missing: {missing}",
    )
