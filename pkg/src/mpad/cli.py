"""Command-line orchestration: extract, train, score, evaluate, vuln, synth.

Every command is deterministic given identical inputs and configuration.
Row-level problems during extraction are collected (not fatal per row) and
turn the exit status nonzero; hard errors abort with a message on stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import ppm
from .config import PipelineConfig, load_config, override, parse_gamma
from .core import (
    PairRecord,
    fmt_float,
    load_embedding,
    load_landmarks,
    load_manifest,
    load_plain_scores,
    load_score_file,
    save_score_file,
)
from .errors import FormatError, MpadError
from .features import (
    FeatureVector,
    embedding_difference,
    landmark_difference,
    lbp_grid_features,
    load_feature_file,
    probe_only_feature,
    save_feature_file,
)
from .geometry import align_face
from .metrics import (
    bpcer_at_apcer,
    d_eer,
    det_curve,
    vulnerability_report,
    write_det_csv,
    write_stats_csv,
    write_vulnerability_csv,
)
from .svm import load_model, save_model, score, train
from .synth import generate_corpus, quality_gate


def _merged_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    updates = {}
    for attr, key in (
        ("channel", "channel"),
        ("dim", "dim"),
        ("normalize_embeddings", "normalize_embeddings"),
        ("svm_c", "svm_c"),
        ("svm_gamma", "svm_gamma"),
        ("crop", "crop_size"),
        ("seed", "seed"),
        ("count", "count"),
        ("intensity", "warp_intensity"),
        ("frontal_max", "frontal_max_asymmetry"),
        ("mouth_max", "mouth_max_gap"),
        ("sanity_box", "sanity_box"),
    ):
        if hasattr(args, attr):
            updates[key] = getattr(args, attr)
    return override(cfg, **updates)


def _require_input(value: str | None, pair_id: str, what: str) -> str:
    if not value:
        raise MpadError(f"missing {what}")
    return value


def _extract_one(record: PairRecord, cfg: PipelineConfig) -> FeatureVector:
    channel = cfg.channel
    if channel == "embedding_diff":
        ref = load_embedding(_require_input(record.reference.embedding, record.pair_id, "ref_embedding"), cfg.dim)
        prb = load_embedding(_require_input(record.probe.embedding, record.pair_id, "probe_embedding"), cfg.dim)
        return embedding_difference(ref, prb, cfg.normalize_embeddings)
    if channel == "probe_only":
        prb = load_embedding(_require_input(record.probe.embedding, record.pair_id, "probe_embedding"), cfg.dim)
        return probe_only_feature(prb)
    if channel == "landmark_diff":
        ref = load_landmarks(_require_input(record.reference.landmarks, record.pair_id, "ref_landmarks"))
        prb = load_landmarks(_require_input(record.probe.landmarks, record.pair_id, "probe_landmarks"))
        return landmark_difference(ref, prb)
    if channel == "lbp_grid":
        ref_img = ppm.read_ppm(_require_input(record.reference.image, record.pair_id, "ref_image"))
        ref_lm = load_landmarks(_require_input(record.reference.landmarks, record.pair_id, "ref_landmarks"))
        prb_img = ppm.read_ppm(_require_input(record.probe.image, record.pair_id, "probe_image"))
        prb_lm = load_landmarks(_require_input(record.probe.landmarks, record.pair_id, "probe_landmarks"))
        ref_face = align_face(ref_img, ref_lm, cfg.crop_size)
        prb_face = align_face(prb_img, prb_lm, cfg.crop_size)
        return lbp_grid_features(ref_face, prb_face)
    raise MpadError(f"unknown channel {channel!r}")


def cmd_extract(args) -> int:
    cfg = _merged_config(args)
    records = load_manifest(args.manifest)
    if not records:
        raise MpadError(f"{args.manifest}: manifest contains no rows")
    rows = []
    failures: list[tuple[str, str]] = []
    for record in records:
        try:
            rows.append((record.pair_id, record.label, record.split, _extract_one(record, cfg)))
        except (MpadError, ValueError) as exc:
            failures.append((record.pair_id, str(exc)))
    if rows:
        save_feature_file(rows, args.out)
        print(f"wrote {len(rows)} {cfg.channel} rows (dim {rows[0][3].dim}) to {args.out}")
    for pair_id, message in failures:
        print(f"error: {pair_id}: {message}", file=sys.stderr)
    if failures:
        print(f"{len(failures)} of {len(records)} rows failed", file=sys.stderr)
        return 1
    return 0


def cmd_train(args) -> int:
    cfg = _merged_config(args)
    rows = load_feature_file(args.features)
    samples = [(feat, label) for _, label, split, feat in rows if split == "train"]
    if not samples:
        raise MpadError(f"{args.features}: no train-split rows")
    model = train(samples, C=cfg.svm_c, gamma=cfg.svm_gamma)
    save_model(model, args.out)
    diag = model.diagnostics
    print(f"support vectors: {model.n_support}")
    print(f"training accuracy: {fmt_float(diag.training_accuracy)}")
    print(f"model written to {args.out}")
    return 0


def cmd_score(args) -> int:
    model = load_model(args.model)
    rows = load_feature_file(args.features)
    out_rows = [(pair_id, label, score(model, feat)) for pair_id, label, _, feat in rows]
    save_score_file(out_rows, args.out)
    print(f"scored {len(out_rows)} pairs to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    scores = load_score_file(args.scores)
    bonafide = scores.scores_for("bona_fide")
    attack = scores.scores_for("attack")
    if bonafide.size == 0 or attack.size == 0:
        raise MpadError(f"{args.scores}: need both bona_fide and attack rows")
    eer, threshold = d_eer(attack, bonafide)
    bpcer10 = bpcer_at_apcer(attack, bonafide, 0.10)
    bpcer20 = bpcer_at_apcer(attack, bonafide, 0.05)
    curve = det_curve(attack, bonafide)
    print(f"D-EER (%): {eer * 100:.3f} (threshold {fmt_float(threshold)})")
    print(f"BPCER10 (%): {bpcer10 * 100:.3f}")
    print(f"BPCER20 (%): {bpcer20 * 100:.3f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_det_csv(curve, out / "det_curve.csv")
        report_lines = [
            "metric,value",
            f"d_eer_percent,{fmt_float(eer * 100)}",
            f"d_eer_threshold,{fmt_float(threshold)}",
            f"bpcer10_percent,{fmt_float(bpcer10 * 100)}",
            f"bpcer20_percent,{fmt_float(bpcer20 * 100)}",
        ]
        (out / "report.csv").write_text("\n".join(report_lines) + "\n", encoding="utf-8")
        from . import plots

        plots.save_det_curve_plot(curve, out / "det_curve.png", eer=eer)
        plots.save_score_histograms(
            {"bona fide": bonafide, "attack": attack},
            out / "score_distributions.png",
            xlabel="attack detection score",
        )
        print(f"report written to {out}")
    return 0


def cmd_vuln(args) -> int:
    genuine = load_plain_scores(args.genuine)
    impostor = load_plain_scores(args.impostor)
    attack = load_plain_scores(args.attack)
    fmrs = []
    for token in args.fmr.split(","):
        value = float(token)
        if not (0.0 < value <= 100.0):
            raise MpadError(f"FMR values are percentages in (0, 100], got {token}")
        fmrs.append(value / 100.0)
    report = vulnerability_report(genuine, impostor, attack, fmrs)
    print("FMR(%),FNMR(%),IAPMR(%),RIAPAR(%)")
    for row in report.rows:
        print(
            f"{row.target_fmr * 100:.3f},{row.fnmr * 100:.3f},"
            f"{row.iapmr * 100:.3f},{row.riapar * 100:.3f}"
        )
    for name, st in report.stats.items():
        print(
            f"{name}: mean={st.mean:.3f} st.dev={st.st_dev:.3f} "
            f"min={st.minimum:.3f} max={st.maximum:.3f}"
        )
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_vulnerability_csv(report, out / "vulnerability.csv")
        write_stats_csv(report.stats, out / "score_stats.csv")
        from . import plots

        plots.save_score_histograms(
            {"genuine": genuine, "impostor": impostor, "attack": attack},
            out / "score_distributions.png",
            xlabel="comparison score",
        )
        plots.save_vulnerability_plot(report, out / "vulnerability.png")
        print(f"report written to {out}")
    return 0


def _gate_pool(records: list[PairRecord], side: str, cfg: PipelineConfig):
    kept = []
    rejections = {"frontal_pose": 0, "mouth_closed": 0, "landmark_sanity": 0}
    for record in records:
        ref = record.reference if side == "reference" else record.probe
        path = ref.landmarks
        if not path:
            raise MpadError(f"pool record {record.pair_id!r} is missing {side} landmarks")
        report = quality_gate(
            load_landmarks(path),
            frontal_max=cfg.frontal_max_asymmetry,
            mouth_max=cfg.mouth_max_gap,
            sanity_box=cfg.sanity_box,
        )
        if report.passed:
            kept.append(record)
        else:
            for gate in report.failed_gates():
                rejections[gate] += 1
    return kept, rejections


def cmd_synth(args) -> int:
    cfg = _merged_config(args)
    targets = load_manifest(args.targets)
    probes = load_manifest(args.probes)
    kept_targets, target_rejections = _gate_pool(targets, "reference", cfg)
    kept_probes, probe_rejections = _gate_pool(probes, "probe", cfg)
    for pool, total, kept, rejections in (
        ("targets", len(targets), kept_targets, target_rejections),
        ("probes", len(probes), kept_probes, probe_rejections),
    ):
        gates = " ".join(f"{name}={count}" for name, count in rejections.items())
        print(f"{pool}: kept {len(kept)}/{total} (rejections: {gates})")
    if not kept_targets or not kept_probes:
        raise MpadError("a pool is empty after quality gating; see rejection counts above")
    result = generate_corpus(
        kept_targets,
        kept_probes,
        seed=cfg.seed,
        count=cfg.count,
        out_dir=args.out,
        crop=cfg.crop_size,
        intensity=cfg.warp_intensity,
    )
    print(
        f"wrote {result.attack_count} attacks and {result.bona_fide_count} bona fide rows "
        f"to {result.manifest_path}"
        + (" (sampling with replacement)" if result.with_replacement else "")
    )
    return 0


def _parse_on_off(value: str) -> bool:
    low = value.strip().lower()
    if low in ("1", "true", "on", "yes"):
        return True
    if low in ("0", "false", "off", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on or off, got {value!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpad",
        description="Differential makeup presentation attack detection toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", help="key=value pipeline config file")

    p = sub.add_parser("extract", help="extract feature vectors for manifest pairs")
    add_config(p)
    p.add_argument("manifest", help="manifest CSV")
    p.add_argument("--out", required=True, help="feature CSV to write")
    p.add_argument("--channel", choices=("embedding_diff", "landmark_diff", "lbp_grid", "probe_only"))
    p.add_argument("--dim", type=int, help="embedding dimension (default 512)")
    p.add_argument(
        "--normalize-embeddings",
        dest="normalize_embeddings",
        type=_parse_on_off,
        metavar="{on,off}",
        help="unit-normalize embeddings before differencing (default on)",
    )
    p.add_argument("--crop", type=int, help="canonical crop size (default 224)")
    p.set_defaults(handler=cmd_extract)

    p = sub.add_parser("train", help="train the RBF-SVM detector on train-split rows")
    add_config(p)
    p.add_argument("features", help="feature CSV")
    p.add_argument("--out", required=True, help="model JSON to write")
    p.add_argument("--svm-c", dest="svm_c", type=float, help="box constraint C (default 1.0)")
    p.add_argument(
        "--svm-gamma",
        dest="svm_gamma",
        type=parse_gamma,
        help="RBF gamma, a positive number or 'scale' (default scale)",
    )
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("score", help="score feature rows with a trained model")
    p.add_argument("model", help="model JSON")
    p.add_argument("features", help="feature CSV")
    p.add_argument("--out", required=True, help="score CSV to write")
    p.set_defaults(handler=cmd_score)

    p = sub.add_parser("evaluate", help="D-EER, BPCER10/20 and DET table from a score file")
    p.add_argument("scores", help="score CSV (pair_id,label,score)")
    p.add_argument("--out", help="directory for det_curve.csv, report.csv and figures")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("vuln", help="vulnerability analysis from comparison scores")
    p.add_argument("--genuine", required=True, help="genuine comparison scores, one per line")
    p.add_argument("--impostor", required=True, help="impostor comparison scores, one per line")
    p.add_argument("--attack", required=True, help="attack comparison scores, one per line")
    p.add_argument("--fmr", default="0.001,0.01,0.1,1.0", help="target FMRs in percent")
    p.add_argument("--out", help="directory for vulnerability.csv, score_stats.csv and figures")
    p.set_defaults(handler=cmd_vuln)

    p = sub.add_parser("synth", help="generate a synthetic attack corpus")
    add_config(p)
    p.add_argument("targets", help="manifest of makeup targets (reference side used)")
    p.add_argument("probes", help="manifest of bona fide subjects (probe side warped)")
    p.add_argument("--out", required=True, help="corpus output directory")
    p.add_argument("--seed", type=int, help="pairing seed (default 0)")
    p.add_argument("--count", type=int, help="number of synthetic attacks (default 0)")
    p.add_argument("--crop", type=int, help="canonical crop size (default 224)")
    p.add_argument("--intensity", type=float, help="warp intensity in [0, 1] (default 1.0)")
    p.add_argument("--frontal-max", dest="frontal_max", type=float, help="frontal-pose gate threshold")
    p.add_argument("--mouth-max", dest="mouth_max", type=float, help="closed-mouth gate threshold")
    p.add_argument("--sanity-box", dest="sanity_box", type=float, help="landmark sanity box half-width")
    p.set_defaults(handler=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (MpadError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def console_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_entry()
