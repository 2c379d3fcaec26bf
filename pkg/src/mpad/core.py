"""Shared domain types and the text carriers that feed the pipeline.

All types are immutable after construction and safe to share across
concurrent readers; loaders are pure functions of file contents.
Floats are rendered with Python's shortest round-trip ``repr``, so every
save/load cycle reproduces values bit-exactly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError

LABELS = ("bona_fide", "attack")
SPLITS = ("train", "test")
COMPARISON_LABELS = ("genuine", "impostor", "attack")

LANDMARK_COUNT = 68
# index ranges of the standard 68-point annotation scheme
JAW_IDX = range(0, 17)
BROW_IDX = range(17, 27)
NOSE_IDX = range(27, 36)
LEFT_EYE_IDX = range(36, 42)
RIGHT_EYE_IDX = range(42, 48)
LIP_IDX = range(48, 68)
INNER_LIP_IDX = range(60, 68)

DEFAULT_EMBEDDING_DIM = 512

MANIFEST_COLUMNS = (
    "pair_id",
    "ref_image",
    "probe_image",
    "ref_landmarks",
    "probe_landmarks",
    "ref_embedding",
    "probe_embedding",
    "label",
    "split",
)


def fmt_float(value: float) -> str:
    """Shortest decimal string that parses back to the identical float."""
    return repr(float(value))


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class RasterImage:
    """8-bit RGB image; ``pixels`` is a read-only (height, width, 3) array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"expected (height, width, 3) pixels, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if px.dtype != np.uint8:
            raise ValueError(f"expected uint8 pixels, got {px.dtype}")
        object.__setattr__(self, "pixels", _frozen_array(px, np.uint8))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True, eq=False)
class LandmarkSet:
    """68 facial points (x, y) in pixel units, standard annotation order."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.shape != (LANDMARK_COUNT, 2):
            raise ValueError(f"expected ({LANDMARK_COUNT}, 2) points, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("landmark coordinates must be finite")
        object.__setattr__(self, "points", _frozen_array(pts, np.float64))


@dataclass(frozen=True, eq=False)
class Embedding:
    """Fixed-dimension real vector produced by an external face recognizer."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError(f"expected a non-empty 1-d vector, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("embedding values must be finite")
        object.__setattr__(self, "values", _frozen_array(vals, np.float64))

    @property
    def dim(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class SampleRef:
    """File paths backing one side of a pair; unused channels stay None."""

    image: str | None = None
    landmarks: str | None = None
    embedding: str | None = None


@dataclass(frozen=True)
class PairRecord:
    """One manifest row: a reference/probe pair with label and split."""

    pair_id: str
    reference: SampleRef
    probe: SampleRef
    label: str
    split: str

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")


@dataclass(frozen=True, eq=False)
class LabeledScoreSet:
    """Scores with ground-truth labels; the input to every metric."""

    scores: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.ndim != 1:
            raise ValueError("scores must be a 1-d vector")
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores must be finite")
        if scores.size != len(self.labels):
            raise ValueError("scores and labels must have equal length")
        object.__setattr__(self, "scores", _frozen_array(scores, np.float64))
        object.__setattr__(self, "labels", tuple(self.labels))

    def scores_for(self, label: str) -> np.ndarray:
        mask = np.array([lab == label for lab in self.labels], dtype=bool)
        return self.scores[mask]


# ---------------------------------------------------------------------------
# embedding carrier: one line of comma-separated decimals


def load_embedding(path, expected_dim: int | None = None) -> Embedding:
    p = Path(path)
    if not p.is_file():
        raise FormatError(f"embedding file not found: {p}")
    text = p.read_text(encoding="utf-8").strip()
    if not text:
        raise FormatError(f"{p}: empty embedding file")
    tokens = text.split(",")
    values = np.empty(len(tokens), dtype=np.float64)
    for i, token in enumerate(tokens):
        try:
            values[i] = float(token)
        except ValueError:
            raise FormatError(f"{p}: non-numeric token {token.strip()!r} at position {i}") from None
    if not np.all(np.isfinite(values)):
        raise FormatError(f"{p}: embedding contains non-finite values")
    if expected_dim is not None and values.size != expected_dim:
        raise FormatError(f"{p}: expected dimension {expected_dim}, found {values.size}")
    return Embedding(values)


def save_embedding(embedding: Embedding, path) -> None:
    Path(path).write_text(",".join(fmt_float(v) for v in embedding.values) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# landmark carrier: exactly 68 lines "x,y"


def load_landmarks(path) -> LandmarkSet:
    p = Path(path)
    if not p.is_file():
        raise FormatError(f"landmark file not found: {p}")
    lines = [ln for ln in p.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if len(lines) != LANDMARK_COUNT:
        raise FormatError(f"{p}: expected {LANDMARK_COUNT} landmark lines, found {len(lines)}")
    pts = np.empty((LANDMARK_COUNT, 2), dtype=np.float64)
    for i, line in enumerate(lines):
        parts = line.split(",")
        if len(parts) != 2:
            raise FormatError(f"{p}: line {i + 1}: expected 'x,y', got {line!r}")
        try:
            pts[i, 0] = float(parts[0])
            pts[i, 1] = float(parts[1])
        except ValueError:
            raise FormatError(f"{p}: line {i + 1}: non-numeric coordinate in {line!r}") from None
    if not np.all(np.isfinite(pts)):
        raise FormatError(f"{p}: non-finite landmark coordinate")
    return LandmarkSet(pts)


def save_landmarks(landmarks: LandmarkSet, path) -> None:
    lines = [f"{fmt_float(x)},{fmt_float(y)}" for x, y in landmarks.points]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# manifest carrier


def _resolve_path(base: Path, cell: str) -> str | None:
    cell = cell.strip()
    if not cell:
        return None
    if os.path.isabs(cell):
        return os.path.normpath(cell)
    return os.path.normpath(str(base / cell))


def load_manifest(path) -> list[PairRecord]:
    """Parse a manifest CSV into PairRecords, order preserved.

    Lines starting with '#' form an optional metadata preamble and are
    skipped; relative paths are resolved against the manifest's directory.
    """
    p = Path(path)
    if not p.is_file():
        raise FormatError(f"manifest not found: {p}")
    base = p.parent
    records: list[PairRecord] = []
    header_seen = False
    with open(p, encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            cells = [c.strip() for c in line.split(",")]
            if not header_seen:
                if tuple(cells) != MANIFEST_COLUMNS:
                    raise FormatError(
                        f"{p}: line {lineno}: bad header; expected {','.join(MANIFEST_COLUMNS)}"
                    )
                header_seen = True
                continue
            if len(cells) != len(MANIFEST_COLUMNS):
                raise FormatError(
                    f"{p}: line {lineno}: expected {len(MANIFEST_COLUMNS)} cells, found {len(cells)}"
                )
            row = dict(zip(MANIFEST_COLUMNS, cells))
            if row["label"] not in LABELS:
                raise FormatError(f"{p}: line {lineno}: unknown label {row['label']!r}")
            if row["split"] not in SPLITS:
                raise FormatError(f"{p}: line {lineno}: unknown split {row['split']!r}")
            if not row["pair_id"]:
                raise FormatError(f"{p}: line {lineno}: empty pair_id")
            records.append(
                PairRecord(
                    pair_id=row["pair_id"],
                    reference=SampleRef(
                        image=_resolve_path(base, row["ref_image"]),
                        landmarks=_resolve_path(base, row["ref_landmarks"]),
                        embedding=_resolve_path(base, row["ref_embedding"]),
                    ),
                    probe=SampleRef(
                        image=_resolve_path(base, row["probe_image"]),
                        landmarks=_resolve_path(base, row["probe_landmarks"]),
                        embedding=_resolve_path(base, row["probe_embedding"]),
                    ),
                    label=row["label"],
                    split=row["split"],
                )
            )
    if not header_seen:
        raise FormatError(f"{p}: missing header row")
    return records


def manifest_metadata(path) -> dict[str, str]:
    """Read the '# key=value' preamble of a manifest."""
    meta: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if not line.startswith("#"):
                break
            body = line.lstrip("#").strip()
            if "=" in body:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
    return meta


def save_manifest(rows: Iterable[Sequence[str]], path, metadata: dict[str, str] | None = None) -> None:
    """Write manifest rows (cells as strings, already relative/absolute as desired)."""
    lines = []
    for key, value in (metadata or {}).items():
        lines.append(f"# {key}={value}")
    lines.append(",".join(MANIFEST_COLUMNS))
    for row in rows:
        if len(row) != len(MANIFEST_COLUMNS):
            raise ValueError(f"manifest row must have {len(MANIFEST_COLUMNS)} cells")
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# score carriers

SCORE_HEADER = ("pair_id", "label", "score")


def load_score_file(path) -> LabeledScoreSet:
    """Read a detection score CSV (pair_id,label,score)."""
    p = Path(path)
    if not p.is_file():
        raise FormatError(f"score file not found: {p}")
    lines = [ln for ln in p.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines or tuple(c.strip() for c in lines[0].split(",")) != SCORE_HEADER:
        raise FormatError(f"{p}: expected header {','.join(SCORE_HEADER)}")
    scores: list[float] = []
    labels: list[str] = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != 3:
            raise FormatError(f"{p}: line {lineno}: expected 3 cells")
        try:
            scores.append(float(cells[2]))
        except ValueError:
            raise FormatError(f"{p}: line {lineno}: non-numeric score {cells[2]!r}") from None
        labels.append(cells[1])
    return LabeledScoreSet(np.array(scores, dtype=np.float64), tuple(labels))


def save_score_file(rows: Iterable[tuple[str, str, float]], path) -> None:
    lines = [",".join(SCORE_HEADER)]
    for pair_id, label, score in rows:
        lines.append(f"{pair_id},{label},{fmt_float(score)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_plain_scores(path) -> np.ndarray:
    """Read comparison scores: one decimal per line ('#' comments allowed).

    A file carrying the pair_id,label,score header is also accepted; its
    score column is used.
    """
    p = Path(path)
    if not p.is_file():
        raise FormatError(f"score file not found: {p}")
    lines = [ln.strip() for ln in p.read_text(encoding="utf-8").splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise FormatError(f"{p}: no scores in file")
    if tuple(c.strip() for c in lines[0].split(",")) == SCORE_HEADER:
        return load_score_file(p).scores
    values = np.empty(len(lines), dtype=np.float64)
    for i, line in enumerate(lines):
        try:
            values[i] = float(line)
        except ValueError:
            raise FormatError(f"{p}: line {i + 1}: non-numeric score {line!r}") from None
    if not np.all(np.isfinite(values)):
        raise FormatError(f"{p}: non-finite score")
    return values
