"""The four feature channels fed to the attack detector.

embedding_diff   element-wise reference-minus-probe embedding difference
landmark_diff    differences of eye-normalized landmark coordinates (136)
lbp_grid         grid LBP histograms of both aligned faces (2 x 16 x 256)
probe_only       the probe embedding taken verbatim
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .core import Embedding, LandmarkSet, fmt_float
from .errors import FormatError
from .geometry import AlignedFace, normalize_landmarks

CHANNELS = ("embedding_diff", "landmark_diff", "lbp_grid", "probe_only")

LANDMARK_DIFF_DIM = 136
LBP_GRID_CELLS = 4        # cells per image side
LBP_BINS = 256
LBP_GRID_DIM = 2 * LBP_GRID_CELLS * LBP_GRID_CELLS * LBP_BINS

# (row, col) neighbor offsets, clockwise from top-left; bit b carries weight 2**b
LBP_NEIGHBOR_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))

_FIXED_DIMS = {"landmark_diff": LANDMARK_DIFF_DIM, "lbp_grid": LBP_GRID_DIM}


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    channel: str

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ValueError(f"unknown feature channel {self.channel!r}")
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError("feature values must form a non-empty vector")
        if not np.all(np.isfinite(vals)):
            raise ValueError("feature values must be finite")
        fixed = _FIXED_DIMS.get(self.channel)
        if fixed is not None and vals.size != fixed:
            raise ValueError(f"channel {self.channel} requires dim {fixed}, got {vals.size}")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.values.size


def embedding_difference(reference: Embedding, probe: Embedding, normalize: bool = True) -> FeatureVector:
    """Element-wise reference-minus-probe difference.

    With ``normalize`` each input is scaled to unit Euclidean norm first
    (zero vectors are left unscaled), making distances comparable across
    extractors.
    """
    if reference.dim != probe.dim:
        raise ValueError(f"embedding dims differ: {reference.dim} vs {probe.dim}")
    ref = reference.values
    prb = probe.values
    if normalize:
        rn = np.linalg.norm(ref)
        pn = np.linalg.norm(prb)
        ref = ref / rn if rn > 0 else ref
        prb = prb / pn if pn > 0 else prb
    return FeatureVector(ref - prb, "embedding_diff")


def landmark_difference(reference: LandmarkSet, probe: LandmarkSet) -> FeatureVector:
    """Concatenated x then y differences of eye-normalized landmarks (length 136)."""
    ref = normalize_landmarks(reference)
    prb = normalize_landmarks(probe)
    diff = ref - prb
    return FeatureVector(np.concatenate([diff[:, 0], diff[:, 1]]), "landmark_diff")


def probe_only_feature(probe: Embedding) -> FeatureVector:
    return FeatureVector(probe.values.copy(), "probe_only")


def grayscale(pixels: np.ndarray) -> np.ndarray:
    """Luma conversion round(0.299 R + 0.587 G + 0.114 B).

    Computed in integer arithmetic (half-up rounding of the exact rational)
    so a global intensity shift of the input shifts the output exactly.
    """
    px = pixels.astype(np.int64)
    val = 299 * px[:, :, 0] + 587 * px[:, :, 1] + 114 * px[:, :, 2]
    return (val + 500) // 1000


def lbp_code(patch: np.ndarray) -> int:
    """LBP code of one 3x3 patch: bit b set iff neighbor b >= center."""
    p = np.asarray(patch)
    if p.shape != (3, 3):
        raise ValueError(f"expected a 3x3 patch, got shape {p.shape}")
    center = p[1, 1]
    code = 0
    for bit, (dr, dc) in enumerate(LBP_NEIGHBOR_OFFSETS):
        if p[1 + dr, 1 + dc] >= center:
            code |= 1 << bit
    return code


def lbp_code_image(gray: np.ndarray) -> np.ndarray:
    """LBP codes for all pixels with a full 3x3 neighborhood.

    Output shape (h-2, w-2); entry (i, j) is the code of gray pixel
    (i+1, j+1).
    """
    h, w = gray.shape
    center = gray[1 : h - 1, 1 : w - 1]
    codes = np.zeros((h - 2, w - 2), dtype=np.int64)
    for bit, (dr, dc) in enumerate(LBP_NEIGHBOR_OFFSETS):
        neighbor = gray[1 + dr : h - 1 + dr, 1 + dc : w - 1 + dc]
        codes |= (neighbor >= center).astype(np.int64) << bit
    return codes


def _grid_histograms(pixels: np.ndarray) -> np.ndarray:
    h, w = pixels.shape[:2]
    if h % LBP_GRID_CELLS or w % LBP_GRID_CELLS:
        raise ValueError(f"image size {w}x{h} not divisible into {LBP_GRID_CELLS}x{LBP_GRID_CELLS} cells")
    gray = grayscale(pixels)
    codes = lbp_code_image(gray)
    ch, cw = h // LBP_GRID_CELLS, w // LBP_GRID_CELLS
    hists = []
    for ci in range(LBP_GRID_CELLS):
        for cj in range(LBP_GRID_CELLS):
            # cell-interior pixels only: the 1-pixel cell border is excluded,
            # so every patch stays inside its cell
            block = codes[ci * ch : ci * ch + ch - 2, cj * cw : cj * cw + cw - 2]
            hists.append(np.bincount(block.ravel(), minlength=LBP_BINS).astype(np.float64))
    return np.concatenate(hists)


def lbp_grid_features(reference: AlignedFace, probe: AlignedFace) -> FeatureVector:
    """Reference-then-probe concatenation of per-cell LBP histograms."""
    rimg = reference.image
    pimg = probe.image
    if (rimg.height, rimg.width) != (pimg.height, pimg.width):
        raise ValueError(
            f"aligned faces differ in size: {rimg.width}x{rimg.height} vs {pimg.width}x{pimg.height}"
        )
    return FeatureVector(
        np.concatenate([_grid_histograms(rimg.pixels), _grid_histograms(pimg.pixels)]),
        "lbp_grid",
    )


# ---------------------------------------------------------------------------
# feature file carrier: pair_id,label,split,channel,f0..f{n-1}


def save_feature_file(rows: Iterable[tuple[str, str, str, FeatureVector]], path) -> None:
    rows = list(rows)
    if not rows:
        raise ValueError("no feature rows to write")
    dim = rows[0][3].dim
    header = ["pair_id", "label", "split", "channel"] + [f"f{i}" for i in range(dim)]
    lines = [",".join(header)]
    for pair_id, label, split, feat in rows:
        if feat.dim != dim:
            raise ValueError("all feature rows must share one dimension")
        cells = [pair_id, label, split, feat.channel]
        cells.extend(fmt_float(v) for v in feat.values)
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_feature_file(path) -> list[tuple[str, str, str, FeatureVector]]:
    p = Path(path)
    if not p.is_file():
        raise FormatError(f"feature file not found: {p}")
    lines = [ln for ln in p.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{p}: empty feature file")
    header = lines[0].split(",")
    if header[:4] != ["pair_id", "label", "split", "channel"] or len(header) < 5:
        raise FormatError(f"{p}: bad feature file header")
    dim = len(header) - 4
    rows: list[tuple[str, str, str, FeatureVector]] = []
    channel = None
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise FormatError(f"{p}: line {lineno}: expected {len(header)} cells, found {len(cells)}")
        pair_id, label, split, chan = cells[0], cells[1], cells[2], cells[3]
        if channel is None:
            channel = chan
        elif chan != channel:
            raise FormatError(f"{p}: line {lineno}: mixed channels {channel!r} and {chan!r}")
        try:
            values = np.array([float(c) for c in cells[4:]], dtype=np.float64)
        except ValueError:
            raise FormatError(f"{p}: line {lineno}: non-numeric feature value") from None
        rows.append((pair_id, label, split, FeatureVector(values, chan)))
    if len({r[3].dim for r in rows} | {dim}) != 1:
        raise FormatError(f"{p}: inconsistent feature dimensions")
    return rows
