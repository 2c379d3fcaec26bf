"""Synthetic makeup-attack generation.

A probe face is warped triangle-by-triangle onto the landmark geometry of
a makeup target, then the target's per-region color statistics (lips, eye
surrounds, remaining skin) are transferred onto the warped probe in a
decorrelated luma/chroma space. Landmark-geometry gates keep non-frontal
or open-mouth inputs out of the pools, and a seeded pairing step emits a
labeled corpus as PPM images plus a standard manifest.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay, QhullError

from . import ppm
from .core import (
    BROW_IDX,
    JAW_IDX,
    LEFT_EYE_IDX,
    LIP_IDX,
    RIGHT_EYE_IDX,
    LandmarkSet,
    PairRecord,
    RasterImage,
    fmt_float,
    load_landmarks,
    save_landmarks,
    save_manifest,
)
from .errors import GeometryError, MpadError
from .geometry import align_face, align_landmarks, bilinear_sample, eye_centers, normalize_landmarks

DEGENERATE_TRIANGLE_AREA = 1e-9

FRONTAL_MAX_ASYMMETRY = 0.35
MOUTH_MAX_GAP = 0.10
SANITY_BOX = 1.5

EYE_REGION_DILATION = 1.6  # scale factor of the eye hull about its centroid


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Landmarks plus 8 crop-boundary points, Delaunay triangulated."""

    vertices: np.ndarray   # (n, 2)
    triangles: np.ndarray  # (m, 3) indices into vertices

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=np.float64)
        tris = np.asarray(self.triangles, dtype=np.int64)
        if verts.ndim != 2 or verts.shape[1] != 2:
            raise ValueError("vertices must be (n, 2)")
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise ValueError("triangles must be (m, 3)")
        if tris.min(initial=0) < 0 or tris.max(initial=-1) >= len(verts):
            raise ValueError("triangle indices out of range")
        areas = _triangle_areas(verts, tris)
        if np.any(areas < DEGENERATE_TRIANGLE_AREA):
            raise GeometryError("mesh contains a degenerate (zero-area) triangle")
        for name, arr in (("vertices", verts), ("triangles", tris)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def _triangle_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    return 0.5 * np.abs(
        (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1])
    )


def boundary_points(width: int, height: int) -> np.ndarray:
    """4 corners plus 4 edge midpoints of the crop, on pixel centers."""
    x1, y1 = float(width - 1), float(height - 1)
    return np.array(
        [
            [0.0, 0.0], [x1, 0.0], [x1, y1], [0.0, y1],
            [x1 / 2, 0.0], [x1, y1 / 2], [x1 / 2, y1], [0.0, y1 / 2],
        ]
    )


def delaunay_triangulation(points: np.ndarray) -> np.ndarray:
    """Delaunay simplices of a 2-d point set (scipy/Qhull backed)."""
    pts = np.asarray(points, dtype=np.float64)
    if len(np.unique(pts, axis=0)) != len(pts):
        raise GeometryError("duplicate vertices in triangulation input")
    try:
        tri = Delaunay(pts)
    except QhullError as exc:
        raise GeometryError(f"degenerate triangulation input: {exc}") from None
    if len(tri.coplanar):
        raise GeometryError("triangulation dropped input vertices")
    return tri.simplices.astype(np.int64)


def delaunay_mesh(landmarks: LandmarkSet, width: int, height: int) -> TriangleMesh:
    """Mesh over the 68 landmarks (clamped into the crop) plus 8 boundary points."""
    pts = landmarks.points.copy()
    pts[:, 0] = np.clip(pts[:, 0], 0.0, width - 1.0)
    pts[:, 1] = np.clip(pts[:, 1], 0.0, height - 1.0)
    vertices = np.vstack([pts, boundary_points(width, height)])
    return TriangleMesh(vertices=vertices, triangles=delaunay_triangulation(vertices))


def _barycentric(tri: np.ndarray, xs: np.ndarray, ys: np.ndarray):
    """Barycentric coordinates of points w.r.t. one triangle (3, 2)."""
    d = (tri[1, 1] - tri[2, 1]) * (tri[0, 0] - tri[2, 0]) + (tri[2, 0] - tri[1, 0]) * (
        tri[0, 1] - tri[2, 1]
    )
    if abs(d) < 2 * DEGENERATE_TRIANGLE_AREA:
        raise GeometryError("degenerate triangle in piecewise map")
    w0 = ((tri[1, 1] - tri[2, 1]) * (xs - tri[2, 0]) + (tri[2, 0] - tri[1, 0]) * (ys - tri[2, 1])) / d
    w1 = ((tri[2, 1] - tri[0, 1]) * (xs - tri[2, 0]) + (tri[0, 0] - tri[2, 0]) * (ys - tri[2, 1])) / d
    return w0, w1, 1.0 - w0 - w1


def piecewise_affine_map(
    points: np.ndarray,
    src_vertices: np.ndarray,
    dst_vertices: np.ndarray,
    triangles: np.ndarray,
) -> np.ndarray:
    """Evaluate the triangle-wise affine map at source points.

    A point sitting on a mesh vertex is mapped through a triangle incident
    to that vertex, which lands on the destination vertex even when the
    source triangles overlap (the correspondence need not be bijective).
    Other points are located in the first source triangle containing them.
    """
    pts = np.asarray(points, dtype=np.float64)
    out = np.empty_like(pts)
    remaining = np.ones(len(pts), dtype=bool)
    eps = 1e-9

    def map_through(tri: np.ndarray, idx: np.ndarray) -> None:
        w0, w1, w2 = _barycentric(src_vertices[tri], pts[idx, 0], pts[idx, 1])
        d = dst_vertices[tri]
        out[idx, 0] = w0 * d[0, 0] + w1 * d[1, 0] + w2 * d[2, 0]
        out[idx, 1] = w0 * d[0, 1] + w1 * d[1, 1] + w2 * d[2, 1]

    for pidx in range(len(pts)):
        d2 = np.sum((src_vertices - pts[pidx]) ** 2, axis=1)
        vertex = int(np.argmin(d2))
        if d2[vertex] <= eps * eps:
            incident = np.flatnonzero((triangles == vertex).any(axis=1))
            if incident.size:
                map_through(triangles[incident[0]], np.array([pidx]))
                remaining[pidx] = False

    for tri in triangles:
        if not remaining.any():
            break
        idx = np.flatnonzero(remaining)
        w0, w1, w2 = _barycentric(src_vertices[tri], pts[idx, 0], pts[idx, 1])
        inside = (w0 >= -eps) & (w1 >= -eps) & (w2 >= -eps)
        if not inside.any():
            continue
        sel = idx[inside]
        map_through(tri, sel)
        remaining[sel] = False
    if remaining.any():
        raise GeometryError("point outside the triangulated region")
    return out


def warp_to_target(
    probe_img: RasterImage,
    probe_lm: LandmarkSet,
    target_lm: LandmarkSet,
    intensity: float = 1.0,
) -> RasterImage:
    """Piecewise-affine warp of the probe onto the target landmark geometry.

    Both landmark sets must live in the same canonical frame (align the
    faces first). The triangle topology comes from the Delaunay mesh of the
    (intensity-blended) target landmarks; per triangle, the affine map from
    target to probe triangle is applied via backward mapping with bilinear
    sampling. Output size equals the input size, and the warped face shows
    its features at the target landmark positions by construction.
    """
    if not (0.0 <= intensity <= 1.0):
        raise ValueError("intensity must lie in [0, 1]")
    h, w = probe_img.height, probe_img.width
    eff = probe_lm.points + intensity * (target_lm.points - probe_lm.points)
    mesh = delaunay_mesh(LandmarkSet(eff), w, h)

    probe_pts = probe_lm.points.copy()
    probe_pts[:, 0] = np.clip(probe_pts[:, 0], 0.0, w - 1.0)
    probe_pts[:, 1] = np.clip(probe_pts[:, 1], 0.0, h - 1.0)
    probe_vertices = np.vstack([probe_pts, boundary_points(w, h)])
    if np.any(_triangle_areas(probe_vertices, mesh.triangles) < DEGENERATE_TRIANGLE_AREA):
        raise GeometryError("probe landmarks degenerate a warp triangle")

    src = probe_img.pixels.astype(np.float64)
    out = np.zeros((h, w, 3), dtype=np.float64)
    claimed = np.zeros((h, w), dtype=bool)
    eps = 1e-9
    for tri in mesh.triangles:
        t = mesh.vertices[tri]
        p = probe_vertices[tri]
        x0 = max(int(math.floor(t[:, 0].min())), 0)
        x1 = min(int(math.ceil(t[:, 0].max())), w - 1)
        y0 = max(int(math.floor(t[:, 1].min())), 0)
        y1 = min(int(math.ceil(t[:, 1].max())), h - 1)
        if x1 < x0 or y1 < y0:
            continue
        gy, gx = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
        w0, w1, w2 = _barycentric(t, gx.astype(np.float64), gy.astype(np.float64))
        sel = (w0 >= -eps) & (w1 >= -eps) & (w2 >= -eps) & ~claimed[y0 : y1 + 1, x0 : x1 + 1]
        if not sel.any():
            continue
        sx = w0[sel] * p[0, 0] + w1[sel] * p[1, 0] + w2[sel] * p[2, 0]
        sy = w0[sel] * p[0, 1] + w1[sel] * p[1, 1] + w2[sel] * p[2, 1]
        values = bilinear_sample(src, sx, sy)
        yy, xx = gy[sel], gx[sel]
        out[yy, xx] = values
        claimed[yy, xx] = True
    if not claimed.all():
        raise GeometryError("warp mesh failed to cover the crop")
    return RasterImage(np.clip(np.rint(out), 0, 255).astype(np.uint8))


# ---------------------------------------------------------------------------
# makeup color transfer


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Convex hull vertices (monotone chain), counter-clockwise."""
    pts = np.unique(np.asarray(points, dtype=np.float64), axis=0)
    if len(pts) < 3:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def scale_hull(hull: np.ndarray, factor: float) -> np.ndarray:
    centroid = hull.mean(axis=0)
    return centroid + factor * (hull - centroid)


def fill_convex_polygon(hull: np.ndarray, width: int, height: int) -> np.ndarray:
    """Boolean mask of pixel centers inside a convex polygon (edges inclusive)."""
    if len(hull) < 3:
        return np.zeros((height, width), dtype=bool)
    gy, gx = np.mgrid[0:height, 0:width]
    mask = np.ones((height, width), dtype=bool)
    n = len(hull)
    for i in range(n):
        a = hull[i]
        b = hull[(i + 1) % n]
        # counter-clockwise hull: interior is on the left of every edge
        side = (b[0] - a[0]) * (gy - a[1]) - (b[1] - a[1]) * (gx - a[0])
        mask &= side >= -1e-9
        if not mask.any():
            break
    return mask


def region_masks(landmarks: LandmarkSet, width: int, height: int,
                 eye_dilation: float = EYE_REGION_DILATION) -> dict[str, np.ndarray]:
    """Pairwise-disjoint makeup region masks, all inside the face hull.

    lips: hull of points 48-67; eye_left / eye_right: hulls of 36-41 and
    42-47 dilated about their centroids; skin: the rest of the face hull
    (jawline and eyebrows, points 0-26).
    """
    pts = landmarks.points
    face = fill_convex_polygon(convex_hull(pts[JAW_IDX.start : BROW_IDX.stop]), width, height)
    lips = fill_convex_polygon(convex_hull(pts[LIP_IDX.start : LIP_IDX.stop]), width, height) & face
    eye_left = (
        fill_convex_polygon(
            scale_hull(convex_hull(pts[LEFT_EYE_IDX.start : LEFT_EYE_IDX.stop]), eye_dilation),
            width,
            height,
        )
        & face
        & ~lips
    )
    eye_right = (
        fill_convex_polygon(
            scale_hull(convex_hull(pts[RIGHT_EYE_IDX.start : RIGHT_EYE_IDX.stop]), eye_dilation),
            width,
            height,
        )
        & face
        & ~lips
        & ~eye_left
    )
    skin = face & ~lips & ~eye_left & ~eye_right
    return {"face": face, "lips": lips, "eye_left": eye_left, "eye_right": eye_right, "skin": skin}


# BT.601 full-range RGB <-> YCbCr; Y carries luminance, Cb/Cr the chroma
_YCBCR_FORWARD = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.299 / 1.772, -0.587 / 1.772, 0.886 / 1.772],
        [0.701 / 1.402, -0.587 / 1.402, -0.114 / 1.402],
    ]
)
_YCBCR_OFFSET = np.array([0.0, 128.0, 128.0])
_YCBCR_INVERSE = np.linalg.inv(_YCBCR_FORWARD)


def rgb_to_ycbcr(rgb: np.ndarray) -> np.ndarray:
    return rgb @ _YCBCR_FORWARD.T + _YCBCR_OFFSET


def ycbcr_to_rgb(ycc: np.ndarray) -> np.ndarray:
    return (ycc - _YCBCR_OFFSET) @ _YCBCR_INVERSE.T


TRANSFER_REGIONS = ("lips", "eye_left", "eye_right", "skin")


def makeup_color_transfer(
    probe_img: RasterImage,
    probe_lm: LandmarkSet,
    target_img: RasterImage,
    target_lm: LandmarkSet,
    eye_dilation: float = EYE_REGION_DILATION,
) -> RasterImage:
    """Match each makeup region's channel moments to the target's.

    Per region and YCbCr channel, the probe values are shifted and scaled
    so mean and standard deviation equal the target region's, then clamped
    back to the valid range. Pixels outside every region are untouched.
    """
    if (probe_img.height, probe_img.width) != (target_img.height, target_img.width):
        raise MpadError("probe and target images must share the canonical size")
    h, w = probe_img.height, probe_img.width
    probe_masks = region_masks(probe_lm, w, h, eye_dilation)
    target_masks = region_masks(target_lm, w, h, eye_dilation)
    probe_ycc = rgb_to_ycbcr(probe_img.pixels.astype(np.float64))
    target_ycc = rgb_to_ycbcr(target_img.pixels.astype(np.float64))

    out = probe_img.pixels.copy()
    for name in TRANSFER_REGIONS:
        pm = probe_masks[name]
        tm = target_masks[name]
        if not pm.any() or not tm.any():
            raise GeometryError(f"empty {name} region mask; landmarks are degenerate")
        pvals = probe_ycc[pm]
        tvals = target_ycc[tm]
        p_mean = pvals.mean(axis=0)
        p_std = pvals.std(axis=0)
        t_mean = tvals.mean(axis=0)
        t_std = tvals.std(axis=0)
        scale = np.where(p_std > 1e-12, t_std / np.maximum(p_std, 1e-12), 1.0)
        transferred = (pvals - p_mean) * scale + t_mean
        rgb = ycbcr_to_rgb(transferred)
        out[pm] = np.clip(np.rint(rgb), 0, 255).astype(np.uint8)
    return RasterImage(out)


# ---------------------------------------------------------------------------
# quality gates


@dataclass(frozen=True)
class QualityGateReport:
    frontal_pose: bool
    yaw_asymmetry: float
    mouth_closed: bool
    lip_gap: float
    landmark_sanity: bool

    @property
    def passed(self) -> bool:
        return self.frontal_pose and self.mouth_closed and self.landmark_sanity

    def failed_gates(self) -> tuple[str, ...]:
        names = []
        if not self.frontal_pose:
            names.append("frontal_pose")
        if not self.mouth_closed:
            names.append("mouth_closed")
        if not self.landmark_sanity:
            names.append("landmark_sanity")
        return tuple(names)


def quality_gate(
    landmarks: LandmarkSet,
    frontal_max: float = FRONTAL_MAX_ASYMMETRY,
    mouth_max: float = MOUTH_MAX_GAP,
    sanity_box: float = SANITY_BOX,
) -> QualityGateReport:
    """Landmark-geometry screening for the synthesis pools.

    frontal_pose: |d(nose tip 33, jaw 0) - d(nose tip 33, jaw 16)| over the
    inter-ocular distance stays within ``frontal_max``. mouth_closed: mean
    inner-lip gap of pairs (61,67), (62,66), (63,65) over the inter-ocular
    distance stays within ``mouth_max``. landmark_sanity: eye-normalized
    landmarks stay inside the [-box, box]^2 square.
    """
    pts = landmarks.points
    left, right = eye_centers(landmarks)
    iod = float(np.hypot(*(right - left)))
    if iod <= 0.0:
        return QualityGateReport(False, math.inf, False, math.inf, False)
    nose = pts[33]
    asym = abs(float(np.hypot(*(nose - pts[0]))) - float(np.hypot(*(nose - pts[16])))) / iod
    gap = float(
        np.mean([np.hypot(*(pts[a] - pts[b])) for a, b in ((61, 67), (62, 66), (63, 65))])
    ) / iod
    normalized = normalize_landmarks(landmarks)
    sane = bool(np.all(np.abs(normalized) <= sanity_box))
    return QualityGateReport(
        frontal_pose=asym <= frontal_max,
        yaw_asymmetry=asym,
        mouth_closed=gap <= mouth_max,
        lip_gap=gap,
        landmark_sanity=sane,
    )


# ---------------------------------------------------------------------------
# corpus generation


@dataclass(frozen=True)
class CorpusResult:
    manifest_path: str
    attack_count: int
    bona_fide_count: int
    with_replacement: bool


def _sanitize_id(raw: str) -> str:
    return re.sub(r"[^A-Za-z0-9_-]", "-", raw)


def _require(path: str | None, pair_id: str, what: str) -> str:
    if not path:
        raise MpadError(f"pool record {pair_id!r} is missing its {what}")
    return path


def _relative_cell(path: str | None, out_dir: Path) -> str:
    if not path:
        return ""
    return os.path.relpath(path, out_dir)


def generate_corpus(
    targets: list[PairRecord],
    probes: list[PairRecord],
    seed: int,
    count: int,
    out_dir,
    crop: int = 224,
    intensity: float = 1.0,
    eye_dilation: float = EYE_REGION_DILATION,
) -> CorpusResult:
    """Emit ``count`` synthetic attacks plus the probe pool's bona fide pairs.

    Pool rows are one per subject; ``pair_id`` is the subject key and
    same-subject target/probe combinations are never drawn. Pairing comes
    from a seeded generator whose sequence is drawn up front, so the corpus
    is a pure function of (pools, seed, count); the manifest preamble
    records seed, counts and whether sampling fell back to replacement.

    Target rows contribute their reference image/landmarks (the makeup
    source); probe rows act as bona fide subjects, their probe side being
    warped onto the target geometry and color-matched per makeup region.
    The synthetic probe is paired against the target's reference files
    under the attack label; embeddings for synthetic probes are left empty
    for an external extractor to fill in.
    """
    if not targets or not probes:
        raise MpadError("target and probe pools must be non-empty")
    if count < 0:
        raise MpadError("count must be non-negative")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    valid_pairs = [
        (ti, pi)
        for ti in range(len(targets))
        for pi in range(len(probes))
        if targets[ti].pair_id != probes[pi].pair_id
    ]
    if count > 0 and not valid_pairs:
        raise MpadError("no cross-subject target/probe pairs available")

    rng = np.random.default_rng(seed)
    with_replacement = count > len(valid_pairs)
    if with_replacement:
        chosen = rng.integers(0, len(valid_pairs), size=count)
    else:
        chosen = rng.permutation(len(valid_pairs))[:count]

    aligned_targets: dict[int, tuple] = {}
    aligned_probes: dict[int, tuple] = {}

    def aligned_target(ti: int):
        if ti not in aligned_targets:
            rec = targets[ti]
            img = ppm.read_ppm(_require(rec.reference.image, rec.pair_id, "reference image"))
            lm = load_landmarks(_require(rec.reference.landmarks, rec.pair_id, "reference landmarks"))
            face = align_face(img, lm, crop)
            aligned_targets[ti] = (face, align_landmarks(face, lm))
        return aligned_targets[ti]

    def aligned_probe(pi: int):
        if pi not in aligned_probes:
            rec = probes[pi]
            img = ppm.read_ppm(_require(rec.probe.image, rec.pair_id, "probe image"))
            lm = load_landmarks(_require(rec.probe.landmarks, rec.pair_id, "probe landmarks"))
            face = align_face(img, lm, crop)
            aligned_probes[pi] = (face, align_landmarks(face, lm))
        return aligned_probes[pi]

    rows: list[list[str]] = []
    for k, pair_index in enumerate(chosen):
        ti, pi = valid_pairs[int(pair_index)]
        target = targets[ti]
        probe = probes[pi]
        t_face, t_lm = aligned_target(ti)
        p_face, p_lm = aligned_probe(pi)

        warped = warp_to_target(p_face.image, p_lm, t_lm, intensity)
        eff_lm = LandmarkSet(p_lm.points + intensity * (t_lm.points - p_lm.points))
        synth = makeup_color_transfer(warped, eff_lm, t_face.image, t_lm, eye_dilation)

        pair_id = f"attack_{k:05d}_{_sanitize_id(target.pair_id)}_{_sanitize_id(probe.pair_id)}"
        image_name = f"{pair_id}.ppm"
        lm_name = f"{pair_id}.landmarks.txt"
        ppm.write_ppm(synth, out / image_name)
        save_landmarks(eff_lm, out / lm_name)

        rows.append(
            [
                pair_id,
                _relative_cell(target.reference.image, out),
                image_name,
                _relative_cell(target.reference.landmarks, out),
                lm_name,
                _relative_cell(target.reference.embedding, out),
                "",
                "attack",
                "train",
            ]
        )

    for probe in probes:
        rows.append(
            [
                probe.pair_id,
                _relative_cell(probe.reference.image, out),
                _relative_cell(probe.probe.image, out),
                _relative_cell(probe.reference.landmarks, out),
                _relative_cell(probe.probe.landmarks, out),
                _relative_cell(probe.reference.embedding, out),
                _relative_cell(probe.probe.embedding, out),
                "bona_fide",
                probe.split,
            ]
        )

    manifest_path = out / "manifest.csv"
    save_manifest(
        rows,
        manifest_path,
        metadata={
            "seed": str(seed),
            "attack_count": str(len(chosen)),
            "bona_fide_count": str(len(probes)),
            "with_replacement": "true" if with_replacement else "false",
            "warp_intensity": fmt_float(intensity),
            "pairing": "synthetic probe vs. the supplied target reference files",
        },
    )
    return CorpusResult(
        manifest_path=str(manifest_path),
        attack_count=len(chosen),
        bona_fide_count=len(probes),
        with_replacement=with_replacement,
    )
