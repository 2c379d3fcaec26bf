"""Eye-anchored face alignment and landmark normalization.

One canonical frame is shared by the texture baseline and the synthesis
pipeline: a square crop with the left eye centroid mapped to
(0.35 W, 0.40 H) and the right eye centroid to (0.65 W, 0.40 H).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LEFT_EYE_IDX, RIGHT_EYE_IDX, LandmarkSet, RasterImage
from .errors import GeometryError

LEFT_EYE_ANCHOR = (0.35, 0.40)   # fraction of crop width / height
RIGHT_EYE_ANCHOR = (0.65, 0.40)
DEFAULT_CROP = 224


@dataclass(frozen=True, eq=False)
class AlignedFace:
    """A face resampled into the canonical crop.

    ``transform`` is the 2x3 similarity matrix mapping source pixel
    coordinates into the canonical frame; its linear part has positive
    determinant.
    """

    image: RasterImage
    transform: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.transform, dtype=np.float64)
        if m.shape != (2, 3):
            raise ValueError(f"expected a 2x3 transform, got shape {m.shape}")
        a, b = m[0, 0], m[0, 1]
        if not (np.isclose(m[1, 1], a, atol=1e-9) and np.isclose(m[1, 0], -b, atol=1e-9)):
            raise ValueError("transform is not a similarity")
        if a * a + b * b <= 0:
            raise ValueError("transform has non-positive determinant")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "transform", m)


def eye_centers(landmarks: LandmarkSet) -> tuple[np.ndarray, np.ndarray]:
    """Centroids of the six left-eye (36-41) and right-eye (42-47) points."""
    pts = landmarks.points
    left = pts[LEFT_EYE_IDX.start : LEFT_EYE_IDX.stop].mean(axis=0)
    right = pts[RIGHT_EYE_IDX.start : RIGHT_EYE_IDX.stop].mean(axis=0)
    return left, right


def similarity_from_eye_pair(src_left, src_right, dst_left, dst_right) -> np.ndarray:
    """2x3 similarity mapping the source eye pair onto the destination pair.

    Solved in closed form as the complex ratio (dst_right - dst_left) /
    (src_right - src_left); two point correspondences pin all four degrees
    of freedom (uniform scale, rotation, translation).
    """
    src_left = np.asarray(src_left, dtype=np.float64)
    src_right = np.asarray(src_right, dtype=np.float64)
    sv = src_right - src_left
    d2 = float(sv[0] * sv[0] + sv[1] * sv[1])
    if d2 <= 0.0:
        raise GeometryError("eye centers coincide; alignment is undefined")
    dv = np.asarray(dst_right, dtype=np.float64) - np.asarray(dst_left, dtype=np.float64)
    ar = (dv[0] * sv[0] + dv[1] * sv[1]) / d2
    ai = (dv[1] * sv[0] - dv[0] * sv[1]) / d2
    linear = np.array([[ar, -ai], [ai, ar]])
    t = np.asarray(dst_left, dtype=np.float64) - linear @ src_left
    return np.hstack([linear, t[:, None]])


def apply_affine(transform: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Apply a 2x3 affine to an (n, 2) point array."""
    pts = np.asarray(points, dtype=np.float64)
    return pts @ transform[:, :2].T + transform[:, 2]


def invert_affine(transform: np.ndarray) -> np.ndarray:
    linear = transform[:, :2]
    det = linear[0, 0] * linear[1, 1] - linear[0, 1] * linear[1, 0]
    if det == 0.0:
        raise GeometryError("affine transform is singular")
    inv = np.array([[linear[1, 1], -linear[0, 1]], [-linear[1, 0], linear[0, 0]]]) / det
    t = -inv @ transform[:, 2]
    return np.hstack([inv, t[:, None]])


def bilinear_sample(pixels: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample (h, w, 3) float pixels at fractional coordinates.

    Corners falling outside the source contribute black, which yields the
    black-fill behavior at crop borders.
    """
    h, w = pixels.shape[:2]
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = (xs - x0)[:, None]
    fy = (ys - y0)[:, None]

    def gather(cx, cy):
        valid = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
        out = np.zeros((cx.size, pixels.shape[2]), dtype=np.float64)
        out[valid] = pixels[cy[valid], cx[valid]]
        return out

    v00 = gather(x0, y0)
    v10 = gather(x0 + 1, y0)
    v01 = gather(x0, y0 + 1)
    v11 = gather(x0 + 1, y0 + 1)
    return (
        v00 * (1 - fx) * (1 - fy)
        + v10 * fx * (1 - fy)
        + v01 * (1 - fx) * fy
        + v11 * fx * fy
    )


def align_face(image: RasterImage, landmarks: LandmarkSet, crop: int = DEFAULT_CROP) -> AlignedFace:
    """Resample a face into the canonical crop via its eye centroids.

    Bilinear interpolation; pixels with no source coverage are black.
    """
    left, right = eye_centers(landmarks)
    dst_left = (LEFT_EYE_ANCHOR[0] * crop, LEFT_EYE_ANCHOR[1] * crop)
    dst_right = (RIGHT_EYE_ANCHOR[0] * crop, RIGHT_EYE_ANCHOR[1] * crop)
    transform = similarity_from_eye_pair(left, right, dst_left, dst_right)
    inverse = invert_affine(transform)
    ys, xs = np.mgrid[0:crop, 0:crop]
    grid = np.column_stack([xs.ravel().astype(np.float64), ys.ravel().astype(np.float64)])
    src = apply_affine(inverse, grid)
    values = bilinear_sample(image.pixels.astype(np.float64), src[:, 0], src[:, 1])
    out = np.clip(np.rint(values), 0, 255).astype(np.uint8).reshape(crop, crop, 3)
    return AlignedFace(image=RasterImage(out), transform=transform)


def align_landmarks(face: AlignedFace, landmarks: LandmarkSet) -> LandmarkSet:
    """Carry a landmark set into the canonical frame of an aligned face."""
    return LandmarkSet(apply_affine(face.transform, landmarks.points))


def normalize_landmarks(landmarks: LandmarkSet) -> np.ndarray:
    """Map 68 points into the eye-anchored unit frame.

    The eye midpoint goes to the origin, the eye line becomes horizontal,
    and the inter-ocular distance becomes 1, so the result is invariant
    under translation, rotation and uniform scaling of the input.
    """
    pts = landmarks.points
    left, right = eye_centers(landmarks)
    v = right - left
    d2 = float(v[0] * v[0] + v[1] * v[1])
    if d2 <= 0.0:
        raise GeometryError("eye centers coincide; normalization is undefined")
    mid = (left + right) / 2.0
    q = pts - mid
    # complex division q / v rotates the eye line onto +x and scales IOD to 1
    out = np.empty_like(q)
    out[:, 0] = (q[:, 0] * v[0] + q[:, 1] * v[1]) / d2
    out[:, 1] = (q[:, 1] * v[0] - q[:, 0] * v[1]) / d2
    return out
