"""Shared synthetic-face builders for the test suite.

The generated landmark layouts follow the standard 68-point scheme with
proportions compact enough to satisfy the default quality gates, and the
face renderers paint region colors that the color-transfer masks are
guaranteed to sample.
"""

import math

import numpy as np
import pytest

from mpad.core import LandmarkSet, RasterImage


def face_landmark_points(
    cx: float = 112.0,
    cy: float = 104.0,
    scale: float = 96.0,
    mouth_gap: float = 0.02,
    nose_shift: float = 0.0,
) -> np.ndarray:
    """68 synthetic face points; mouth_gap and nose_shift steer the gates.

    mouth_gap is the inner-lip gap as a fraction of the inter-ocular
    distance; nose_shift displaces the nose horizontally in scale units to
    break frontal symmetry.
    """
    p = np.zeros((68, 2))
    # jawline: left ear over the chin to the right ear
    for i in range(17):
        a = math.pi - math.pi * i / 16.0
        p[i] = (cx + 0.95 * scale * math.cos(a), cy + 0.85 * scale * math.sin(a))
    # eyebrows
    for j in range(5):
        p[17 + j] = (cx - (0.55 - 0.1 * j) * scale, cy - (0.40 + 0.03 * math.sin(j * math.pi / 4)) * scale)
        p[22 + j] = (cx + (0.15 + 0.1 * j) * scale, cy - (0.40 + 0.03 * math.sin((4 - j) * math.pi / 4)) * scale)
    # nose bridge and base
    for j in range(4):
        p[27 + j] = (cx + nose_shift * scale, cy + (-0.20 + 0.11 * j) * scale)
    for j in range(5):
        p[31 + j] = (cx + (j - 2) * 0.05 * scale + nose_shift * scale, cy + 0.20 * scale)
    # eyes: hexagons around the two centroids
    eye = np.array([(-1.2, 0.0), (-0.5, -0.5), (0.5, -0.5), (1.2, 0.0), (0.5, 0.5), (-0.5, 0.5)]) * 0.1 * scale
    p[36:42] = eye + (cx - 0.35 * scale, cy - 0.15 * scale)
    p[42:48] = eye + (cx + 0.35 * scale, cy - 0.15 * scale)
    # lips: outer ellipse ring and an inner ring with a controlled gap
    lip_center = np.array([cx, cy + 0.55 * scale])
    for j in range(12):
        phi = math.pi - 2.0 * math.pi * j / 12.0
        p[48 + j] = lip_center + (0.25 * scale * math.cos(phi), -0.08 * scale * math.sin(phi))
    gap = mouth_gap * 0.7 * scale  # inter-ocular distance is 0.7 * scale
    p[60] = lip_center + (-0.18 * scale, 0.0)
    p[64] = lip_center + (0.18 * scale, 0.0)
    p[61] = lip_center + (-0.09 * scale, -gap / 2)
    p[62] = lip_center + (0.0, -gap / 2)
    p[63] = lip_center + (0.09 * scale, -gap / 2)
    p[65] = lip_center + (0.09 * scale, gap / 2)
    p[66] = lip_center + (0.0, gap / 2)
    p[67] = lip_center + (-0.09 * scale, gap / 2)
    return p


def face_landmarks(**kwargs) -> LandmarkSet:
    return LandmarkSet(face_landmark_points(**kwargs))


def render_flat_face(
    landmarks: LandmarkSet,
    width: int = 224,
    height: int = 224,
    skin=(200, 160, 130),
    lip=(150, 40, 60),
    eye=(60, 40, 30),
) -> RasterImage:
    """Skin-colored canvas with eye disks and a lip ellipse.

    The painted areas strictly cover the color-transfer region masks, so a
    region's pixels all carry the intended paint color.
    """
    pts = landmarks.points
    left_eye = pts[36:42].mean(axis=0)
    right_eye = pts[42:48].mean(axis=0)
    scale = float(np.hypot(*(right_eye - left_eye))) / 0.7
    img = np.empty((height, width, 3), dtype=np.uint8)
    img[:] = skin
    gy, gx = np.mgrid[0:height, 0:width]
    for center in (left_eye, right_eye):
        mask = (gx - center[0]) ** 2 + (gy - center[1]) ** 2 <= (0.21 * scale) ** 2
        img[mask] = eye
    lip_center = pts[48:68].mean(axis=0)
    mask = ((gx - lip_center[0]) / (0.30 * scale)) ** 2 + ((gy - lip_center[1]) / (0.13 * scale)) ** 2 <= 1.0
    img[mask] = lip
    return RasterImage(img)


def render_smooth_image(width: int, height: int, phase: float = 0.0) -> RasterImage:
    """Low-frequency sinusoid texture; friendly to interpolation bounds."""
    gy, gx = np.mgrid[0:height, 0:width].astype(np.float64)
    channels = [
        127.5 + 90.0 * np.sin(2 * np.pi * (gx * 1.3 / width + gy * 0.4 / height) + phase),
        127.5 + 90.0 * np.sin(2 * np.pi * (gx * 0.5 / width - gy * 1.1 / height) + phase + 1.0),
        127.5 + 90.0 * np.cos(2 * np.pi * (gx * 0.9 / width + gy * 0.8 / height) + phase + 2.0),
    ]
    return RasterImage(np.clip(np.rint(np.stack(channels, axis=-1)), 0, 255).astype(np.uint8))


@pytest.fixture
def canonical_landmarks() -> LandmarkSet:
    return face_landmarks()
