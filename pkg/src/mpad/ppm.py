"""Binary PPM (P6) image carrier, the toolkit's required image format."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .core import RasterImage
from .errors import FormatError


def _read_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read whitespace-separated header tokens, honoring '#' comments.

    Returns the tokens and the offset one byte past the final separator.
    """
    tokens: list[bytes] = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace():
            i += 1
        if start == i:
            raise FormatError("truncated PPM header")
        tokens.append(data[start:i])
        i += 1  # single whitespace byte terminates each token
    return tokens, i


def read_ppm(path) -> RasterImage:
    p = Path(path)
    if not p.is_file():
        raise FormatError(f"image not found: {p}")
    data = p.read_bytes()
    try:
        tokens, offset = _read_tokens(data, 4)
    except FormatError as exc:
        raise FormatError(f"{p}: {exc}") from None
    if tokens[0] != b"P6":
        raise FormatError(f"{p}: not a binary PPM (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError(f"{p}: non-numeric PPM header field") from None
    if width < 1 or height < 1:
        raise FormatError(f"{p}: invalid dimensions {width}x{height}")
    if maxval != 255:
        raise FormatError(f"{p}: unsupported maxval {maxval} (only 255)")
    expected = width * height * 3
    body = data[offset : offset + expected]
    if len(body) != expected:
        raise FormatError(f"{p}: expected {expected} pixel bytes, found {len(body)}")
    pixels = np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3)
    return RasterImage(pixels)


def write_ppm(image: RasterImage, path) -> None:
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + image.pixels.tobytes())
