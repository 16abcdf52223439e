"""Raster images as numpy arrays, binary PNM IO and PSNR.

Images are ``(height, width, channels)`` arrays, row-major and
channel-interleaved. 8-bit images use ``uint8``; working images use
``float64``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import (
    PnmHeaderError,
    PnmMaxvalError,
    PnmTruncatedError,
    PnmUnsupportedFormat,
)

INFINITE_PSNR = math.inf

_MAGIC_CHANNELS = {b"P5": 1, b"P6": 3}


def as_image_u8(arr) -> np.ndarray:
    """Validate and normalise an 8-bit image to shape (H, W, K)."""
    a = np.asarray(arr)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3 or a.shape[2] not in (1, 3):
        raise ValueError(f"expected (H, W, 1|3) image, got shape {a.shape}")
    if a.dtype != np.uint8:
        if np.any(a < 0) or np.any(a > 255) or np.any(a != np.round(a)):
            raise ValueError("8-bit image samples must be integers in [0, 255]")
        a = a.astype(np.uint8)
    return a


def to_float(img: np.ndarray) -> np.ndarray:
    return np.asarray(img, dtype=np.float64)


def to_u8(img: np.ndarray) -> np.ndarray:
    """Clamp-round a real image to 8 bits."""
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def _tokens(data: bytes, count: int):
    """Read ``count`` whitespace separated header tokens, skipping comments.

    Returns the tokens and the offset of the single whitespace byte that
    terminates the last token.
    """
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        if pos >= n:
            raise PnmHeaderError("header ends early")
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        tokens.append(data[start:pos])
    if pos >= n or not data[pos : pos + 1].isspace():
        raise PnmHeaderError("header must end with a single whitespace byte")
    return tokens, pos


def load_pnm(data: bytes) -> np.ndarray:
    """Decode a binary PGM (P5) or PPM (P6) with maxval 255."""
    magic = data[:2]
    if magic not in _MAGIC_CHANNELS:
        raise PnmUnsupportedFormat(f"unsupported PNM magic {magic!r}")
    channels = _MAGIC_CHANNELS[magic]
    tokens, pos = _tokens(data, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise PnmHeaderError(f"non-numeric header field in {tokens[1:]}") from exc
    if width <= 0 or height <= 0:
        raise PnmHeaderError(f"bad dimensions {width}x{height}")
    if maxval != 255:
        raise PnmMaxvalError(f"maxval must be 255, got {maxval}")
    size = width * height * channels
    payload = data[pos + 1 : pos + 1 + size]
    if len(payload) < size:
        raise PnmTruncatedError(f"payload has {len(payload)} of {size} bytes")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels).copy()


def save_pnm(img: np.ndarray) -> bytes:
    img = as_image_u8(img)
    h, w, k = img.shape
    magic = b"P5" if k == 1 else b"P6"
    return magic + b"\n%d %d\n255\n" % (w, h) + img.tobytes()


def read_pnm(path) -> np.ndarray:
    with open(path, "rb") as f:
        return load_pnm(f.read())


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """PSNR in dB over all samples; ``math.inf`` when the images are equal."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2)
    if mse == 0:
        return INFINITE_PSNR
    return 10.0 * math.log10(255.0**2 / mse)
