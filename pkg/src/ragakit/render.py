"""Mel spectrogram -> 256x256 RGB image, and image -> network input."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import EmptyMatrix
from .features import FrameMatrix

IMAGE_SIZE = 256
TOP_DB = 80.0

# Anchor colours of a viridis-like perceptual map, evenly spaced on [0, 1].
# The 256-entry table below is derived from them by linear interpolation and
# rounding, so it is identical on every platform.
_ANCHORS = np.array(
    [
        (68, 1, 84),
        (72, 40, 120),
        (62, 74, 137),
        (49, 104, 142),
        (38, 130, 142),
        (31, 158, 137),
        (53, 183, 121),
        (110, 206, 88),
        (181, 222, 43),
        (253, 231, 37),
    ],
    dtype=np.float64,
)


def _build_lut() -> np.ndarray:
    pos = np.linspace(0.0, 1.0, len(_ANCHORS))
    x = np.arange(256) / 255.0
    lut = np.stack([np.interp(x, pos, _ANCHORS[:, ch]) for ch in range(3)], axis=1)
    lut = np.floor(lut + 0.5).astype(np.uint8)
    lut.setflags(write=False)
    return lut


COLORMAP = _build_lut()


def power_to_db(m: FrameMatrix | np.ndarray, top_db: float = TOP_DB) -> np.ndarray:
    """Max-referenced decibels clamped to [-top_db, 0]."""
    values = np.asarray(getattr(m, "values", m), dtype=np.float64)
    peak = values.max() if values.size else 0.0
    if peak <= 0:
        return np.full(values.shape, -top_db)
    ratio = np.maximum(values / peak, 10.0 ** (-top_db / 10.0))
    return np.clip(10.0 * np.log10(ratio), -top_db, 0.0)


def _linear_resize_axis(a: np.ndarray, size: int, axis: int) -> np.ndarray:
    n = a.shape[axis]
    if n == 1:
        return np.repeat(a, size, axis=axis)
    pos = np.linspace(0.0, n - 1, size)
    lo = np.minimum(np.floor(pos).astype(int), n - 2)
    frac = pos - lo
    a0 = np.take(a, lo, axis=axis)
    a1 = np.take(a, lo + 1, axis=axis)
    shape = [1] * a.ndim
    shape[axis] = size
    frac = frac.reshape(shape)
    return a0 * (1 - frac) + a1 * frac


def resize_bilinear(a: np.ndarray, height: int, width: int) -> np.ndarray:
    """Corner-aligned bilinear resize of a 2-D array."""
    return _linear_resize_axis(_linear_resize_axis(a, height, 0), width, 1)


def render(m_db: np.ndarray, top_db: float = TOP_DB, size: int = IMAGE_SIZE) -> np.ndarray:
    """Colour-map a dB matrix (bins x frames) to a (size, size, 3) uint8 image.

    Low frequencies end up in the bottom row.
    """
    m_db = np.asarray(getattr(m_db, "values", m_db), dtype=np.float64)
    if m_db.ndim != 2 or m_db.size == 0:
        raise EmptyMatrix(f"cannot render matrix of shape {m_db.shape}")
    img = resize_bilinear(m_db, size, size)[::-1]
    level = np.clip((img + top_db) / top_db, 0.0, 1.0)
    idx = np.floor(level * 255.0 + 0.5).astype(np.intp)
    return COLORMAP[idx]


def render_clip(clip, top_db: float = TOP_DB) -> np.ndarray:
    from .features import mel_spectrogram

    return render(power_to_db(mel_spectrogram(clip), top_db), top_db)


def image_to_input(img: np.ndarray) -> np.ndarray:
    return np.asarray(img, dtype=np.float32) / np.float32(255.0)


def save_png(path, img: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(img, dtype=np.uint8), mode="RGB").save(path, format="PNG")


def load_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)
