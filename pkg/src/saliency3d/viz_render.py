"""Heatmap colorization, alpha overlays, and bit-exact P6 pixmap output.

The color map is a fixed five-stop ramp (blue, cyan, green, yellow, red at
0, 0.25, 0.5, 0.75, 1) with linear interpolation between stops. All
quantization rounds half-up so golden files compare byte-for-byte across
platforms.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError

_STOPS = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
_COLORS = np.array([
    [0, 0, 255],
    [0, 255, 255],
    [0, 255, 0],
    [255, 255, 0],
    [255, 0, 0],
], dtype=np.float64)


@dataclass
class RgbImage:
    """8-bit RGB raster, pixels shaped (H, W, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise DimensionError(f"pixels must be H x W x 3, got {self.pixels.shape}")
        if self.pixels.shape[0] < 1 or self.pixels.shape[1] < 1:
            raise DimensionError("image extents must be >= 1")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5).astype(np.uint8)


def colorize(frame: np.ndarray) -> RgbImage:
    """Map an H x W saliency frame in [0, 1] to the five-stop heat ramp.

    Values are clamped to [0, 1]; callers renormalize aggregate maps by
    their max beforehand.
    """
    if frame.ndim != 2:
        raise DimensionError(f"frame must be H x W, got rank {frame.ndim}")
    v = np.clip(frame.astype(np.float64), 0.0, 1.0)
    seg = np.clip(np.searchsorted(_STOPS, v, side="right") - 1, 0, len(_STOPS) - 2)
    lo, hi = _STOPS[seg], _STOPS[seg + 1]
    t = (v - lo) / (hi - lo)
    rgb = (1.0 - t)[..., None] * _COLORS[seg] + t[..., None] * _COLORS[seg + 1]
    return RgbImage(_round_half_up(rgb))


def gray_frame(values: np.ndarray) -> RgbImage:
    """Clamped grayscale RGB rendering of a [0, 1] intensity frame."""
    if values.ndim != 2:
        raise DimensionError(f"frame must be H x W, got rank {values.ndim}")
    v = np.clip(values.astype(np.float64), 0.0, 1.0) * 255.0
    g = _round_half_up(v)
    return RgbImage(np.stack([g, g, g], axis=-1))


def overlay(frame: RgbImage, heat: RgbImage, alpha: float = 0.5) -> RgbImage:
    """Per-channel blend round(alpha * heat + (1 - alpha) * frame)."""
    if frame.pixels.shape != heat.pixels.shape:
        raise DimensionError(
            f"overlay dims mismatch: {frame.pixels.shape} vs {heat.pixels.shape}"
        )
    if not (0.0 <= alpha <= 1.0):
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    mix = alpha * heat.pixels.astype(np.float64) + (1.0 - alpha) * frame.pixels
    return RgbImage(_round_half_up(mix))


def write_ppm(img: RgbImage, path) -> None:
    """Binary P6: header "P6\\n<W> <H>\\n255\\n" then raw RGB bytes."""
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.pixels.tobytes(order="C"))


def read_ppm(path) -> RgbImage:
    """Parse the P6 output of write_ppm (maxval 255 only)."""
    raw = Path(path).read_bytes()
    m = re.match(rb"P6\s+(\d+)\s+(\d+)\s+255\s", raw)
    if not m:
        raise FormatError(f"{path}: not a maxval-255 P6 pixmap")
    w, h = int(m.group(1)), int(m.group(2))
    payload = raw[m.end():]
    if len(payload) != w * h * 3:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, expected {w * h * 3}")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3)
    return RgbImage(pixels.copy())
