"""Linear, bilinear, and trilinear interpolation plus volume upsampling.

Upsampling is corner-aligned: output index i on an axis with n_out > 1 maps
to source coordinate i * (n_in - 1) / (n_out - 1), so endpoints map to
endpoints and target == source is an exact identity. Axes of extent 1
replicate. An optional normalized Gaussian blur refines upsampled volumes.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionError, DomainError


def _check_weight(a: float, name: str = "a") -> float:
    a = float(a)
    if not (0.0 <= a <= 1.0):
        raise DomainError(f"{name} must lie in [0, 1], got {a}")
    return a


def lerp(v0: float, v1: float, a: float) -> float:
    """v0 * (1 - a) + v1 * a for a in [0, 1]."""
    a = _check_weight(a)
    return v0 * (1.0 - a) + v1 * a


def bilerp(corners, a1: float, a2: float) -> float:
    """Bilinear interpolation over unit-square corners (v00, v10, v01, v11).

    Corner v_ij sits at position (i, j); a1 weights the first index, a2 the
    second.
    """
    v00, v10, v01, v11 = corners
    a1 = _check_weight(a1, "a1")
    a2 = _check_weight(a2, "a2")
    return lerp(v00, v10, a1) * (1.0 - a2) + lerp(v01, v11, a1) * a2


def trilerp(corners, a1: float, a2: float, a3: float) -> float:
    """Trilinear interpolation over unit-cube corners.

    Corners are (v000, v100, v010, v110, v001, v101, v011, v111) with v_pqr
    at position (p, q, r); equals lerp along the third axis of the two
    bilinear face values.
    """
    v000, v100, v010, v110, v001, v101, v011, v111 = corners
    a3 = _check_weight(a3, "a3")
    front = bilerp((v000, v100, v010, v110), a1, a2)
    back = bilerp((v001, v101, v011, v111), a1, a2)
    return front * (1.0 - a3) + back * a3


def _axis_taps(n_in: int, n_out: int):
    """Corner-aligned source taps for one axis: lower index, upper index, frac."""
    if n_out == 1:
        coords = np.zeros(1, dtype=np.float64)
    else:
        coords = np.arange(n_out, dtype=np.float64) * (n_in - 1) / (n_out - 1)
    lo = np.floor(coords).astype(np.intp)
    lo = np.minimum(lo, n_in - 1)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = coords - lo
    return lo, hi, frac


def upsample_trilinear(vol: np.ndarray, target) -> np.ndarray:
    """Resample a T x H x W volume to the target extents, corner-aligned."""
    if vol.ndim != 3:
        raise DimensionError(f"upsample_trilinear expects rank 3, got {vol.ndim}")
    target = tuple(int(n) for n in target)
    if len(target) != 3 or any(n < 1 for n in target):
        raise DimensionError(f"target must be three extents >= 1, got {target}")

    taps = [_axis_taps(vol.shape[i], target[i]) for i in range(3)]
    src = vol.astype(np.float64)
    out = np.zeros(target, dtype=np.float64)
    for dt in (0, 1):
        wt = (1.0 - taps[0][2]) if dt == 0 else taps[0][2]
        it = taps[0][dt]
        for dh in (0, 1):
            wh = (1.0 - taps[1][2]) if dh == 0 else taps[1][2]
            ih = taps[1][dh]
            for dw in (0, 1):
                ww = (1.0 - taps[2][2]) if dw == 0 else taps[2][2]
                iw = taps[2][dw]
                w = wt[:, None, None] * wh[None, :, None] * ww[None, None, :]
                out += w * src[np.ix_(it, ih, iw)]
    return out.astype(vol.dtype)


def upsample_bilinear(img: np.ndarray, target) -> np.ndarray:
    """2-D analogue of upsample_trilinear for H x W images."""
    if img.ndim != 2:
        raise DimensionError(f"upsample_bilinear expects rank 2, got {img.ndim}")
    target = tuple(int(n) for n in target)
    if len(target) != 2 or any(n < 1 for n in target):
        raise DimensionError(f"target must be two extents >= 1, got {target}")

    taps = [_axis_taps(img.shape[i], target[i]) for i in range(2)]
    src = img.astype(np.float64)
    out = np.zeros(target, dtype=np.float64)
    for dh in (0, 1):
        wh = (1.0 - taps[0][2]) if dh == 0 else taps[0][2]
        ih = taps[0][dh]
        for dw in (0, 1):
            ww = (1.0 - taps[1][2]) if dw == 0 else taps[1][2]
            iw = taps[1][dw]
            out += wh[:, None] * ww[None, :] * src[np.ix_(ih, iw)]
    return out.astype(img.dtype)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian with radius ceil(3*sigma)."""
    if sigma < 0:
        raise DomainError(f"sigma must be >= 0, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_refine(vol: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur per axis, edge-inclusive reflected boundary.

    Kernel radius is ceil(3*sigma), normalized to sum 1 so constants are
    preserved; sigma == 0 returns the input unchanged. Axes of extent 1 are
    untouched (blurring a single sample is the identity).
    """
    if sigma < 0:
        raise DomainError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return vol.copy()
    kernel = gaussian_kernel(sigma)
    radius = (len(kernel) - 1) // 2
    out = vol.astype(np.float64)
    for axis in range(vol.ndim):
        if vol.shape[axis] == 1:
            continue
        moved = np.moveaxis(out, axis, -1)
        pad = [(0, 0)] * (vol.ndim - 1) + [(radius, radius)]
        padded = np.pad(moved, pad, mode="symmetric")
        n = moved.shape[-1]
        acc = np.zeros_like(moved)
        for j, w in enumerate(kernel):
            acc += w * padded[..., j : j + n]
        out = np.moveaxis(acc, -1, axis)
    return out.astype(vol.dtype)
