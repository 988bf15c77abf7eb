"""Resampling primitives: block-average downsampling, Catmull-Rom bicubic
upsampling, bilinear subpixel translation, and separable convolution.

Block averaging (rather than decimation) is used for resolution reduction so
the frequency response of the degradation chain is controlled entirely by
the MTF stage.  Bicubic uses the Catmull-Rom kernel (a = -0.5) with sample
coordinates clamped at the borders; kernel weights are normalized per
column, so constant inputs are reproduced bit-exactly after the float32
round trip.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError
from .raster import Raster

_CUBIC_A = -0.5


def downsample_block(r: Raster, factor: int) -> Raster:
    """Average factor x factor blocks; dims shrink and gsd grows by factor."""
    factor = int(factor)
    if factor < 1:
        raise DataError(f"downsample factor must be >= 1, got {factor}")
    if factor == 1:
        return r
    h, w = r.shape
    if h % factor or w % factor:
        raise DataError(
            f"downsample factor {factor} does not divide {w}x{h} (no implicit cropping)"
        )
    blocks = r.values.reshape(h // factor, factor, w // factor, factor)
    out = blocks.mean(axis=(1, 3), dtype=np.float64).astype(np.float32)
    return Raster(out, gsd=r.gsd * factor, band_name=r.band_name)


def _cubic_weights(t: np.ndarray) -> np.ndarray:
    """Catmull-Rom weights for taps at offsets -1..2; shape (4, len(t))."""
    a = _CUBIC_A
    w = np.empty((4, t.size), dtype=np.float64)
    x = 1.0 + t  # distance of tap -1
    w[0] = a * x**3 - 5 * a * x**2 + 8 * a * x - 4 * a
    w[1] = (a + 2) * t**3 - (a + 3) * t**2 + 1
    x = 1.0 - t
    w[2] = (a + 2) * x**3 - (a + 3) * x**2 + 1
    x = 2.0 - t
    w[3] = a * x**3 - 5 * a * x**2 + 8 * a * x - 4 * a
    w /= w.sum(axis=0)  # exact partition of unity
    return w


def _cubic_axis(values: np.ndarray, factor: int) -> np.ndarray:
    """Upsample along the last axis by an integer factor (center-aligned)."""
    n = values.shape[-1]
    m = n * factor
    sx = (np.arange(m, dtype=np.float64) + 0.5) / factor - 0.5
    base = np.floor(sx).astype(np.int64)
    t = sx - base
    w = _cubic_weights(t)
    out = np.zeros(values.shape[:-1] + (m,), dtype=np.float64)
    for k in range(4):
        idx = np.clip(base + (k - 1), 0, n - 1)
        out += values[..., idx] * w[k]
    return out


def upsample_bicubic(r: Raster, factor: int) -> Raster:
    """Catmull-Rom bicubic upsample; dims grow and gsd shrinks by factor."""
    factor = int(factor)
    if factor < 1:
        raise DataError(f"upsample factor must be >= 1, got {factor}")
    if factor == 1:
        return r
    tmp = _cubic_axis(r.values.astype(np.float64), factor)
    out = _cubic_axis(np.ascontiguousarray(tmp.T), factor).T
    return Raster(out.astype(np.float32), gsd=r.gsd / factor, band_name=r.band_name)


def translate_bilinear(values: np.ndarray, dx: float, dy: float) -> np.ndarray:
    """Shift image content by (dx, dy) pixels with bilinear interpolation.

    out(y, x) samples in(y - dy, x - dx); sample coordinates are clamped to
    the image, duplicating border rows/columns.
    """

    def _axis_shift(arr: np.ndarray, shift: float) -> np.ndarray:
        # along last axis
        n = arr.shape[-1]
        xf = np.clip(np.arange(n, dtype=np.float64) - shift, 0.0, n - 1.0)
        x0 = np.floor(xf).astype(np.int64)
        x1 = np.minimum(x0 + 1, n - 1)
        t = (xf - x0).astype(np.float32)
        return arr[..., x0] * (1.0 - t) + arr[..., x1] * t

    out = _axis_shift(values.astype(np.float32), dx)
    out = _axis_shift(np.ascontiguousarray(out.T), dy).T
    return np.ascontiguousarray(out, dtype=np.float32)


def convolve_separable(
    values: np.ndarray, kernel: np.ndarray, threads: int = 1
) -> np.ndarray:
    """Separable 2-D convolution with half-sample reflect padding.

    The kernel is a symmetric odd-length 1-D tap vector applied along both
    axes.  Work splits into row strips when threads > 1; strip results are
    identical to the single-shot computation (each output pixel sees the
    same taps in the same order).
    """
    from .parallel import map_strips

    k = np.asarray(kernel, dtype=np.float32)
    if k.ndim != 1 or k.size % 2 == 0:
        raise DataError(f"separable kernel must be odd-length 1-D, got shape {k.shape}")
    if k.size == 1:
        return (values * k[0]).astype(np.float32)
    half = k.size // 2

    def _pass(arr: np.ndarray) -> np.ndarray:
        # convolve along last axis
        pad = np.pad(arr, [(0, 0)] * (arr.ndim - 1) + [(half, half)], mode="symmetric")
        out = np.zeros_like(arr, dtype=np.float32)
        n = arr.shape[-1]
        for i in range(k.size):
            out += k[i] * pad[..., i : i + n]
        return out

    def _strip(a0: int, a1: int) -> np.ndarray:
        rows = _pass(values[a0:a1])  # horizontal: rows independent
        return rows

    h = values.shape[0]
    horiz = map_strips(_strip, h, threads)
    # vertical pass: columns independent, strip over columns via transpose
    horiz_t = np.ascontiguousarray(horiz.T)

    def _strip_v(a0: int, a1: int) -> np.ndarray:
        return _pass(horiz_t[a0:a1])

    vert_t = map_strips(_strip_v, horiz_t.shape[0], threads)
    return np.ascontiguousarray(vert_t.T)


def gaussian_kernel(sigma: float, half_width: int | None = None) -> np.ndarray:
    """Sampled Gaussian taps, normalized to sum 1 (float64)."""
    if sigma <= 0:
        return np.array([1.0])
    if half_width is None:
        half_width = max(1, int(np.ceil(4.0 * sigma)))
    n = np.arange(-half_width, half_width + 1, dtype=np.float64)
    k = np.exp(-0.5 * (n / sigma) ** 2)
    return k / k.sum()
