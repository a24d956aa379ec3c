"""Additive-noise convolution acting on pixel histograms.

Rounding an integer pixel value plus zero-mean noise redistributes
histogram mass between nearby bins.  For Gaussian noise the
redistribution weights have a closed form in the normal CDF, giving a
banded Toeplitz operator.  Mass that would leave the valid pixel range
is folded into the edge bins, matching what saturating arithmetic does
to sampled images, so every column of the implied matrix still sums to
one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import InputError
from .histogram import PixelHistogram


@dataclass(frozen=True)
class NoiseSpec:
    """Noise model selector; only zero-mean Gaussian is supported."""

    sigma: float
    kind: str = "gaussian"

    def __post_init__(self):
        if self.kind != "gaussian":
            raise InputError(f"unsupported noise kind {self.kind!r}")
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise InputError("sigma must be a non-negative real")


@dataclass(frozen=True)
class NoiseMatrix:
    """Banded histogram-blur operator for a fixed pixel range [0, n].

    ``band[d + half_width]`` is the mass moved by offset d; offsets run
    over [-half_width, half_width].  ``boundary_mode`` records how
    out-of-range mass is handled (only clipping is implemented).
    """

    n: int
    band: np.ndarray
    boundary_mode: str = "clip"

    def __post_init__(self):
        if self.boundary_mode != "clip":
            raise InputError(f"unsupported boundary mode {self.boundary_mode!r}")
        band = np.array(self.band, dtype=np.float64, copy=True)
        if band.ndim != 1 or band.size % 2 != 1:
            raise InputError("band must be a vector of odd length")
        if band.min() < 0:
            raise InputError("band weights must be non-negative")
        if abs(band.sum() - 1.0) > 1e-9:
            raise InputError("band weights must sum to 1")
        band.setflags(write=False)
        object.__setattr__(self, "band", band)

    @property
    def half_width(self) -> int:
        return self.band.size // 2


def gaussian_noise_matrix(sigma: float, n: int) -> NoiseMatrix:
    """Histogram blur for zero-mean Gaussian noise of deviation ``sigma``.

    The per-offset weight is the normal CDF mass of the rounding
    interval [d - 1/2, d + 1/2).  The band is truncated where the tail
    mass drops below 1e-9 and renormalized so it is exactly stochastic.
    """
    if not (math.isfinite(sigma) and sigma >= 0):
        raise InputError("sigma must be a non-negative real")
    if n < 1:
        raise InputError("n must be at least 1")
    if sigma == 0.0:
        return NoiseMatrix(n, np.array([1.0]))
    half = int(math.ceil(6.0 * sigma)) + 1
    d = np.arange(-half, half + 1, dtype=np.float64)
    band = ndtr((d + 0.5) / sigma) - ndtr((d - 0.5) / sigma)
    band /= band.sum()
    return NoiseMatrix(n, band)


def apply_noise(r: NoiseMatrix, h: PixelHistogram) -> PixelHistogram:
    """Blur a histogram through the noise operator (O(n * band) time)."""
    if h.n != r.n:
        raise InputError(f"noise matrix is for n={r.n}, histogram has n={h.n}")
    return PixelHistogram(h.bits, fold_convolve(r, h.values))


def fold_convolve(r: NoiseMatrix, rows: np.ndarray) -> np.ndarray:
    """Banded convolution along the last axis with edge folding.

    Accepts a vector or a stack of row vectors of length n + 1.  Mass
    shifted past either end of the range accumulates in the edge bin.
    """
    half = r.half_width
    if half == 0:
        return rows.copy()
    size = rows.shape[-1]
    out = np.zeros_like(rows, dtype=np.float64)
    for idx, w in enumerate(r.band):
        d = idx - half
        if d == 0:
            out += w * rows
        elif d > 0:
            keep = size - d
            if keep > 0:
                out[..., d:] += w * rows[..., :keep]
            out[..., -1] += w * rows[..., max(keep, 0):].sum(axis=-1)
        else:
            m = -d
            keep = size - m
            if keep > 0:
                out[..., :keep] += w * rows[..., m:]
            out[..., 0] += w * rows[..., : min(m, size)].sum(axis=-1)
    return out


def fold_convolve_adjoint(r: NoiseMatrix, rows: np.ndarray) -> np.ndarray:
    """Transpose of :func:`fold_convolve` along the last axis.

    Folding at the edges makes the operator non-symmetric even though
    the band itself is; the adjoint samples the input at clipped
    destinations, which is a correlation against an edge-padded copy.
    """
    half = r.half_width
    if half == 0:
        return rows.copy()
    pad = [(0, 0)] * (rows.ndim - 1) + [(half, half)]
    padded = np.pad(rows, pad, mode="edge")
    size = rows.shape[-1]
    out = np.zeros_like(rows, dtype=np.float64)
    for idx, w in enumerate(r.band):
        out += w * padded[..., idx : idx + size]
    return out
