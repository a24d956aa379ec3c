"""Normalized pixel histograms and simplex geometry.

A pixel histogram of a b-bit image is a probability vector over the
2**b possible pixel values.  This module provides the histogram type,
cumulative sums (never materializing the dense lower-triangular
operator), the Wasserstein-1 distance between histograms, empty-bin
counting, and Euclidean projection onto the probability simplex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

SIMPLEX_SUM_TOL = 1e-9

# Recovered histograms are real valued and never land exactly on zero,
# so "empty" means below this mass.
EMPTY_BIN_EPS = 1e-8


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PixelHistogram:
    """Normalized pixel-value distribution of a ``bits``-bit image.

    ``values[i]`` is the fraction of pixels equal to i.  The vector has
    length ``2**bits``, is entrywise non-negative and sums to one.
    """

    bits: int
    values: np.ndarray

    def __post_init__(self):
        if not (1 <= int(self.bits) <= 16):
            raise InputError(f"unsupported bit depth {self.bits}")
        vals = _readonly(self.values)
        if vals.ndim != 1 or vals.size != 2 ** int(self.bits):
            raise InputError(
                f"histogram for {self.bits}-bit values must have length "
                f"{2 ** int(self.bits)}, got {vals.size}"
            )
        if not np.all(np.isfinite(vals)):
            raise InputError("histogram entries must be finite")
        if vals.min(initial=0.0) < 0.0:
            raise InputError("histogram entries must be non-negative")
        if abs(vals.sum() - 1.0) > SIMPLEX_SUM_TOL:
            raise InputError(f"histogram mass {vals.sum()!r} is not 1")
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        """Largest representable pixel value, 2**bits - 1."""
        return self.values.size - 1

    def to_json_dict(self) -> dict:
        return {"bits": int(self.bits), "values": [float(v) for v in self.values]}

    @classmethod
    def from_json_dict(cls, data: dict) -> "PixelHistogram":
        try:
            return cls(int(data["bits"]), np.asarray(data["values"], dtype=np.float64))
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed histogram object: {exc}") from exc

    @classmethod
    def uniform(cls, bits: int) -> "PixelHistogram":
        size = 2 ** int(bits)
        return cls(bits, np.full(size, 1.0 / size))


@dataclass(frozen=True)
class CumulativeHistogram:
    """Running sums of a pixel histogram; non-decreasing, ends at one."""

    values: np.ndarray

    def __post_init__(self):
        vals = _readonly(self.values)
        if np.any(np.diff(vals) < 0):
            raise InputError("cumulative histogram must be non-decreasing")
        if abs(vals[-1] - 1.0) > SIMPLEX_SUM_TOL:
            raise InputError("cumulative histogram must end at 1")
        object.__setattr__(self, "values", vals)


def from_pixels(pixels, bits: int) -> PixelHistogram:
    """Count pixel values into a normalized histogram.

    Parameters
    ----------
    pixels : array-like of integers in [0, 2**bits - 1]
    bits : bit depth of the values
    """
    if not (1 <= int(bits) <= 16):
        raise InputError(f"unsupported bit depth {bits}")
    arr = np.asarray(pixels)
    if arr.size == 0:
        raise InputError("cannot build a histogram from zero pixels")
    if not np.issubdtype(arr.dtype, np.integer):
        raise InputError("pixel values must be integers")
    size = 2 ** int(bits)
    flat = arr.ravel()
    if flat.min() < 0 or flat.max() >= size:
        raise InputError(
            f"pixel values must lie in [0, {size - 1}] for {bits}-bit data"
        )
    counts = np.bincount(flat, minlength=size).astype(np.float64)
    return PixelHistogram(bits, counts / flat.size)


def cumulative(h: PixelHistogram) -> CumulativeHistogram:
    """Cumulative distribution of ``h``, computed as a running sum in O(n)."""
    return CumulativeHistogram(np.cumsum(h.values))


def w1_distance(a: PixelHistogram, b: PixelHistogram) -> float:
    """Wasserstein-1 distance: the l1 distance between the two CDFs."""
    if a.values.size != b.values.size:
        raise InputError(
            f"histogram lengths differ: {a.values.size} vs {b.values.size}"
        )
    return float(np.abs(np.cumsum(a.values - b.values)).sum())


def empty_bin_count(h: PixelHistogram, eps_bin: float = EMPTY_BIN_EPS) -> int:
    """Number of bins whose mass does not exceed ``eps_bin``."""
    if eps_bin < 0:
        raise InputError("eps_bin must be non-negative")
    return int(np.count_nonzero(h.values <= eps_bin))


def project_to_simplex(x) -> np.ndarray:
    """Euclidean projection of a vector onto the probability simplex.

    Solves ``argmin_h 0.5*||x - h||**2`` subject to ``h >= 0`` and
    ``sum(h) == 1``.  The optimum is ``max(x + shift, 0)`` where the
    scalar shift is found exactly by sorting, so the result is
    deterministic and accurate to machine precision.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InputError("projection expects a non-empty vector")
    if not np.all(np.isfinite(arr)):
        raise InputError("projection input must be finite")
    return project_rows_to_simplex(arr[None, :])[0]


def project_rows_to_simplex(x: np.ndarray) -> np.ndarray:
    """Row-wise simplex projection of a 2-D array (no finiteness checks)."""
    k = x.shape[-1]
    u = np.sort(x, axis=-1)[..., ::-1]
    css = np.cumsum(u, axis=-1)
    ranks = np.arange(1, k + 1, dtype=np.float64)
    cond = u + (1.0 - css) / ranks > 0.0
    # cond is True on a prefix; the first True from the right is its end.
    last = k - 1 - np.argmax(cond[..., ::-1], axis=-1)
    pivot = (np.take_along_axis(css, last[..., None], axis=-1)[..., 0] - 1.0) / (
        last + 1.0
    )
    return np.maximum(x - pivot[..., None], 0.0)
