"""Monotone pixel-value transforms and their action on histograms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import expit

from .errors import InputError
from .histogram import PixelHistogram
from .noise import NoiseSpec


def round_half_up(x):
    """Round to nearest integer with halves going up (away from zero
    for the non-negative values used here).

    This is the discretization used everywhere a continuous curve is
    sampled: value v maps to j exactly when j - 1/2 <= v < j + 1/2.
    """
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5).astype(np.int64)


@dataclass(frozen=True)
class TransformCurve:
    """Integer tone curve: a non-decreasing map of {0..n} into itself."""

    n: int
    phi: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi)
        if not np.issubdtype(phi.dtype, np.integer):
            raise InputError("curve values must be integers")
        phi = phi.astype(np.int64, copy=True)
        if phi.ndim != 1 or phi.size != self.n + 1:
            raise InputError(f"curve must have length n + 1 = {self.n + 1}")
        if phi.min() < 0 or phi.max() > self.n:
            raise InputError(f"curve values must lie in [0, {self.n}]")
        if np.any(np.diff(phi) < 0):
            raise InputError("curve must be non-decreasing")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    def to_json_dict(self) -> dict:
        return {"n": int(self.n), "phi": [int(v) for v in self.phi]}

    @classmethod
    def from_json_dict(cls, data: dict) -> "TransformCurve":
        try:
            return cls(int(data["n"]), np.asarray(data["phi"], dtype=np.int64))
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed curve object: {exc}") from exc


@dataclass(frozen=True)
class TransferMatrix:
    """Sparse column-stochastic matrix induced by a tone curve.

    Column i has a single unit entry in row ``column_target[i]``; the
    dense form is never stored.  Applying it to a histogram scatters
    each source bin's mass onto its mapped bin.
    """

    n: int
    column_target: np.ndarray

    def __post_init__(self):
        # Reuse the curve validation: the target vector obeys the same
        # range constraint, monotonicity included by construction.
        curve = TransformCurve(self.n, self.column_target)
        object.__setattr__(self, "column_target", curve.phi)

    @classmethod
    def from_curve(cls, curve: TransformCurve) -> "TransferMatrix":
        return cls(curve.n, curve.phi)


def identity_curve(n: int) -> TransformCurve:
    return TransformCurve(n, np.arange(n + 1, dtype=np.int64))


def gamma_curve(gamma: float, n: int) -> TransformCurve:
    """Power-law tone curve mapping i to round(n * (i/n)**gamma)."""
    if not (math.isfinite(gamma) and gamma > 0):
        raise InputError("gamma must be a positive real")
    i = np.arange(n + 1, dtype=np.float64)
    phi = round_half_up(n * (i / n) ** gamma)
    return TransformCurve(n, np.clip(phi, 0, n))


def sigmoid_curve(alpha: float, mu: float, n: int) -> TransformCurve:
    """S-shaped stretching controlled by slope alpha and midpoint mu.

    The logistic response is renormalized so 0 and n map to themselves.
    """
    if not (math.isfinite(alpha) and alpha > 0):
        raise InputError("alpha must be a positive real")
    if not (math.isfinite(mu) and 0.0 <= mu <= 1.0):
        raise InputError("mu must lie in [0, 1]")
    i = np.arange(n + 1, dtype=np.float64)
    lo = expit(-mu / alpha)
    hi = expit((1.0 - mu) / alpha)
    y = n * (expit((i - n * mu) / (n * alpha)) - lo) / (hi - lo)
    phi = round_half_up(y)
    return TransformCurve(n, np.clip(phi, 0, n))


def hist_eq_curve(h: PixelHistogram) -> TransformCurve:
    """Equalization curve: scale the histogram's own CDF to [0, n]."""
    n = h.n
    phi = round_half_up(n * np.cumsum(h.values))
    return TransformCurve(n, np.clip(phi, 0, n))


def spline_curve(control_points, n: int) -> TransformCurve:
    """Free-form curve through integer control points.

    Uses shape-preserving monotone cubic interpolation (a natural cubic
    would overshoot and break monotonicity), then rounds, clips and
    clamps so the result is a valid curve for any admissible controls.
    Endpoints (0, 0) and (n, n) are added when absent.
    """
    pts = [(int(i), int(j)) for i, j in control_points]
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise InputError("control point inputs must be strictly increasing")
    if any(b < a for a, b in zip(ys, ys[1:])):
        raise InputError("control point outputs must be non-decreasing")
    if any(x < 0 or x > n or y < 0 or y > n for x, y in pts):
        raise InputError(f"control points must lie in [0, {n}]^2")
    if not xs or xs[0] != 0:
        xs.insert(0, 0)
        ys.insert(0, 0)
    if xs[-1] != n:
        xs.append(n)
        ys.append(n)
    if any(b < a for a, b in zip(ys, ys[1:])):
        raise InputError("control points conflict with the fixed endpoints")
    interp = PchipInterpolator(np.asarray(xs, dtype=np.float64),
                               np.asarray(ys, dtype=np.float64))
    phi = round_half_up(interp(np.arange(n + 1, dtype=np.float64)))
    phi = np.maximum.accumulate(np.clip(phi, 0, n))
    return TransformCurve(n, phi)


def _target_vector(t) -> tuple[int, np.ndarray]:
    if isinstance(t, TransferMatrix):
        return t.n, t.column_target
    if isinstance(t, TransformCurve):
        return t.n, t.phi
    raise InputError("expected a TransferMatrix or TransformCurve")


def apply_to_histogram(t, h: PixelHistogram) -> PixelHistogram:
    """Push a histogram through a curve's transfer matrix.

    Scatter-add in O(n): every source bin lands whole on its target.
    """
    n, target = _target_vector(t)
    if h.n != n:
        raise InputError(f"transfer is for n={n}, histogram has n={h.n}")
    out = np.bincount(target, weights=h.values, minlength=n + 1)
    return PixelHistogram(h.bits, out)


def apply_to_pixels(curve: TransformCurve, pixels, noise: NoiseSpec | None = None,
                    seed=None):
    """Map pixel values through a curve, optionally adding rounded,
    clipped Gaussian noise.  Deterministic for a fixed seed."""
    arr = np.asarray(pixels)
    if not np.issubdtype(arr.dtype, np.integer):
        raise InputError("pixel values must be integers")
    if arr.size and (arr.min() < 0 or arr.max() > curve.n):
        raise InputError(f"pixel values must lie in [0, {curve.n}]")
    out = curve.phi[arr]
    if noise is not None and noise.sigma > 0:
        rng = np.random.default_rng(seed)
        noisy = out + rng.normal(0.0, noise.sigma, size=out.shape)
        out = np.clip(np.floor(noisy + 0.5), 0, curve.n).astype(np.int64)
    return out.astype(arr.dtype, copy=False)


def distinguishable_gammas(n: int, gamma_max: float | None = None):
    """Partition of the gamma axis into intervals of identical curves.

    Rounding makes the power-law curve piecewise constant in gamma: the
    output at pixel i crosses from j + 1 down to j exactly where
    n * (i/n)**gamma passes j + 1/2, i.e. at
    (log n - log(j + 1/2)) / (log n - log i).  Collecting those
    crossings for all interior (i, j) cells yields interval bounds;
    two gammas strictly inside one interval produce identical curves.

    Returns a sorted list of (lo, hi) pairs covering (0, gamma_max]
    (the final interval is unbounded when gamma_max is None).
    """
    if n < 2:
        raise InputError("n must be at least 2")
    i = np.arange(1, n, dtype=np.float64)
    j = np.arange(0, n, dtype=np.float64)
    log_n = math.log(n)
    bounds = (log_n - np.log(j[None, :] + 0.5)) / (log_n - np.log(i[:, None]))
    cuts = np.unique(bounds.ravel())
    if gamma_max is not None:
        if not (math.isfinite(gamma_max) and gamma_max > 0):
            raise InputError("gamma_max must be a positive real")
        cuts = cuts[cuts < gamma_max]
    edges = [0.0] + [float(c) for c in cuts]
    edges.append(math.inf if gamma_max is None else float(gamma_max))
    return list(zip(edges[:-1], edges[1:]))


def histogram_matching_transform(source: PixelHistogram,
                                 target: PixelHistogram) -> TransformCurve:
    """Monotone curve carrying the source histogram onto the target.

    Classic histogram matching: compose the source CDF with the
    pseudo-inverse of the target CDF, where the pseudo-inverse of level
    v is the smallest bin whose cumulative mass reaches v.
    """
    if source.values.size != target.values.size:
        raise InputError("source and target histograms must have equal length")
    n = source.n
    c_src = np.cumsum(source.values)
    c_tgt = np.cumsum(target.values)
    phi = np.searchsorted(c_tgt, c_src, side="left")
    return TransformCurve(n, np.minimum(phi, n).astype(np.int64))
