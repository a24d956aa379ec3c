"""Recover the pre-enhancement histogram for a known curve and noise level.

The fit minimizes the Wasserstein-1 distance between the observed
histogram and the forward model (curve scatter followed by noise blur),
plus a smooth penalty that discourages empty bins in the recovered
histogram.  The W1 term is handled by rewriting each absolute value as
a quadratic reweighted by an auxiliary non-negative vector whose exact
minimizer is the absolute residual itself; block coordinate descent
then alternates projected gradient steps on the histogram with the
closed-form reweighting update.

All operators are applied as pipelines (scatter, banded convolution,
running sums, gathers); no dense matrix is ever formed, so one
application costs O(n * band) for histograms of length n + 1.  The core
runs on batches of rows so that many blocks or many candidate curves
can be solved in one vectorized pass; rows are frozen individually as
they converge, which keeps every row's result independent of which
other rows share the batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericalError
from .histogram import PixelHistogram, project_rows_to_simplex
from .noise import NoiseMatrix, fold_convolve, fold_convolve_adjoint
from .transforms import TransformCurve

_REL_FLOOR = 1e-12  # denominator guard for relative-change tests


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for the histogram recovery solver.

    lam weights the empty-bin penalty, rho is the sharpness of its
    exponential surrogate, eta0 the initial gradient step (decaying as
    eta0 / (step + 1)), and u_floor keeps the l1 reweighting finite when
    prefixes of the fit are exact.
    """

    lam: float = 0.75
    rho: float = 1.0
    eta0: float = 1.2
    outer_max: int = 50
    inner_max: int = 10
    tol: float = 1e-6
    u_floor: float = 1e-12

    def __post_init__(self):
        for name in ("lam", "rho", "eta0", "tol", "u_floor"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be positive")
        if not (self.outer_max > 0 and self.inner_max > 0):
            raise InputError("iteration caps must be positive")
        if not self.tol < 1:
            raise InputError("tol must be below 1")


@dataclass(frozen=True)
class SolverReport:
    """Outcome of one recovery: solution, objective value and trace."""

    h_star: PixelHistogram
    objective: float
    iterations: int
    trace: list
    w1_term: float
    surrogate_term: float

    def to_json_dict(self) -> dict:
        return {
            "objective": float(self.objective),
            "iterations": int(self.iterations),
            "trace": [float(v) for v in self.trace],
            "w1_term": float(self.w1_term),
            "surrogate_term": float(self.surrogate_term),
            "histogram": self.h_star.to_json_dict(),
        }


class Pipeline:
    """Forward/adjoint operator stack for a batch of recovery problems.

    One noise model is shared; curves may differ per row (2-D target
    array) or be shared (1-D target broadcast to every row).
    """

    def __init__(self, phi_rows: np.ndarray, nm: NoiseMatrix, m: int | None = None):
        phi_rows = np.asarray(phi_rows, dtype=np.int64)
        if phi_rows.ndim == 1:
            if m is None:
                raise InputError("row count required for a shared curve")
            phi_rows = np.broadcast_to(phi_rows, (m, phi_rows.size))
        self.nm = nm
        self.phi = phi_rows
        rows, size = phi_rows.shape
        self.shape = (rows, size)
        self.flat = (np.arange(rows)[:, None] * size + phi_rows).ravel()

    def scatter(self, rows: np.ndarray) -> np.ndarray:
        """Push rows through the curve: mass lands whole on target bins."""
        out = np.bincount(self.flat, weights=rows.ravel(),
                          minlength=self.shape[0] * self.shape[1])
        return out.reshape(self.shape)

    def gather(self, rows: np.ndarray) -> np.ndarray:
        """Transpose of scatter: sample rows at each source's target."""
        return np.take_along_axis(rows, self.phi, axis=1)

    def forward(self, rows: np.ndarray) -> np.ndarray:
        """Prefix sums of the blurred, curve-scattered rows."""
        return np.cumsum(fold_convolve(self.nm, self.scatter(rows)), axis=1)

    def adjoint(self, rows: np.ndarray) -> np.ndarray:
        """Transpose of forward: suffix sums, blur adjoint, gather."""
        s = np.cumsum(rows[:, ::-1], axis=1)[:, ::-1]
        return self.gather(fold_convolve_adjoint(self.nm, s))

    def pullback(self, obs_rows: np.ndarray) -> np.ndarray:
        """Feasible starting point: split each observed bin's mass evenly
        over the bins mapping to it.  Mass observed on unreachable bins
        is dropped and the rows renormalized (uniform if nothing is
        reachable)."""
        counts = np.bincount(self.flat, minlength=self.shape[0] * self.shape[1])
        counts = counts.reshape(self.shape)
        pulled = self.gather(obs_rows) / self.gather(counts)
        total = pulled.sum(axis=1, keepdims=True)
        dead = total[:, 0] <= 0
        if dead.any():
            pulled[dead] = 1.0 / self.shape[1]
            total = pulled.sum(axis=1, keepdims=True)
        return pulled / total


_MAX_HALVINGS = 40


def _descend(pipe: Pipeline, h: np.ndarray, u: np.ndarray, fobs: np.ndarray,
             cfg: SolverConfig, scale: np.ndarray):
    """Projected gradient descent on the reweighted objective.

    The scheduled damped step eta0 / (tau + 1) is the first trial; each
    row then halves its step until the reweighted objective strictly
    decreases, so one call can never increase it.  The accepted step
    scale persists per row (the reweighting can make useful steps many
    orders of magnitude smaller than the schedule) and is allowed to
    grow again between steps.  Returns (rows, residuals, scales).
    """
    lam, rho = cfg.lam, cfg.rho

    def evaluate(rows):
        res = pipe.forward(rows) - fobs
        ex = np.exp(-rho * rows)
        q = (0.5 * np.einsum("ij,ij->i", res, res / u)
             + lam * ex.sum(axis=1))
        return res, ex, q

    res, ex, q = evaluate(h)
    for tau in range(cfg.inner_max):
        grad = pipe.adjoint(res / u) - (lam * rho) * ex
        base = cfg.eta0 / (tau + 1.0)
        trial = np.minimum(scale * 2.0, 1.0) * base
        accepted = np.zeros(h.shape[0], dtype=bool)
        for _ in range(_MAX_HALVINGS):
            cand = project_rows_to_simplex(h - trial[:, None] * grad)
            cres, cex, cq = evaluate(cand)
            better = ~accepted & (cq < q)
            if better.any():
                h = np.where(better[:, None], cand, h)
                res = np.where(better[:, None], cres, res)
                ex = np.where(better[:, None], cex, ex)
                q = np.where(better, cq, q)
                scale = np.where(better, trial / base, scale)
                accepted |= better
            if accepted.all():
                break
            trial = np.where(accepted, trial, 0.5 * trial)
        if not accepted.any():
            break  # every row is at its inner optimum for this weighting
    return h, res, scale


def solve_rows(obs_rows: np.ndarray, phi_rows: np.ndarray, nm: NoiseMatrix,
               cfg: SolverConfig, collect_traces: bool = False):
    """Batched recovery: one problem per row of ``obs_rows``.

    Returns a dict of per-row arrays: solutions ``h``, exact objective
    values, W1 and surrogate terms, outer iteration counts, and
    per-row objective traces when requested.  Rows are frozen the
    moment their relative objective change drops below ``cfg.tol``, so
    results do not depend on batch composition.
    """
    obs_rows = np.asarray(obs_rows, dtype=np.float64)
    m, size = obs_rows.shape
    pipe = Pipeline(phi_rows, nm, m=m)
    if pipe.shape != (m, size):
        raise InputError("curve rows and observation rows disagree in shape")

    fobs = np.cumsum(obs_rows, axis=1)
    h = pipe.pullback(obs_rows)
    res = pipe.forward(h) - fobs
    lam, rho = cfg.lam, cfg.rho

    def exact(h_rows, res_rows):
        return (np.abs(res_rows).sum(axis=1)
                + lam * np.exp(-rho * h_rows).sum(axis=1))

    obj = exact(h, res)
    traces = [[float(v)] for v in obj] if collect_traces else None
    w1 = np.abs(res).sum(axis=1)
    iterations = np.zeros(m, dtype=np.int64)
    active = np.arange(m)

    for outer in range(cfg.outer_max):
        sub = (Pipeline(pipe.phi[active], nm) if active.size != m else pipe)
        u = np.maximum(np.abs(res[active]), cfg.u_floor)
        new_h, new_res = _descend(sub, h[active], u, fobs[active], cfg)
        new_obj = exact(new_h, new_res)
        if not np.all(np.isfinite(new_obj)):
            raise NumericalError(
                f"objective became non-finite at outer iteration {outer + 1}",
                trace=traces[0] if traces else None)
        h[active] = new_h
        res[active] = new_res
        w1[active] = np.abs(new_res).sum(axis=1)
        iterations[active] = outer + 1
        if collect_traces:
            for row, val in zip(active, new_obj):
                traces[row].append(float(val))
        settled = np.abs(new_obj - obj[active]) <= cfg.tol * np.maximum(
            np.abs(obj[active]), _REL_FLOOR)
        obj[active] = new_obj
        active = active[~settled]
        if active.size == 0:
            break

    return {
        "h": h,
        "objective": obj,
        "w1": w1,
        "surrogate": lam * np.exp(-rho * h).sum(axis=1),
        "iterations": iterations,
        "traces": traces,
    }


def _check_sizes(h_obs: PixelHistogram, curve: TransformCurve, noise: NoiseMatrix):
    if not (h_obs.n == curve.n == noise.n):
        raise InputError(
            f"inconsistent sizes: histogram n={h_obs.n}, curve n={curve.n}, "
            f"noise n={noise.n}")


def recover_histogram(h_obs: PixelHistogram, curve: TransformCurve,
                      noise: NoiseMatrix,
                      cfg: SolverConfig | None = None) -> SolverReport:
    """Estimate the histogram that produced ``h_obs`` under a known
    curve and noise level."""
    cfg = cfg or SolverConfig()
    _check_sizes(h_obs, curve, noise)
    out = solve_rows(h_obs.values[None, :], curve.phi, noise, cfg,
                     collect_traces=True)
    return SolverReport(
        h_star=PixelHistogram(h_obs.bits, out["h"][0]),
        objective=float(out["objective"][0]),
        iterations=int(out["iterations"][0]),
        trace=out["traces"][0],
        w1_term=float(out["w1"][0]),
        surrogate_term=float(out["surrogate"][0]),
    )


def solver_objective(h: PixelHistogram, h_obs: PixelHistogram,
                     curve: TransformCurve, noise: NoiseMatrix,
                     cfg: SolverConfig | None = None) -> float:
    """Exact fit objective at ``h``: W1 residual plus the surrogate
    empty-bin penalty.  Pure evaluation, no optimization."""
    cfg = cfg or SolverConfig()
    _check_sizes(h_obs, curve, noise)
    pipe = Pipeline(curve.phi, noise, m=1)
    res = pipe.forward(h.values[None, :]) - np.cumsum(h_obs.values)[None, :]
    return float(np.abs(res).sum()
                 + cfg.lam * np.exp(-cfg.rho * h.values).sum())


def smooth_objective(h, fobs_target, pipe: Pipeline, weights, cfg: SolverConfig):
    """Diagnostic: the smooth objective descended in the inner loop,
    with the reweighting vector held fixed."""
    h = np.atleast_2d(np.asarray(h, dtype=np.float64))
    res = pipe.forward(h) - fobs_target
    quad = 0.5 * np.einsum("ij,ij->i", res, res / weights)
    return float((quad + cfg.lam * np.exp(-cfg.rho * h).sum(axis=1))[0])


def smooth_gradient(h, fobs_target, pipe: Pipeline, weights, cfg: SolverConfig):
    """Analytic gradient of :func:`smooth_objective` in ``h``."""
    h = np.atleast_2d(np.asarray(h, dtype=np.float64))
    res = pipe.forward(h) - fobs_target
    return (pipe.adjoint(res / weights)
            - cfg.lam * cfg.rho * np.exp(-cfg.rho * h))[0]


def l1_variational_check(x):
    """Evaluate the reweighted form of the l1 norm at its minimizer.

    Returns ``(value, z)`` with ``z = |x|`` and value
    ``0.5 * (sum(x_i^2 / z_i) + sum(z_i))`` under the 0/0 -> 0
    convention; the value equals ``||x||_1`` exactly.
    """
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InputError("input must be finite")
    z = np.abs(arr)
    ratio = np.divide(arr * arr, z, out=np.zeros_like(z), where=z > 0)
    return float(0.5 * (ratio.sum() + z.sum())), z
