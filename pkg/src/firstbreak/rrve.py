"""Region restriction by velocity estimation.

Credible cells of a probability map become points in the time-offset
domain; a linear-moveout line ``t = d / v + t0`` is fitted to them under a
velocity prior and made robust with a RANSAC variant whose inlier threshold
is re-derived from every hypothesis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, DegenerateFitError, NoConsensusError
from .gather import Gather, ProbabilityMap


@dataclass(frozen=True)
class TimeOffsetPoints:
    offsets: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.offsets, dtype=np.float64).reshape(-1)
        t = np.asarray(self.times, dtype=np.float64).reshape(-1)
        if d.shape != t.shape:
            raise DataError("offsets and times differ in length")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(t))):
            raise DataError("points must be finite")
        if np.any(d < 0) or np.any(t < 0):
            raise DataError("offsets and times must be non-negative")
        object.__setattr__(self, "offsets", d)
        object.__setattr__(self, "times", t)

    def __len__(self):
        return self.offsets.shape[0]

    def subset(self, idx) -> "TimeOffsetPoints":
        return TimeOffsetPoints(self.offsets[idx], self.times[idx])


@dataclass(frozen=True)
class VelocityBounds:
    v_min: float = 1000.0
    v_max: float = 8000.0

    def __post_init__(self):
        if not (0 < self.v_min < self.v_max):
            raise ConfigError(f"need 0 < v_min < v_max, got [{self.v_min}, {self.v_max}]")


@dataclass(frozen=True)
class LmoModel:
    v: float
    t0: float

    def times(self, offsets) -> np.ndarray:
        return np.asarray(offsets, dtype=np.float64) / self.v + self.t0


@dataclass(frozen=True)
class RansacConfig:
    """RANSAC settings; ``d=None`` means ``ceil(0.3 * n_points)``, floored at ``n``.

    ``threshold_mode``: ``"abs"`` keeps a point when its absolute residual is
    below the median absolute residual; ``"squared"`` compares the squared
    residual against that median directly.
    """

    n: int = 8
    d: int | None = None
    k: int = 100
    threshold_mode: str = "abs"
    rng_seed: int = 0

    def __post_init__(self):
        if self.n < 2 or self.k < 1:
            raise ConfigError("RANSAC needs n >= 2 and k >= 1")
        if self.d is not None and self.d < self.n:
            raise ConfigError("consensus size d must be >= n")
        if self.threshold_mode not in ("abs", "squared"):
            raise ConfigError(f"unknown threshold_mode {self.threshold_mode!r}")

    def consensus_size(self, n_points: int) -> int:
        if self.d is not None:
            return self.d
        return max(self.n, math.ceil(0.3 * n_points))


def extract_points(prob: ProbabilityMap, g: Gather, split_threshold: float = 0.1) -> TimeOffsetPoints:
    """Cells strictly above ``split_threshold`` mapped to (offset, time)."""
    rows, cols = np.nonzero(prob.values > split_threshold)
    samples, traces = prob.grid.to_gather(rows, cols)
    traces = np.clip(np.rint(traces).astype(np.int64), 0, g.n_traces - 1)
    return TimeOffsetPoints(g.offsets[traces], np.maximum(samples, 0.0) * g.dt)


def objective(pts: TimeOffsetPoints, m: LmoModel) -> float:
    r = pts.times - m.times(pts.offsets)
    return float(r @ r)


def _sse(d, t, s, t0):
    r = t - s * d - t0
    return float(r @ r)


def fit_bounded(pts: TimeOffsetPoints, b: VelocityBounds = VelocityBounds()) -> LmoModel:
    """Least-squares moveout line with ``v`` in ``[v_min, v_max]`` and ``t0 >= 0``.

    In slowness ``s = 1/v`` the problem is a convex quadratic in ``(s, t0)``
    over a box, so the minimizer is either the free solution or lies on one
    of the active faces; every candidate is evaluated and the best returned.
    """
    d, t = pts.offsets, pts.times
    if np.unique(d).shape[0] < 2:
        raise DegenerateFitError("need at least two distinct offsets")
    s_lo, s_hi = 1.0 / b.v_max, 1.0 / b.v_min
    dm, tm = d.mean(), t.mean()
    dc = d - dm
    sdd = float(dc @ dc)
    s_free = float(dc @ (t - tm)) / sdd

    cands = []
    t0_free = tm - s_free * dm
    if s_lo <= s_free <= s_hi and t0_free >= 0:
        cands.append((s_free, t0_free))
    # slowness on a bound, intercept free (then clipped at zero)
    for s in (s_lo, s_hi):
        cands.append((s, max(0.0, float(np.mean(t - s * d)))))
    # intercept pinned at zero, slowness free within its bounds
    dd = float(d @ d)
    if dd > 0:
        cands.append((min(max(float(d @ t) / dd, s_lo), s_hi), 0.0))
    # slowness inside the bounds with t0 = t_mean - s * d_mean clipped, for completeness
    s_clip = min(max(s_free, s_lo), s_hi)
    cands.append((s_clip, max(0.0, tm - s_clip * dm)))

    best = min(cands, key=lambda c: (_sse(d, t, c[0], c[1]), c[0], c[1]))
    return LmoModel(1.0 / best[0], best[1])


def ransac_wvc(pts: TimeOffsetPoints, b: VelocityBounds = VelocityBounds(),
               rc: RansacConfig = RansacConfig()) -> LmoModel:
    """Robust bounded moveout fit.

    Each of ``rc.k`` iterations fits a random minimal sample, sets the inlier
    threshold to the median absolute residual of all points under that fit,
    collects the non-sampled points under the threshold, and, if more than
    ``d`` of them agree, refits on that consensus set. The refit with the
    smallest summed squared error over its consensus set wins; earlier
    iterations win ties.
    """
    N = len(pts)
    if N < rc.n:
        raise DataError(f"{N} points, RANSAC sample size is {rc.n}")
    need = rc.consensus_size(N)
    rng = np.random.default_rng(rc.rng_seed)
    d, t = pts.offsets, pts.times
    best, best_err = None, np.inf
    for _ in range(rc.k):
        sample = rng.choice(N, size=rc.n, replace=False)
        try:
            m = fit_bounded(pts.subset(sample), b)
        except DegenerateFitError:
            continue
        r = t - m.times(d)
        med = float(np.median(np.abs(r)))
        rest = np.ones(N, dtype=bool)
        rest[sample] = False
        if rc.threshold_mode == "abs":
            inlier = rest & (np.abs(r) < med)
        else:
            inlier = rest & (r * r < med)
        if np.count_nonzero(inlier) <= need:
            continue
        try:
            refit = fit_bounded(pts.subset(inlier), b)
        except DegenerateFitError:
            continue
        ri = t[inlier] - refit.times(d[inlier])
        err = float(ri @ ri)
        if err < best_err:
            best, best_err = refit, err
    if best is None:
        raise NoConsensusError(f"no iteration gathered more than {need} consensus points")
    return best


def reference_fat(m: LmoModel, g_or_offsets) -> np.ndarray:
    """Reference arrival time (seconds) of every trace."""
    offsets = g_or_offsets.offsets if isinstance(g_or_offsets, Gather) else g_or_offsets
    return m.times(offsets)
