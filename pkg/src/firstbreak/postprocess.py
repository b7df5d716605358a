"""Stage-4 quality control on the fine network's output."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, CoverageError, DataError, DegenerateFitError, NoConsensusError
from .gather import NO_PICK, Gather, PickSet, ProbabilityMap
from .lmo import LmoWindow
from .rrve import RansacConfig, TimeOffsetPoints, VelocityBounds, fit_bounded, ransac_wvc

log = logging.getLogger(__name__)

DEFAULT_TD = 5
DEFAULT_PROB_FLOOR = 0.05
# absorbs rounding in the reference line so a deviation of exactly td survives
_TD_SLACK = 1e-9


def splice(patches, origins, total_width: int) -> ProbabilityMap:
    """Average overlapping patch predictions into one map of ``total_width`` columns.

    Patch columns past ``total_width`` (right padding) are dropped.
    """
    patches = [np.asarray(p, dtype=np.float64) for p in patches]
    if not patches:
        raise CoverageError("no patches to splice")
    h = patches[0].shape[0]
    acc = np.zeros((h, total_width))
    hits = np.zeros(total_width)
    for p, o in zip(patches, origins, strict=True):
        if p.shape[0] != h:
            raise DataError("patches differ in height")
        stop = min(o + p.shape[1], total_width)
        acc[:, o:stop] += p[:, :stop - o]
        hits[o:stop] += 1
    if np.any(hits == 0):
        raise CoverageError(f"column {int(np.flatnonzero(hits == 0)[0])} is not covered by any patch")
    return ProbabilityMap(np.clip(acc / hits, 0.0, 1.0))


def column_max_candidates(m: ProbabilityMap):
    """Row of the per-column maximum (first row on ties) and its probability."""
    v = m.values
    if v.size == 0:
        raise DataError("empty probability map")
    rows = np.argmax(v, axis=0)
    return rows.astype(np.int64), v[rows, np.arange(v.shape[1])]


@dataclass(frozen=True)
class FilterResult:
    rows: PickSet
    reference_rows: np.ndarray | None
    flagged: bool


def deviation_filter(rows, probs, g: Gather, window: LmoWindow | None = None,
                     bounds: VelocityBounds = VelocityBounds(), rc: RansacConfig = RansacConfig(),
                     td: int = DEFAULT_TD, prob_floor: float | None = DEFAULT_PROB_FLOOR) -> FilterResult:
    """Invalidate candidates that stray more than ``td`` rows from a robust moveout line.

    ``rows`` are window rows when ``window`` is given, absolute samples
    otherwise. Candidates below ``prob_floor`` (``None`` disables the floor)
    and candidates on zero-padded window rows never enter the fit and are
    returned as no-picks. If RANSAC finds no consensus the line is fitted to
    all candidates and the result is flagged.
    """
    if td < 1:
        raise ConfigError("deviation threshold must be >= 1")
    rows = np.asarray(rows, dtype=np.int64)
    probs = np.asarray(probs, dtype=np.float64)
    n = g.n_traces
    if rows.shape != (n,) or probs.shape != (n,):
        raise DataError(f"expected {n} candidates")
    starts = window.starts if window is not None else np.zeros(n, dtype=np.int64)
    absolute = starts + rows
    keep = (absolute >= 0) & (absolute < g.n_samples)
    if prob_floor is not None:
        keep &= probs >= prob_floor
    none = FilterResult(PickSet(np.full(n, NO_PICK)), None, True)
    if not np.any(keep):
        return none
    pts = TimeOffsetPoints(g.offsets[keep], absolute[keep] * g.dt)
    flagged = False
    try:
        model = ransac_wvc(pts, bounds, rc)
    except (NoConsensusError, DataError) as exc:
        log.warning("reference fit fell back to all candidates: %s", exc)
        flagged = True
        try:
            model = fit_bounded(pts, bounds)
        except DegenerateFitError:
            return none
    ref_rows = model.times(g.offsets) / g.dt - starts
    ok = keep & (np.abs(rows - ref_rows) <= td + _TD_SLACK)
    return FilterResult(PickSet(np.where(ok, rows, NO_PICK)), ref_rows, flagged)
