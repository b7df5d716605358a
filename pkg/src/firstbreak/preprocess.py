"""Signal and label preprocessing.

Covers the STA/LTA attribute, trace-wise normalization, snapping labels onto
wavelet extrema, bilinear downsampling and the training masks of both
segmentation networks.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, InterpolationError
from .gather import NO_PICK, Gather, GridMeta, PickSet, ProbabilityMap

CSN_BAND_HALF_WIDTH = 2


@dataclass(frozen=True)
class StaLtaConfig:
    n_s: int = 5
    n_l: int = 20
    eps: float = 1e-12

    def __post_init__(self):
        if self.n_s < 1 or self.n_l <= self.n_s:
            raise ConfigError(f"need 1 <= n_s < n_l, got n_s={self.n_s}, n_l={self.n_l}")
        if not self.eps > 0:
            raise ConfigError("eps must be positive")


class Extremum(str, enum.Enum):
    PEAK = "peak"
    TROUGH = "trough"


@dataclass(frozen=True)
class PickMode:
    mode: Extremum = Extremum.PEAK
    snap_radius: int = 10

    def __post_init__(self):
        object.__setattr__(self, "mode", Extremum(self.mode))
        if self.snap_radius < 1:
            raise ConfigError("snap_radius must be >= 1")


def sta_lta_array(amps: np.ndarray, cfg: StaLtaConfig) -> np.ndarray:
    """Column-wise STA/LTA of a ``(n_samples, n_traces)`` array.

    Both window sums include their end points, so the short window holds
    ``n_s + 1`` samples and the long one ``n_l + 1``. Samples before ``n_l``
    have no complete long window and are set to 1.
    """
    a = np.abs(np.asarray(amps, dtype=np.float64))
    n = a.shape[0]
    if cfg.n_l >= n:
        raise ConfigError(f"long window {cfg.n_l} does not fit {n} samples")
    csum = np.concatenate([np.zeros((1,) + a.shape[1:]), np.cumsum(a, axis=0)], axis=0)
    i = np.arange(cfg.n_l, n)
    sta = csum[i + 1] - csum[i - cfg.n_s]
    lta = csum[i + 1] - csum[i - cfg.n_l]
    out = np.ones_like(a)
    out[cfg.n_l:] = cfg.n_l * sta / (cfg.n_s * lta + cfg.eps)
    # cumulative sums can leave tiny negative residues on all-zero stretches
    np.maximum(out, 0.0, out=out)
    return out


def sta_lta(g: Gather, cfg: StaLtaConfig = StaLtaConfig()) -> Gather:
    return g.with_amplitudes(sta_lta_array(g.amplitudes, cfg))


def normalize_traces(amps: np.ndarray) -> np.ndarray:
    """Divide every column by its maximum absolute value; all-zero columns pass through."""
    a = np.asarray(amps, dtype=np.float64)
    peak = np.max(np.abs(a), axis=0)
    scale = np.where(peak > 0, peak, 1.0)
    return a / scale


def trace_wise_normalize(g: Gather) -> Gather:
    return g.with_amplitudes(normalize_traces(g.amplitudes))


def _extrema_mask(trace: np.ndarray, mode: Extremum) -> np.ndarray:
    x = trace if mode is Extremum.PEAK else -trace
    mask = np.zeros(x.shape[0], dtype=bool)
    if x.shape[0] >= 3:
        # strict on the left, loose on the right: a plateau snaps to its first sample
        mask[1:-1] = (x[1:-1] > x[:-2]) & (x[1:-1] >= x[2:])
    return mask


def snap_picks(g: Gather, p: PickSet, mode: PickMode = PickMode()) -> PickSet:
    """Move each pick to the nearest extremum of the requested polarity.

    Equidistant candidates are resolved in favour of the larger extremum,
    then the earlier sample. Picks with no extremum within ``snap_radius``
    are left where they are.
    """
    p.validate(g.n_samples, g.n_traces)
    out = p.picks.copy()
    sign = 1.0 if mode.mode is Extremum.PEAK else -1.0
    for i in np.flatnonzero(p.picked):
        trace = g.amplitudes[:, i]
        ext = _extrema_mask(trace, mode.mode)
        pick = int(p.picks[i])
        lo = max(pick - mode.snap_radius, 0)
        hi = min(pick + mode.snap_radius, g.n_samples - 1)
        cand = lo + np.flatnonzero(ext[lo:hi + 1])
        if cand.size == 0:
            continue
        key = np.lexsort((cand, -sign * trace[cand], np.abs(cand - pick)))
        out[i] = cand[key[0]]
    return PickSet(out)


def _axis_weights(n_src: int, n_dst: int):
    pos = np.arange(n_dst) * ((n_src - 1) / (n_dst - 1))
    lo = np.minimum(np.floor(pos).astype(np.int64), n_src - 2)
    frac = pos - lo
    return lo, frac


def downsample_bilinear(img: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Corner-aligned bilinear resampling; only shrinking is supported."""
    img = np.asarray(img, dtype=np.float64)
    H, W = img.shape
    if target_h < 2 or target_w < 2:
        raise ConfigError("target dimensions must be >= 2")
    if target_h > H or target_w > W:
        raise ConfigError(f"cannot upsample {H}x{W} to {target_h}x{target_w}")
    r0, fr = _axis_weights(H, target_h)
    c0, fc = _axis_weights(W, target_w)
    rows = img[r0] * (1 - fr)[:, None] + img[r0 + 1] * fr[:, None]
    return rows[:, c0] * (1 - fc) + rows[:, c0 + 1] * fc


def interpolate_picks(p: PickSet, positions: np.ndarray) -> np.ndarray:
    """Linearly interpolate picks (in samples) at fractional trace ``positions``.

    Positions outside the first..last picked trace return NaN.
    """
    idx = np.flatnonzero(p.picked)
    if idx.size == 1 and len(p) == 1:
        return np.where(np.isclose(positions, 0.0), float(p.picks[0]), np.nan)
    if idx.size < 2:
        raise InterpolationError(f"need at least 2 picked traces, got {idx.size}")
    vals = p.picks[idx].astype(np.float64)
    out = np.interp(positions, idx, vals)
    outside = (positions < idx[0]) | (positions > idx[-1])
    out[outside] = np.nan
    return out


def make_csn_target(p: PickSet, src_shape, dst_shape) -> ProbabilityMap:
    """Dilated label band for the coarse network on the downsampled grid."""
    H, W = src_shape
    h, w = dst_shape
    p.validate(H, W)
    grid = GridMeta.resample(src_shape, dst_shape)
    positions = np.arange(w) * grid.col_scale
    samples = interpolate_picks(p, positions)
    mask = np.zeros((h, w))
    for c in np.flatnonzero(np.isfinite(samples)):
        r = int(np.rint(samples[c] / grid.row_scale))
        mask[max(r - CSN_BAND_HALF_WIDTH, 0):min(r + CSN_BAND_HALF_WIDTH + 1, h), c] = 1.0
    return ProbabilityMap(mask, grid)


def make_rsn_target(p: PickSet, shape) -> ProbabilityMap:
    """Single-pixel mask: one labeled cell per picked column."""
    h, w = shape
    if len(p) != w:
        raise DataError(f"{len(p)} picks for {w} columns")
    picked = np.flatnonzero(p.picks != NO_PICK)
    if np.any(p.picks[picked] >= h):
        raise DataError("pick outside the window")
    mask = np.zeros((h, w))
    mask[p.picks[picked], picked] = 1.0
    return ProbabilityMap(mask)
