"""Linear-moveout windows: flatten the first arrival and cut RSN patches.

Each trace is shifted so that its reference arrival sits at row ``H'/2`` of a
fixed-height window. Rows that fall outside the recorded gather are zero and
picks landing there are discarded on the way back.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .gather import NO_PICK, Gather, PickSet
from .rrve import LmoModel


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5).astype(np.int64)


@dataclass(frozen=True, eq=False)
class LmoWindow:
    """Per-trace window placement.

    ``starts[i]`` is the gather sample shown in window row 0 of trace ``i``;
    it is negative when the window reaches above the first sample.
    """

    starts: np.ndarray
    height: int
    n_samples: int
    model: LmoModel | None = None

    def __post_init__(self):
        s = np.array(self.starts, dtype=np.int64).reshape(-1)
        if self.height < 2 or self.height % 2:
            raise ConfigError(f"window height must be even and >= 2, got {self.height}")
        s.setflags(write=False)
        object.__setattr__(self, "starts", s)

    @property
    def n_traces(self) -> int:
        return self.starts.shape[0]

    def valid_rows(self) -> np.ndarray:
        """Boolean ``(height, n_traces)`` mask of rows backed by recorded samples."""
        absolute = self.starts[None, :] + np.arange(self.height)[:, None]
        return (absolute >= 0) & (absolute < self.n_samples)


def window_from_reference(ref_times, dt: float, height: int, n_samples: int,
                          model: LmoModel | None = None) -> LmoWindow:
    ref = np.asarray(ref_times, dtype=np.float64)
    if not np.all(np.isfinite(ref)):
        raise DataError("reference times must be finite")
    return LmoWindow(_round_half_up(ref / dt) - height // 2, height, n_samples, model)


def flat_window(ref_times, dt: float, height: int, n_samples: int) -> LmoWindow:
    """One shared time window centred between the earliest and latest reference."""
    ref = np.asarray(ref_times, dtype=np.float64)
    if not np.all(np.isfinite(ref)):
        raise DataError("reference times must be finite")
    mid = 0.5 * (ref.min() + ref.max())
    start = int(_round_half_up(mid / dt)) - height // 2
    return LmoWindow(np.full(ref.shape[0], start), height, n_samples)


def window_array(amps: np.ndarray, w: LmoWindow) -> np.ndarray:
    """Gather ``(n_samples, n_traces)`` columns into a ``(height, n_traces)`` window."""
    amps = np.asarray(amps, dtype=np.float64)
    if amps.shape != (w.n_samples, w.n_traces):
        raise DataError(f"array shape {amps.shape} does not match window ({w.n_samples}, {w.n_traces})")
    rows = w.starts[None, :] + np.arange(w.height)[:, None]
    valid = (rows >= 0) & (rows < w.n_samples)
    cols = np.broadcast_to(np.arange(w.n_traces), rows.shape)
    out = np.zeros((w.height, w.n_traces))
    out[valid] = amps[rows[valid], cols[valid]]
    return out


def apply_lmo(g: Gather, ref_times, height: int = 256, model: LmoModel | None = None):
    """Cut the ``height``-row window centred on each reference time.

    Returns ``(window_gather, LmoWindow)``; the window gather keeps ``dt`` and
    offsets and has exactly ``height`` rows.
    """
    w = window_from_reference(ref_times, g.dt, height, g.n_samples, model)
    if w.n_traces != g.n_traces:
        raise DataError(f"{w.n_traces} reference times for {g.n_traces} traces")
    return g.with_amplitudes(window_array(g.amplitudes, w)), w


def inverse_lmo(rows, w: LmoWindow) -> PickSet:
    """Window rows back to absolute sample indices; padded rows become no-picks."""
    r = np.asarray(rows, dtype=np.int64).reshape(-1)
    if r.shape[0] != w.n_traces:
        raise DataError(f"{r.shape[0]} rows for {w.n_traces} traces")
    if np.any((r != NO_PICK) & ((r < 0) | (r >= w.height))):
        raise DataError("window row outside [0, height)")
    absolute = w.starts + r
    ok = (r != NO_PICK) & (absolute >= 0) & (absolute < w.n_samples)
    return PickSet(np.where(ok, absolute, NO_PICK))


def forward_picks(p: PickSet, w: LmoWindow) -> PickSet:
    """Absolute picks to window rows; picks outside the window become no-picks."""
    if len(p) != w.n_traces:
        raise DataError(f"{len(p)} picks for {w.n_traces} traces")
    rows = p.picks - w.starts
    ok = p.picked & (rows >= 0) & (rows < w.height)
    return PickSet(np.where(ok, rows, NO_PICK))


def patch_origins(n_cols: int, width: int, stride: int | None = None) -> list[int]:
    """Left-to-right patch origins; the last patch is right-aligned.

    A gather narrower than ``width`` yields a single patch at 0 that the
    caller pads on the right.
    """
    if width < 1:
        raise ConfigError("patch width must be >= 1")
    stride = max(width // 2, 1) if stride is None else stride
    if not 1 <= stride <= width:
        raise ConfigError(f"patch stride must lie in [1, {width}] so patches leave no gaps, got {stride}")
    if n_cols <= width:
        return [0]
    origins = list(range(0, n_cols - width + 1, stride))
    if origins[-1] + width < n_cols:
        origins.append(n_cols - width)
    return origins


def crop_patches(image: np.ndarray, width: int, stride: int | None = None):
    """Split a ``(C, H, n)`` or ``(H, n)`` window image into width-``width`` patches.

    Returns ``(patches, origins)`` with patches stacked along a new leading
    axis. Images narrower than ``width`` are zero-padded on the right.
    """
    img = np.asarray(image, dtype=np.float64)
    n = img.shape[-1]
    if n < width:
        pad = [(0, 0)] * (img.ndim - 1) + [(0, width - n)]
        img = np.pad(img, pad)
    origins = patch_origins(n, width, stride)
    patches = np.stack([img[..., o:o + width] for o in origins])
    return patches, origins
