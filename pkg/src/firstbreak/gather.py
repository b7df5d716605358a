"""Core data types and file formats.

Amplitude matrices are stored with time along the row axis: ``amplitudes[t, i]``
is sample ``t`` of trace ``i``. Every per-trace operation in the package
works on columns.

FBG gather file (little-endian)::

    b"FBG1" | u32 n_traces | u32 n_samples | f64 dt | f64 offsets[n_traces]
    | f32 amplitudes, trace-major (trace 0 samples 0..n-1, then trace 1, ...)

Pick file: UTF-8 CSV without header, one ``trace_index,sample_index`` line
per trace, ``-1`` for no pick.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError, TruncatedFileError

NO_PICK = -1
MAGIC = b"FBG1"
_HEADER = struct.Struct("<4sIId")


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Gather:
    """A single shot record."""

    amplitudes: np.ndarray
    dt: float
    offsets: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.float64)
        offs = np.array(self.offsets, dtype=np.float64).reshape(-1)
        if amps.ndim != 2 or amps.shape[0] < 1 or amps.shape[1] < 1:
            raise DataError(f"amplitudes must be a non-empty 2-D array, got shape {amps.shape}")
        if offs.shape[0] != amps.shape[1]:
            raise DataError(f"{offs.shape[0]} offsets for {amps.shape[1]} traces")
        if not np.all(np.isfinite(amps)):
            raise DataError("non-finite amplitude sample")
        if not np.all(np.isfinite(offs)) or np.any(offs < 0):
            raise DataError("offsets must be finite and non-negative")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise DataError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "amplitudes", _frozen(amps))
        object.__setattr__(self, "offsets", _frozen(offs))
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def n_samples(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def n_traces(self) -> int:
        return self.amplitudes.shape[1]

    def with_amplitudes(self, amplitudes: np.ndarray) -> "Gather":
        return Gather(amplitudes, self.dt, self.offsets)

    def __eq__(self, other):
        if not isinstance(other, Gather):
            return NotImplemented
        return (
            self.dt == other.dt
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.amplitudes, other.amplitudes)
        )


@dataclass(frozen=True, eq=False)
class PickSet:
    """One first-arrival sample index per trace; ``NO_PICK`` marks unpicked traces."""

    picks: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.picks)
        if p.ndim != 1:
            raise DataError("picks must be a 1-D vector")
        if p.size and not np.issubdtype(p.dtype, np.integer):
            if not np.all(np.equal(np.mod(p, 1), 0)):
                raise DataError("picks must be integers")
        p = np.array(p, dtype=np.int64)
        if np.any(p < NO_PICK):
            raise DataError("pick below the -1 sentinel")
        object.__setattr__(self, "picks", _frozen(p))

    def __len__(self):
        return self.picks.shape[0]

    @property
    def picked(self) -> np.ndarray:
        return self.picks != NO_PICK

    def validate(self, n_samples: int, n_traces: int | None = None) -> "PickSet":
        if n_traces is not None and len(self) != n_traces:
            raise DataError(f"{len(self)} picks for {n_traces} traces")
        bad = self.picked & (self.picks >= n_samples)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise DataError(f"pick {self.picks[i]} on trace {i} outside [0, {n_samples})")
        return self

    def __eq__(self, other):
        if not isinstance(other, PickSet):
            return NotImplemented
        return np.array_equal(self.picks, other.picks)


@dataclass(frozen=True)
class GridMeta:
    """Affine map from map cells to gather coordinates.

    ``sample = row_origin[col] + row * row_scale`` and
    ``trace = col_origin + col * col_scale``. ``row_origin`` is per column so
    that LMO windows (one start row per trace) fit the same description.
    """

    row_scale: float
    col_scale: float
    row_origin: np.ndarray
    col_origin: float = 0.0

    @classmethod
    def identity(cls, width: int) -> "GridMeta":
        return cls(1.0, 1.0, np.zeros(width))

    @classmethod
    def resample(cls, src_shape, dst_shape) -> "GridMeta":
        """Corner-aligned resampling of a ``src_shape`` gather onto ``dst_shape``."""
        (H, W), (h, w) = src_shape, dst_shape
        rs = (H - 1) / (h - 1) if h > 1 else 1.0
        cs = (W - 1) / (w - 1) if w > 1 else 1.0
        return cls(rs, cs, np.zeros(w))

    def to_gather(self, row, col):
        row = np.asarray(row, dtype=np.float64)
        col = np.asarray(col)
        origin = np.asarray(self.row_origin, dtype=np.float64)[np.asarray(col, dtype=np.int64)]
        return origin + row * self.row_scale, self.col_origin + col * self.col_scale

    def to_map(self, sample, trace):
        sample = np.asarray(sample, dtype=np.float64)
        col = (np.asarray(trace, dtype=np.float64) - self.col_origin) / self.col_scale
        origin = np.asarray(self.row_origin, dtype=np.float64)[np.rint(col).astype(np.int64)]
        return (sample - origin) / self.row_scale, col


@dataclass(frozen=True, eq=False)
class ProbabilityMap:
    values: np.ndarray
    grid: GridMeta = field(default=None)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise DataError("probability map must be 2-D")
        if np.any(~np.isfinite(v)) or np.any(v < 0) or np.any(v > 1):
            raise DataError("probabilities must lie in [0, 1]")
        object.__setattr__(self, "values", _frozen(v))
        if self.grid is None:
            object.__setattr__(self, "grid", GridMeta.identity(v.shape[1]))

    @property
    def shape(self):
        return self.values.shape


def load_gather(path) -> Gather:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: too short for an FBG header")
    magic, n_traces, n_samples, dt = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if n_traces == 0 or n_samples == 0:
        raise FormatError(f"{path}: empty gather in header")
    expected = _HEADER.size + 8 * n_traces + 4 * n_traces * n_samples
    if len(raw) < expected:
        raise TruncatedFileError(f"{path}: payload holds {len(raw)} bytes, header implies {expected}")
    if len(raw) > expected:
        raise FormatError(f"{path}: {len(raw) - expected} trailing bytes")
    offsets = np.frombuffer(raw, "<f8", n_traces, _HEADER.size)
    amps = np.frombuffer(raw, "<f4", n_traces * n_samples, _HEADER.size + 8 * n_traces)
    amps = amps.reshape(n_traces, n_samples).T
    return Gather(amps, dt, offsets)


def save_gather(g: Gather, path) -> None:
    """Write ``g``; amplitudes are narrowed to float32."""
    header = _HEADER.pack(MAGIC, g.n_traces, g.n_samples, g.dt)
    body = g.offsets.astype("<f8").tobytes() + np.ascontiguousarray(g.amplitudes.T).astype("<f4").tobytes()
    Path(path).write_bytes(header + body)


def load_picks(path, n_samples: int | None = None) -> PickSet:
    rows = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            idx, sample = (int(x) for x in line.split(","))
        except ValueError:
            raise FormatError(f"{path}:{lineno}: expected 'trace,sample', got {line!r}") from None
        if idx != len(rows):
            raise FormatError(f"{path}:{lineno}: trace index {idx}, expected {len(rows)}")
        rows.append(sample)
    picks = PickSet(np.array(rows, dtype=np.int64))
    if n_samples is not None:
        picks.validate(n_samples)
    return picks


def save_picks(p: PickSet, path) -> None:
    lines = "".join(f"{i},{int(s)}\n" for i, s in enumerate(p.picks))
    Path(path).write_text(lines, encoding="utf-8", newline="")
