"""Constant-velocity synthetic shot gathers with known first arrivals.

Every trace carries a Ricker wavelet centred on ``t_i = d_i / v + t0`` plus
white Gaussian noise; the wavelet peak has unit amplitude, so
``noise_sigma`` is directly the noise-to-peak ratio.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .gather import NO_PICK, Gather, PickSet


@dataclass(frozen=True)
class SynthConfig:
    v: float = 3000.0
    t0: float = 0.05
    n_traces: int = 64
    n_samples: int = 512
    dt: float = 0.004
    offset_spacing: float = 25.0
    offset_origin: float = 0.0
    peak_frequency: float = 30.0
    noise_sigma: float = 0.1
    rng_seed: int = 0
    outlier_fraction: float = 0.0

    def __post_init__(self):
        for name in ("v", "dt", "offset_spacing", "peak_frequency"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.n_traces < 1 or self.n_samples < 2:
            raise ConfigError("need at least one trace and two samples")
        if self.t0 < 0 or self.offset_origin < 0 or self.noise_sigma < 0:
            raise ConfigError("t0, offset_origin and noise_sigma must be non-negative")
        if not 0 <= self.outlier_fraction <= 1:
            raise ConfigError("outlier_fraction must lie in [0, 1]")

    @property
    def offsets(self) -> np.ndarray:
        return self.offset_origin + self.offset_spacing * np.arange(self.n_traces)

    def arrival_times(self) -> np.ndarray:
        return self.offsets / self.v + self.t0


def ricker(t: np.ndarray, f: float) -> np.ndarray:
    a = (math.pi * f * t) ** 2
    return (1.0 - 2.0 * a) * np.exp(-a)


def clean_traces(cfg: SynthConfig) -> np.ndarray:
    t = np.arange(cfg.n_samples)[:, None] * cfg.dt
    return ricker(t - cfg.arrival_times()[None, :], cfg.peak_frequency)


def generate(cfg: SynthConfig):
    """Return ``(Gather, truth PickSet)``; truth is the wavelet peak sample."""
    fat = cfg.arrival_times() / cfg.dt
    if np.any(fat < 0) or np.any(fat > cfg.n_samples - 1):
        raise ConfigError(f"arrival rows span [{fat.min():.1f}, {fat.max():.1f}], record has {cfg.n_samples} samples")
    clean = clean_traces(cfg)
    truth = np.argmax(clean, axis=0)
    rng = np.random.default_rng(cfg.rng_seed)
    noisy = clean + cfg.noise_sigma * rng.standard_normal(clean.shape)
    return Gather(noisy, cfg.dt, cfg.offsets), PickSet(truth)


def corrupt_picks(p: PickSet, fraction: float, max_shift: int, n_samples: int, rng_seed: int = 0) -> PickSet:
    """Displace a random ``fraction`` of the picked traces by 1..``max_shift`` samples."""
    if not 0 <= fraction <= 1 or max_shift < 1:
        raise ConfigError("need fraction in [0, 1] and max_shift >= 1")
    rng = np.random.default_rng(rng_seed)
    idx = np.flatnonzero(p.picked)
    chosen = rng.choice(idx, size=int(round(fraction * idx.size)), replace=False)
    shift = rng.integers(1, max_shift + 1, size=chosen.size) * rng.choice([-1, 1], size=chosen.size)
    out = p.picks.copy()
    out[chosen] = np.clip(out[chosen] + shift, 0, n_samples - 1)
    return PickSet(out)


def pre_arrival_sigma(g: Gather, truth: PickSet, cfg: SynthConfig, guard: float = 1.5) -> float:
    """Noise level estimated from samples before each arrival.

    Samples within ``guard`` wavelet periods of the arrival are skipped; what
    remains is pure noise up to the negligible Ricker tail.
    """
    gap = int(math.ceil(guard / (cfg.peak_frequency * cfg.dt)))
    parts = [g.amplitudes[:max(int(s) - gap, 0), i] for i, s in enumerate(truth.picks) if s != NO_PICK]
    noise = np.concatenate(parts) if parts else np.zeros(0)
    if noise.size < 2:
        raise ConfigError("no pre-arrival samples to estimate noise from")
    return float(np.std(noise, ddof=1))


def snr_db(noise_sigma: float) -> float:
    """Peak-to-noise ratio in dB for a unit-peak wavelet."""
    return math.inf if noise_sigma == 0 else -20.0 * math.log10(noise_sigma)


def sample_configs(base: SynthConfig, count: int, seed: int, v_range=(2000.0, 5000.0),
                   t0_range=(0.04, 0.2), exclude: tuple[float, float] | None = None) -> list[SynthConfig]:
    """Draw ``count`` configs with random ``(v, t0)`` and per-gather noise seeds.

    ``exclude=(v, half_width)`` keeps velocities out of ``[v - hw, v + hw]`` so
    held-out test moveouts are never seen in training.
    """
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        v = float(rng.uniform(*v_range))
        t0 = float(rng.uniform(*t0_range))
        noise_seed = int(rng.integers(0, 2**31 - 1))
        if exclude is not None and abs(v - exclude[0]) <= exclude[1]:
            continue
        out.append(replace(base, v=v, t0=t0, rng_seed=noise_seed))
    return out
