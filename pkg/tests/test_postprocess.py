import numpy as np
import pytest
from hypothesis import given, strategies as st

from firstbreak.errors import ConfigError, CoverageError
from firstbreak.gather import Gather, ProbabilityMap
from firstbreak.lmo import LmoWindow, patch_origins
from firstbreak.postprocess import column_max_candidates, deviation_filter, splice
from firstbreak.rrve import RansacConfig

from oracles import column_argmax_scan, splice_direct


def test_splice_examples():
    a, b = np.full((3, 2), 0.2), np.full((3, 2), 0.6)
    np.testing.assert_allclose(splice([a, b], [0, 2], 4).values, np.hstack([a, b]))
    np.testing.assert_allclose(splice([a, b], [0, 1], 3).values[:, 1], 0.4)
    with pytest.raises(CoverageError):
        splice([a], [0], 3)


@given(st.integers(0, 10_000))
def test_splice_vs_accumulation_oracle(seed):
    rng = np.random.default_rng(seed)
    width = int(rng.integers(5, 60))
    pw = int(rng.integers(1, width + 1))
    base = patch_origins(width, pw, int(rng.integers(1, pw + 1)))
    origins = sorted(set(base) | set(rng.integers(0, width - pw + 1, 3).tolist()))
    patches = [rng.random((4, pw)) for _ in origins]
    got = splice(patches, origins, width).values
    np.testing.assert_allclose(got, splice_direct(patches, origins, width), rtol=0, atol=1e-12)
    assert got.min() >= 0 and got.max() <= 1


def test_column_max_examples():
    rows, p = column_max_candidates(ProbabilityMap(np.array([[0.1, 0.5], [0.9, 0.5], [0.3, 0.5]])))
    assert rows.tolist() == [1, 0] and p.tolist() == [0.9, 0.5]


@given(st.integers(0, 10_000))
def test_column_max_scan_oracle(seed):
    v = np.round(np.random.default_rng(seed).random((12, 9)), 1)  # rounding forces ties
    rows, _ = column_max_candidates(ProbabilityMap(v))
    np.testing.assert_array_equal(rows, column_argmax_scan(v))


def _line_gather(n=40, v=2500.0, t0=0.06, dt=0.004):
    offs = np.arange(n) * 25.0
    g = Gather(np.zeros((400, n)), dt, offs)
    rows = np.floor((offs / v + t0) / dt + 0.5).astype(int)
    return g, rows


def test_all_on_line_retained():
    g, rows = _line_gather()
    res = deviation_filter(rows, np.ones(len(rows)), g)
    assert res.rows.picks.tolist() == rows.tolist() and not res.flagged


def test_single_displacement_boundary():
    # exact line: v = 2000 m/s, 40 m spacing, dt = 4 ms -> 5 samples per trace, t0 at row 20
    g = Gather(np.zeros((400, 40)), 0.004, np.arange(40) * 40.0)
    rows = 20 + 5 * np.arange(40)
    bumped = rows.copy()
    bumped[7] += 6
    res = deviation_filter(bumped, np.ones(40), g, td=5)
    assert np.flatnonzero(res.rows.picks == -1).tolist() == [7]
    bumped[7] = rows[7] + 5
    assert np.all(deviation_filter(bumped, np.ones(40), g, td=5).rows.picks != -1)


def test_spurious_maxima_removed():
    rng = np.random.default_rng(0)
    g, truth = _line_gather(64)
    cand = truth.copy()
    bad = rng.choice(64, 6, replace=False)
    cand[bad] = rng.integers(0, 400, 6)
    cand[bad] = np.where(np.abs(cand[bad] - truth[bad]) <= 5, cand[bad] + 50, cand[bad])
    res = deviation_filter(cand, np.ones(64), g)
    kept = res.rows.picks != -1
    assert not kept[bad].any()
    assert np.mean(np.abs(res.rows.picks[kept] - truth[kept])) <= 1.0


def test_window_coordinates_and_floor():
    g, truth = _line_gather()
    w = LmoWindow(truth - 32, 64, 400)
    rows = np.full(40, 32)
    probs = np.ones(40)
    probs[3] = 0.01
    res = deviation_filter(rows, probs, g, w)
    assert res.rows.picks[3] == -1 and np.all(np.delete(res.rows.picks, 3) == 32)
    res = deviation_filter(rows, probs, g, w, prob_floor=None)
    assert np.all(res.rows.picks == 32)


@given(st.integers(0, 1000), st.integers(1, 10), st.integers(0, 10))
def test_never_moves_and_monotone_in_td(seed, td, extra):
    rng = np.random.default_rng(seed)
    g, truth = _line_gather()
    cand = truth + rng.integers(-15, 16, truth.size)
    a = deviation_filter(cand, np.ones(truth.size), g, td=td, rc=RansacConfig(rng_seed=seed))
    b = deviation_filter(cand, np.ones(truth.size), g, td=td + extra, rc=RansacConfig(rng_seed=seed))
    ka, kb = a.rows.picks != -1, b.rows.picks != -1
    assert np.all(a.rows.picks[ka] == cand[ka])
    assert np.all(kb[ka])


def test_fallback_and_errors():
    g, truth = _line_gather(40)
    res = deviation_filter(truth, np.ones(40), g, rc=RansacConfig(n=8, d=39))
    assert res.flagged and np.all(res.rows.picks == truth)
    assert np.all(deviation_filter(truth, np.zeros(40), g).rows.picks == -1)
    with pytest.raises(ConfigError):
        deviation_filter(truth, np.ones(40), g, td=0)
