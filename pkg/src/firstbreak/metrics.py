"""Agreement between automatic and manual picks.

A trace counts only when both sets carry a positive pick there. MAE and
RMSE default to that joint set; ``all_traces=True`` averages raw
differences over every trace instead, sentinels included.
"""
from __future__ import annotations

import json

import numpy as np

from .errors import DataError
from .gather import PickSet

REPORT_KS = (1, 3, 9)


def _pair(manual: PickSet, auto: PickSet):
    m, a = manual.picks, auto.picks
    if m.shape != a.shape:
        raise DataError(f"pick sets differ in length: {m.shape[0]} vs {a.shape[0]}")
    return m, a


def joint_mask(manual: PickSet, auto: PickSet) -> np.ndarray:
    m, a = _pair(manual, auto)
    return (m > 0) & (a > 0)


def acc_at_k(manual: PickSet, auto: PickSet, k: float) -> float:
    m, a = _pair(manual, auto)
    joint = joint_mask(manual, auto)
    n = int(np.count_nonzero(joint))
    if n == 0:
        return 0.0
    return int(np.count_nonzero(np.abs(a[joint] - m[joint]) < k)) / n


def _diffs(manual, auto, all_traces):
    m, a = _pair(manual, auto)
    if all_traces:
        return (a - m).astype(np.float64)
    joint = joint_mask(manual, auto)
    return (a[joint] - m[joint]).astype(np.float64)


def mae(manual: PickSet, auto: PickSet, all_traces: bool = False) -> float:
    d = _diffs(manual, auto, all_traces)
    return float(np.mean(np.abs(d))) if d.size else 0.0


def rmse(manual: PickSet, auto: PickSet, all_traces: bool = False) -> float:
    d = _diffs(manual, auto, all_traces)
    return float(np.sqrt(np.mean(d * d))) if d.size else 0.0


def report(manual: PickSet, auto: PickSet, all_traces: bool = False) -> dict:
    out = {f"acc@{k}": acc_at_k(manual, auto, k) for k in REPORT_KS}
    out["mae"] = mae(manual, auto, all_traces)
    out["rmse"] = rmse(manual, auto, all_traces)
    out["n_joint"] = int(np.count_nonzero(joint_mask(manual, auto)))
    out["n_manual"] = int(np.count_nonzero(manual.picks > 0))
    out["n_auto"] = int(np.count_nonzero(auto.picks > 0))
    return out


def aggregate(pairs, all_traces: bool = False) -> dict:
    """Pool all traces of several ``(manual, auto)`` gathers into one report."""
    pairs = list(pairs)
    if not pairs:
        return report(PickSet(np.zeros(0, np.int64)), PickSet(np.zeros(0, np.int64)), all_traces)
    manual = PickSet(np.concatenate([m.picks for m, _ in pairs]))
    auto = PickSet(np.concatenate([a.picks for _, a in pairs]))
    return report(manual, auto, all_traces)


def dumps_report(per_gather: dict, total: dict) -> str:
    """Stable JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps({"gathers": per_gather, "aggregate": total}, sort_keys=True, indent=2) + "\n"
