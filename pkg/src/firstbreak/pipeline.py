"""The four-stage picker wired together, plus training-set assembly.

Order of operations for one gather: trace normalization and downsampling,
coarse network, credible-point extraction, robust moveout fit, LMO window,
STA/LTA channel and patch cropping, fine network, splicing, column maxima,
deviation filter, the inverse window shift and, if configured, snapping each
pick onto the nearest peak (or trough) of its trace.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .config import PipelineConfig
from .errors import DataError, DegenerateFitError, InterpolationError, NoConsensusError
from .gather import NO_PICK, Gather, GridMeta, PickSet, ProbabilityMap
from .lmo import LmoWindow, crop_patches, flat_window, forward_picks, inverse_lmo, window_array, window_from_reference
from .postprocess import column_max_candidates, deviation_filter, splice
from .preprocess import (PickMode, downsample_bilinear, make_csn_target, make_rsn_target, normalize_traces, snap_picks,
                         sta_lta_array)
from .rrve import LmoModel, TimeOffsetPoints, extract_points, fit_bounded, ransac_wvc, reference_fat
from .segnet import ModelParams, TrainResult, UNetConfig, forward, init_state, train
from .segnet.checkpoint import Checkpoint

log = logging.getLogger(__name__)

INFERENCE_CHUNK = 16


@dataclass
class Prediction:
    picks: PickSet
    flagged: bool = False
    model: LmoModel | None = None
    window: LmoWindow | None = None
    csn_map: ProbabilityMap | None = None
    rsn_map: ProbabilityMap | None = None
    candidates: np.ndarray | None = None
    notes: list = field(default_factory=list)


def _infer(params: ModelParams, cfg: UNetConfig, x: np.ndarray) -> np.ndarray:
    return np.concatenate([forward(params, cfg, x[s:s + INFERENCE_CHUNK])
                           for s in range(0, x.shape[0], INFERENCE_CHUNK)])


def csn_input(g: Gather, cfg: PipelineConfig):
    """``(1, h, w)`` network input and the grid mapping it back to the gather."""
    h, w = cfg.csn.height, cfg.csn.width
    img = downsample_bilinear(normalize_traces(g.amplitudes), h, w)
    return img[None], GridMeta.resample((g.n_samples, g.n_traces), (h, w))


def make_window(g: Gather, ref_times, cfg: PipelineConfig, model: LmoModel | None = None) -> LmoWindow:
    if cfg.use_lmo:
        return window_from_reference(ref_times, g.dt, cfg.window_height, g.n_samples, model)
    return flat_window(ref_times, g.dt, cfg.window_height, g.n_samples)


def rsn_input(g: Gather, w: LmoWindow, cfg: PipelineConfig):
    """Patches ``(P, C, H', W')`` of the window image and their column origins."""
    chans = [normalize_traces(window_array(g.amplitudes, w))]
    if cfg.use_stalta_channel:
        chans.append(normalize_traces(window_array(sta_lta_array(g.amplitudes, cfg.stalta()), w)))
    return crop_patches(np.stack(chans), cfg.rsn.width, cfg.patch_stride)


def fit_reference(prob: ProbabilityMap, g: Gather, cfg: PipelineConfig):
    """Robust moveout line through the credible cells; ``(model or None, flagged)``."""
    pts = extract_points(prob, g, cfg.split_threshold)
    if len(pts) == 0:
        return None, True
    try:
        return ransac_wvc(pts, cfg.bounds(), cfg.ransac()), False
    except (NoConsensusError, DataError) as exc:
        log.warning("RANSAC failed (%s); fitting all %d points", exc, len(pts))
    try:
        return fit_bounded(pts, cfg.bounds()), True
    except DegenerateFitError:
        return None, True


def predict(g: Gather, csn: Checkpoint, rsn: Checkpoint, cfg: PipelineConfig) -> Prediction:
    dead = np.all(g.amplitudes == 0, axis=0)
    empty = PickSet(np.full(g.n_traces, NO_PICK))
    if np.all(dead):
        return Prediction(empty, True, notes=["all traces are zero"])
    x, grid = csn_input(g, cfg)
    csn_map = ProbabilityMap(_infer(csn.params, csn.config, x[None])[0], grid)
    model, flagged = fit_reference(csn_map, g, cfg)
    if model is None:
        return Prediction(empty, True, csn_map=csn_map, notes=["no usable reference line"])
    window = make_window(g, reference_fat(model, g), cfg, model)
    patches, origins = rsn_input(g, window, cfg)
    probs = _infer(rsn.params, rsn.config, patches)
    rsn_map = splice(probs, origins, g.n_traces)
    rows, p = column_max_candidates(rsn_map)
    notes = []
    if cfg.use_postprocess:
        res = deviation_filter(rows, p, g, window, cfg.bounds(), cfg.ransac(), cfg.td, cfg.prob_floor)
        final_rows = res.rows.picks
        if res.flagged:
            flagged = True
            notes.append("deviation filter used a fallback reference")
    else:
        final_rows = rows
    picks = inverse_lmo(final_rows, window)
    if cfg.output_snap_radius:
        picks = snap_picks(g, picks, PickMode(cfg.pick_mode, cfg.output_snap_radius))
    picks = picks.picks.copy()
    picks[dead] = NO_PICK
    return Prediction(PickSet(picks), flagged, model, window, csn_map, rsn_map, rows, notes)


def correct_labels(g: Gather, p: PickSet, cfg: PipelineConfig) -> PickSet:
    return snap_picks(g, p, cfg.picking()) if cfg.pick_correction else p


def csn_examples(pairs, cfg: PipelineConfig):
    xs, ys = [], []
    h, w = cfg.csn.height, cfg.csn.width
    for i, (g, p) in enumerate(pairs):
        try:
            y = make_csn_target(p, (g.n_samples, g.n_traces), (h, w)).values
        except InterpolationError as exc:
            log.warning("skipping gather %d: %s", i, exc)
            continue
        xs.append(csn_input(g, cfg)[0])
        ys.append(y)
    return xs, ys


def label_reference(g: Gather, p: PickSet, cfg: PipelineConfig) -> LmoModel:
    """Moveout line through the labels themselves, for RSN training without a CSN."""
    m = p.picked
    return fit_bounded(TimeOffsetPoints(g.offsets[m], p.picks[m] * g.dt), cfg.bounds())


def rsn_examples(pairs, cfg: PipelineConfig, csn: Checkpoint | None = None, rng_seed: int = 0):
    """Window patches and single-pixel targets.

    The window comes from the CSN + RANSAC reference when a CSN checkpoint is
    given and from a line fitted to the labels otherwise. Each gather's
    reference is then shifted by a random whole number of samples in
    ``[-rsn_ref_jitter, rsn_ref_jitter]`` so the fine network does not learn
    that the arrival always sits mid-window.
    """
    rng = np.random.default_rng(rng_seed)
    xs, ys = [], []
    for i, (g, p) in enumerate(pairs):
        shift = int(rng.integers(-cfg.rsn_ref_jitter, cfg.rsn_ref_jitter + 1))
        try:
            if csn is not None:
                x, grid = csn_input(g, cfg)
                model, _ = fit_reference(ProbabilityMap(_infer(csn.params, csn.config, x[None])[0], grid), g, cfg)
                if model is None:
                    raise DegenerateFitError("CSN produced no usable reference")
            else:
                model = label_reference(g, p, cfg)
        except DataError as exc:
            log.warning("skipping gather %d: %s", i, exc)
            continue
        ref = reference_fat(model, g) + shift * g.dt
        window = make_window(g, ref, cfg, model)
        rows = forward_picks(p, window)
        target = make_rsn_target(rows, (cfg.window_height, g.n_traces)).values
        patches, _ = rsn_input(g, window, cfg)
        tpatches, _ = crop_patches(target, cfg.rsn.width, cfg.patch_stride)
        xs.extend(patches)
        ys.extend(tpatches)
    return xs, ys


def split_indices(n: int, val_fraction: float, seed: int):
    """Deterministic train/validation split; both parts non-empty when ``n >= 2``."""
    perm = np.random.default_rng(seed).permutation(n)
    n_val = min(max(1, int(round(val_fraction * n))), max(n - 1, 1))
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def train_stage(stage: str, pairs, cfg: PipelineConfig, resume: Checkpoint | None = None,
                csn: Checkpoint | None = None):
    """Train one stage on ``(Gather, PickSet)`` pairs; returns ``(Checkpoint, TrainResult)``."""
    pairs = [(g, correct_labels(g, p, cfg)) for g, p in pairs]
    tr_idx, va_idx = split_indices(len(pairs), cfg.val_fraction, cfg.seed)
    if stage == "csn":
        net = cfg.csn_unet()
        build = lambda subset, seed: csn_examples(subset, cfg)  # noqa: E731
    else:
        net = cfg.rsn_unet()
        build = lambda subset, seed: rsn_examples(subset, cfg, csn, seed)  # noqa: E731
    x_tr, y_tr = build([pairs[i] for i in tr_idx], cfg.seed)
    x_va, y_va = build([pairs[i] for i in va_idx], cfg.seed + 1)
    if not x_tr or not x_va:
        raise DataError(f"no usable {stage} training examples after skipping unlabeled gathers")
    tc = cfg.train_config(stage)
    params = opt = None
    start = 0
    if resume is not None:
        if resume.config != net:
            raise DataError(f"resume checkpoint is a {resume.config}, expected {net}")
        params, start = resume.params, resume.iteration
        opt = resume.opt_state if resume.optimizer == tc.optimizer else None
        if opt is None:
            opt = init_state(params.weights, tc.optimizer)
    result = train(net, (np.stack(x_tr), np.stack(y_tr)), (np.stack(x_va), np.stack(y_va)), tc,
                   params, opt, start)
    meta = {
        "stage": stage,
        "best_iteration": result.best_iteration,
        "stopped_early": result.stopped_early,
        "n_train": len(x_tr),
        "n_val": len(x_va),
    }
    ck = Checkpoint(net, result.params, tc.optimizer, result.opt_state, result.iteration, meta)
    return ck, result
