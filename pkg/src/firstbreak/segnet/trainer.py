"""Mini-batch training with periodic validation and early stopping."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import ConfigError
from .optim import init_state, optimizer_step
from .unet import ModelParams, UNetConfig, apply_batch_stats, forward, init_params, loss_and_grads
from .losses import loss_and_grad

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adam"
    learning_rate: float = 0.005
    batch_size: int = 64
    max_iterations: int = 20000
    validate_every: int = 15
    early_stop_patience: int = 8
    loss: str = "bce"
    lam: float = 0.2
    rng_seed: int = 0

    def __post_init__(self):
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be adam or sgd, got {self.optimizer!r}")
        if self.loss not in ("bce", "mixed"):
            raise ConfigError(f"loss must be bce or mixed, got {self.loss!r}")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1 or self.validate_every < 1 or self.early_stop_patience < 1:
            raise ConfigError("batch_size, validate_every and patience must be >= 1")
        if self.max_iterations < 0:
            raise ConfigError("max_iterations must be >= 0")
        if self.lam < 0:
            raise ConfigError("lambda must be non-negative")


@dataclass
class Evaluation:
    iteration: int
    train_loss: float
    val_loss: float


@dataclass
class TrainResult:
    params: ModelParams
    history: list = field(default_factory=list)
    opt_state: dict = None
    iteration: int = 0
    best_iteration: int | None = None
    stopped_early: bool = False


def early_stopping_loop(step: Callable[[], float], validate: Callable[[], float], max_iterations: int,
                        validate_every: int, patience: int, on_best: Callable[[], None] = lambda: None,
                        start_iteration: int = 0):
    """Drive ``step`` until the iteration cap or until validation stalls.

    ``validate`` runs after every ``validate_every`` calls to ``step``. A result
    counts as an improvement only if strictly below the best so far; after
    ``patience`` consecutive non-improving evaluations the loop halts.
    ``on_best`` is invoked whenever a new best is recorded.

    Returns ``(history, best_iteration, stopped_early, iterations_run)``.
    """
    history = []
    best = np.inf
    best_iter = None
    stale = 0
    recent = []
    it = 0
    while it < max_iterations:
        recent.append(step())
        it += 1
        if it % validate_every:
            continue
        val = validate()
        ev = Evaluation(start_iteration + it, float(np.mean(recent)), float(val))
        recent = []
        history.append(ev)
        if val < best:
            best, best_iter, stale = val, ev.iteration, 0
            on_best()
        else:
            stale += 1
            if stale >= patience:
                return history, best_iter, True, it
    return history, best_iter, False, it


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    """Endless stream of index batches; epochs are reshuffled, short tails wrap around."""
    while True:
        perm = rng.permutation(n)
        if n % batch_size:
            perm = np.concatenate([perm, perm[: batch_size - n % batch_size]])
        for s in range(0, perm.shape[0], batch_size):
            yield perm[s:s + batch_size]


def evaluate_loss(params: ModelParams, cfg: UNetConfig, inputs, targets, loss: str, lam: float,
                  chunk: int = 16) -> float:
    """Inference-mode loss over a whole dataset, accumulated chunk by chunk in order."""
    total = 0.0
    n = inputs.shape[0]
    for s in range(0, n, chunk):
        pred = forward(params, cfg, inputs[s:s + chunk])
        value, _ = loss_and_grad(targets[s:s + chunk], pred, loss, lam)
        total += value * pred.shape[0]
    return total / n


def train(cfg: UNetConfig, train_set, val_set, tc: TrainConfig, params: ModelParams | None = None,
          opt_state: dict | None = None, start_iteration: int = 0) -> TrainResult:
    """Train a U-Net; returns the parameters with the lowest validation loss.

    ``train_set`` and ``val_set`` are ``(inputs, targets)`` pairs shaped
    ``(N, C, H, W)`` and ``(N, H, W)``. Passing ``params``/``opt_state`` resumes
    a previous run.
    """
    x_tr, y_tr = (np.asarray(a, dtype=np.float64) for a in train_set)
    x_va, y_va = (np.asarray(a, dtype=np.float64) for a in val_set)
    if x_tr.shape[0] == 0 or x_va.shape[0] == 0:
        raise ConfigError("training and validation sets must be non-empty")
    if x_tr.shape[0] != y_tr.shape[0] or x_va.shape[0] != y_va.shape[0]:
        raise ConfigError("inputs and targets differ in length")
    rng = np.random.default_rng(tc.rng_seed)
    state = {
        "params": params.copy() if params is not None else init_params(cfg, tc.rng_seed),
        "opt": opt_state if opt_state is not None else None,
    }
    if state["opt"] is None:
        state["opt"] = init_state(state["params"].weights, tc.optimizer)
    best = {"params": state["params"].copy()}
    batches = _batches(x_tr.shape[0], tc.batch_size, rng)

    def step():
        idx = next(batches)
        p = state["params"]
        value, grads, stats = loss_and_grads(p, cfg, x_tr[idx], y_tr[idx], tc.loss, tc.lam)
        weights, state["opt"] = optimizer_step(p.weights, grads, state["opt"], tc.optimizer, tc.learning_rate)
        new = ModelParams(weights, dict(p.buffers))
        apply_batch_stats(new, stats)
        state["params"] = new
        return value

    def validate():
        val = evaluate_loss(state["params"], cfg, x_va, y_va, tc.loss, tc.lam)
        log.info("validation loss %.6f", val)
        return val

    def on_best():
        best["params"] = state["params"].copy()

    history, best_iter, stopped, ran = early_stopping_loop(
        step, validate, tc.max_iterations, tc.validate_every, tc.early_stop_patience, on_best, start_iteration
    )
    # no validation ran: nothing to select among, keep the latest weights
    final = best["params"] if best_iter is not None else state["params"]
    return TrainResult(final, history, state["opt"], start_iteration + ran, best_iter, stopped)
