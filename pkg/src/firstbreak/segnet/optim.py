"""SGD and Adam updates on dictionaries of parameter tensors."""
import numpy as np

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def init_state(weights: dict, optimizer: str) -> dict:
    if optimizer == "sgd":
        return {"t": 0}
    return {
        "t": 0,
        "m": {k: np.zeros_like(v) for k, v in weights.items()},
        "v": {k: np.zeros_like(v) for k, v in weights.items()},
    }


def optimizer_step(weights: dict, grads: dict, state: dict, optimizer: str, lr: float):
    """Return updated ``(weights, state)``; inputs are left untouched."""
    t = state["t"] + 1
    if optimizer == "sgd":
        return {k: w - lr * grads[k] for k, w in weights.items()}, {"t": t}
    if optimizer != "adam":
        raise ValueError(f"unknown optimizer {optimizer!r}")
    m_new, v_new, w_new = {}, {}, {}
    c1 = 1.0 - ADAM_BETA1 ** t
    c2 = 1.0 - ADAM_BETA2 ** t
    for k, w in weights.items():
        g = grads[k]
        m = ADAM_BETA1 * state["m"][k] + (1.0 - ADAM_BETA1) * g
        v = ADAM_BETA2 * state["v"][k] + (1.0 - ADAM_BETA2) * g * g
        w_new[k] = w - lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)
        m_new[k], v_new[k] = m, v
    return w_new, {"t": t, "m": m_new, "v": v_new}
