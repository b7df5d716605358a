"""Central finite differences over U-Net parameters."""
import numpy as np

from firstbreak.segnet.losses import loss_and_grad
from firstbreak.segnet.unet import _run, loss_and_grads


def toy_problem(cfg, seed=3, perturb=0.1, n=3):
    from firstbreak.segnet import init_params

    rng = np.random.default_rng(seed)
    p = init_params(cfg, seed)
    for k in p.weights:
        p.weights[k] = p.weights[k] + perturb * rng.standard_normal(p.weights[k].shape)
    x = rng.standard_normal((n, cfg.in_channels) + cfg.input_shape)
    y = (rng.random((n,) + cfg.input_shape) > 0.8).astype(float)
    return p, x, y


def max_relative_error(params, cfg, x, y, loss, h=1e-5, lam=0.2, entries=None, seed=0):
    """Worst elementwise ``|a - n| / max(|a|, |n|, 1e-6)`` over the checked entries.

    ``entries=None`` checks every parameter entry; an integer checks that many
    random entries per tensor.
    """
    _, grads, _ = loss_and_grads(params, cfg, x, y, loss, lam)

    def f():
        prob, _, _ = _run(params, cfg, x, True)
        return loss_and_grad(y, prob, loss, lam)[0]

    rng = np.random.default_rng(seed)
    worst, where = 0.0, None
    for k, w in params.weights.items():
        idx = list(np.ndindex(w.shape))
        if entries is not None and len(idx) > entries:
            idx = [idx[i] for i in rng.choice(len(idx), entries, replace=False)]
        for i in idx:
            o = w[i]
            w[i] = o + h
            fp = f()
            w[i] = o - h
            fm = f()
            w[i] = o
            num = (fp - fm) / (2 * h)
            a = grads[k][i]
            rel = abs(a - num) / max(abs(a), abs(num), 1e-6)
            if rel > worst:
                worst, where = rel, (k, i)
    return worst, where
