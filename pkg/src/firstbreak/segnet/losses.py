"""Segmentation losses and their gradients with respect to the prediction.

Inputs are probability maps of shape (H, W) or (N, H, W); every loss is a
mean over all cells of the batch.
"""
import numpy as np

from ..errors import ConfigError, DataError

PROB_CLAMP = 1e-7
SOBEL_EPS = 1e-6
SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T.copy()


def _pair(target, pred):
    t = np.asarray(target, dtype=np.float64)
    p = np.asarray(pred, dtype=np.float64)
    if t.shape != p.shape:
        raise DataError(f"target shape {t.shape} != prediction shape {p.shape}")
    return t, p


def bce_loss(target, pred) -> float:
    return bce_loss_grad(target, pred)[0]


def bce_loss_grad(target, pred):
    t, p = _pair(target, pred)
    pc = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    cells = -t * np.log(pc) - (1.0 - t) * np.log(1.0 - pc)
    inside = (p > PROB_CLAMP) & (p < 1.0 - PROB_CLAMP)
    grad = np.where(inside, (-t / pc + (1.0 - t) / (1.0 - pc)), 0.0) / t.size
    return float(cells.mean()), grad


def _sobel_parts(img):
    """Gradients of a batch of images with replicate padding: (padded, gx, gy, magnitude)."""
    pad = np.pad(img, ((0, 0), (1, 1), (1, 1)), mode="edge")
    H, W = img.shape[1:]
    gx = np.zeros_like(img)
    gy = np.zeros_like(img)
    for a in range(3):
        for b in range(3):
            win = pad[:, a:a + H, b:b + W]
            if SOBEL_X[a, b]:
                gx += SOBEL_X[a, b] * win
            if SOBEL_Y[a, b]:
                gy += SOBEL_Y[a, b] * win
    mag = np.sqrt(gx * gx + gy * gy + SOBEL_EPS)
    return gx, gy, mag


def sobel_magnitude(img):
    """Smoothed Sobel gradient magnitude ``sqrt(Gx^2 + Gy^2 + eps)``."""
    img = np.asarray(img, dtype=np.float64)
    batch = img[None] if img.ndim == 2 else img
    out = _sobel_parts(batch)[2]
    return out[0] if img.ndim == 2 else out


def _as_batch(t, p):
    if t.ndim == 2:
        return t[None], p[None], True
    return t, p, False


def sobel_grad_loss(target, pred) -> float:
    return sobel_grad_loss_grad(target, pred)[0]


def sobel_grad_loss_grad(target, pred):
    t, p = _pair(target, pred)
    if t.shape[-1] < 3 or t.shape[-2] < 3:
        raise DataError("Sobel loss needs images of at least 3x3")
    tb, pb, squeeze = _as_batch(t, p)
    _, _, mag_t = _sobel_parts(tb)
    gx, gy, mag_p = _sobel_parts(pb)
    diff = mag_t - mag_p
    value = float(np.abs(diff).mean())
    dmag = -np.sign(diff) / diff.size
    dgx = dmag * gx / mag_p
    dgy = dmag * gy / mag_p
    N, H, W = pb.shape
    dpad = np.zeros((N, H + 2, W + 2))
    for a in range(3):
        for b in range(3):
            coef_x, coef_y = SOBEL_X[a, b], SOBEL_Y[a, b]
            if coef_x or coef_y:
                dpad[:, a:a + H, b:b + W] += coef_x * dgx + coef_y * dgy
    # fold the replicated border back onto the edge pixels it copies
    dpad[:, 1, :] += dpad[:, 0, :]
    dpad[:, -2, :] += dpad[:, -1, :]
    dpad[:, :, 1] += dpad[:, :, 0]
    dpad[:, :, -2] += dpad[:, :, -1]
    grad = dpad[:, 1:-1, 1:-1]
    return value, (grad[0] if squeeze else grad)


def mixed_loss(target, pred, lam: float = 0.2) -> float:
    return mixed_loss_grad(target, pred, lam)[0]


def mixed_loss_grad(target, pred, lam: float = 0.2):
    if lam < 0:
        raise ConfigError(f"lambda must be non-negative, got {lam}")
    value, grad = bce_loss_grad(target, pred)
    if lam == 0:
        return value, grad
    gv, gg = sobel_grad_loss_grad(target, pred)
    return value + lam * gv, grad + lam * gg


def loss_and_grad(target, pred, kind: str = "bce", lam: float = 0.2):
    if kind == "bce":
        return bce_loss_grad(target, pred)
    if kind == "mixed":
        return mixed_loss_grad(target, pred, lam)
    raise ConfigError(f"unknown loss {kind!r}")
