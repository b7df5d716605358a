"""Slow, obviously-correct reference implementations used as test oracles.

Nothing here shares code with the package: loops over indices, dense
kernels and brute-force searches only.
"""
import math

import numpy as np


def conv2d_direct(x, w, b):
    """Zero-padded stride-1 3x3 convolution, one output cell at a time."""
    N, C, H, W = x.shape
    O = w.shape[0]
    out = np.zeros((N, O, H, W))
    for n in range(N):
        for o in range(O):
            for i in range(H):
                for j in range(W):
                    acc = b[o]
                    for c in range(C):
                        for a in range(3):
                            for d in range(3):
                                ii, jj = i + a - 1, j + d - 1
                                if 0 <= ii < H and 0 <= jj < W:
                                    acc += w[o, c, a, d] * x[n, c, ii, jj]
                    out[n, o, i, j] = acc
    return out


def transposed_conv_direct(x, w, b):
    """Kernel 4, stride 2, padding 1 by scattering every input cell."""
    N, Ci, H, W = x.shape
    Co = w.shape[1]
    full = np.zeros((N, Co, 2 * H + 2, 2 * W + 2))
    for n in range(N):
        for ci in range(Ci):
            for i in range(H):
                for j in range(W):
                    for a in range(4):
                        for d in range(4):
                            full[n, :, 2 * i + a, 2 * j + d] += x[n, ci, i, j] * w[ci, :, a, d]
    return full[:, :, 1:-1, 1:-1] + b[None, :, None, None]


def batchnorm_direct(x, gamma, beta, eps=1e-5):
    out = np.empty_like(x)
    for c in range(x.shape[1]):
        vals = x[:, c].ravel()
        mu = sum(vals) / len(vals)
        var = sum((v - mu) ** 2 for v in vals) / len(vals)
        out[:, c] = gamma[c] * (x[:, c] - mu) / math.sqrt(var + eps) + beta[c]
    return out


def bce_direct(target, pred, clamp=1e-7):
    total = 0.0
    for p, q in zip(np.ravel(target), np.ravel(pred)):
        q = min(max(q, clamp), 1 - clamp)
        total += -p * math.log(q) - (1 - p) * math.log(1 - q)
    return total / np.size(target)


def sobel_direct(img, eps=1e-6):
    """Sobel magnitude with replicate padding, explicit 3x3 correlation."""
    kx = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]]
    H, W = img.shape
    out = np.zeros((H, W))
    for i in range(H):
        for j in range(W):
            gx = gy = 0.0
            for a in range(3):
                for d in range(3):
                    v = img[min(max(i + a - 1, 0), H - 1), min(max(j + d - 1, 0), W - 1)]
                    gx += kx[a][d] * v
                    gy += kx[d][a] * v
            out[i, j] = math.sqrt(gx * gx + gy * gy + eps)
    return out


def sobel_loss_direct(target, pred):
    return float(np.mean(np.abs(sobel_direct(target) - sobel_direct(pred))))


def bilinear_direct(img, h, w):
    """Corner-aligned bilinear sample of each output cell."""
    H, W = img.shape
    out = np.zeros((h, w))
    for r in range(h):
        y = r * (H - 1) / (h - 1)
        y0 = min(int(math.floor(y)), H - 2)
        fy = y - y0
        for c in range(w):
            x = c * (W - 1) / (w - 1)
            x0 = min(int(math.floor(x)), W - 2)
            fx = x - x0
            out[r, c] = ((1 - fy) * (1 - fx) * img[y0, x0] + (1 - fy) * fx * img[y0, x0 + 1]
                         + fy * (1 - fx) * img[y0 + 1, x0] + fy * fx * img[y0 + 1, x0 + 1])
    return out


def sta_lta_direct(trace, n_s, n_l, eps=1e-12):
    a = np.abs(trace)
    out = np.ones(len(a))
    for i in range(n_l, len(a)):
        short = sum(a[i - n_s:i + 1])
        long_ = sum(a[i - n_l:i + 1])
        out[i] = n_l * short / (n_s * long_ + eps)
    return out


def grid_min_objective(d, t, s_lo, s_hi, n_grid=2000):
    """Minimum of sum (t - s d - t0)^2 over an inclusive n_grid x n_grid (s, t0) grid.

    The objective is expanded in sufficient statistics so the whole grid is
    one broadcast expression; t0 spans [0, max t], which always contains the
    constrained optimum's intercept.
    """
    n = d.size
    Sd, St, Sdd, Sdt, Stt = d.sum(), t.sum(), d @ d, d @ t, t @ t
    s = np.linspace(s_lo, s_hi, n_grid)[:, None]
    t0 = np.linspace(0.0, max(t.max(), 0.0), n_grid)[None, :]
    sse = Stt - 2 * s * Sdt - 2 * t0 * St + s * s * Sdd + 2 * s * t0 * Sd + n * t0 * t0
    return float(sse.min())


def acc_direct(manual, auto, k):
    num = den = 0
    for m, a in zip(manual, auto):
        if m > 0 and a > 0:
            den += 1
            if abs(a - m) < k:
                num += 1
    return num / den if den else 0.0


def splice_direct(patches, origins, width):
    out = np.zeros((patches[0].shape[0], width))
    for c in range(width):
        cover = [p[:, c - o] for p, o in zip(patches, origins) if o <= c < o + p.shape[1]]
        out[:, c] = sum(cover) / len(cover)
    return out


def column_argmax_scan(values):
    rows = []
    for c in range(values.shape[1]):
        best = 0
        for r in range(1, values.shape[0]):
            if values[r, c] > values[best, c]:
                best = r
        rows.append(best)
    return np.array(rows)
