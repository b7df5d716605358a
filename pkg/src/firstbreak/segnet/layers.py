"""Forward and backward kernels for the U-Net building blocks.

Activations are NCHW float64. Kernel layouts are (O, C, 3, 3) for
convolutions and (C_in, C_out, 4, 4) for transposed convolutions. Each
``*_forward`` returns ``(out, cache)`` and the matching ``*_backward`` consumes
the upstream gradient and that cache.

The 3x3 convolution works on a zero-padded image flattened per channel: with
row pitch ``W + 2`` every kernel tap becomes one contiguous slice of that
buffer, so the layer is nine small GEMMs per image and never materializes an
im2col matrix. The two junk columns per output row are dropped afterwards.
"""
import numpy as np

BN_EPS = 1e-5
BN_MOMENTUM = 0.1

_TAPS = [(a, b) for a in range(3) for b in range(3)]
# below this many output pixels per batch, broadcasting over the batch beats per-image loops
SMALL_CONV = 4096


def _flat_pad(x):
    N, C, H, W = x.shape
    pitch = W + 2
    buf = np.zeros((N, C, (H + 2) * pitch + 2))
    buf[:, :, :(H + 2) * pitch].reshape(N, C, H + 2, pitch)[:, :, 1:H + 1, 1:W + 1] = x
    return buf


def conv3x3_forward(x, w, b):
    """3x3 convolution, stride 1, zero padding 1."""
    N, C, H, W = x.shape
    O = w.shape[0]
    pitch = W + 2
    span = H * pitch
    buf = _flat_pad(x)
    taps = [np.ascontiguousarray(w[:, :, a, c]) for a, c in _TAPS]
    if N * H * W <= SMALL_CONV:
        out = b[None, :, None] + sum(taps[k] @ buf[:, :, a * pitch + c:a * pitch + c + span]
                                     for k, (a, c) in enumerate(_TAPS))
        return out.reshape(N, O, H, pitch)[..., :W], (buf, w, x.shape)
    out = np.empty((N, O, span))
    tmp = np.empty((O, span))
    for n in range(N):
        acc = out[n]
        acc[:] = b[:, None]
        for (a, c), wk in zip(_TAPS, taps):
            s = a * pitch + c
            np.matmul(wk, buf[n, :, s:s + span], out=tmp)
            acc += tmp
    out = out.reshape(N, O, H, pitch)[..., :W]
    return out, (buf, w, x.shape)


def conv3x3_backward(dout, cache, need_dx=True):
    buf, w, shape = cache
    N, C, H, W = shape
    O = w.shape[0]
    pitch = W + 2
    span = H * pitch
    dpad = np.zeros((N, O, H, pitch))
    dpad[..., :W] = dout
    dpad = dpad.reshape(N, O, span)
    db = dout.sum(axis=(0, 2, 3))
    dw = np.zeros_like(w)
    taps_t = [np.ascontiguousarray(w[:, :, a, c].T) for a, c in _TAPS]
    dbuf = np.zeros_like(buf) if need_dx else None
    if N * H * W <= SMALL_CONV:
        for (a, c), wt in zip(_TAPS, taps_t):
            s = a * pitch + c
            win = buf[:, :, s:s + span]
            dw[:, :, a, c] = np.einsum("nol,ncl->oc", dpad, win)
            if need_dx:
                dbuf[:, :, s:s + span] += wt @ dpad
    else:
        _conv_backward_loop(buf, dpad, taps_t, dw, dbuf, pitch, span)
    if not need_dx:
        return None, dw, db
    dx = dbuf[:, :, :(H + 2) * pitch].reshape(N, C, H + 2, pitch)[:, :, 1:H + 1, 1:W + 1]
    return dx, dw, db


def _conv_backward_loop(buf, dpad, taps_t, dw, dbuf, pitch, span):
    tmp = np.empty((buf.shape[1], span))
    for n in range(buf.shape[0]):
        d = dpad[n]
        for (a, c), wt in zip(_TAPS, taps_t):
            s = a * pitch + c
            dw[:, :, a, c] += d @ buf[n, :, s:s + span].T
            if dbuf is not None:
                np.matmul(wt, d, out=tmp)
                dbuf[n, :, s:s + span] += tmp


def upconv_forward(x, w, b):
    """Transposed convolution, kernel 4, stride 2, padding 1: doubles H and W."""
    N, Ci, H, W = x.shape
    co = w.shape[1]
    wt = np.ascontiguousarray(w.transpose(0, 2, 3, 1).reshape(Ci, 16 * co).T)
    full = np.zeros((N, co, 2 * H + 2, 2 * W + 2))
    for n in range(N):
        cols = (wt @ x[n].reshape(Ci, H * W)).reshape(4, 4, co, H, W)
        for ki in range(4):
            for kj in range(4):
                full[n, :, ki:ki + 2 * H:2, kj:kj + 2 * W:2] += cols[ki, kj]
    out = full[:, :, 1:-1, 1:-1] + b[None, :, None, None]
    return out, (x, w)


def upconv_backward(dout, cache):
    x, w = cache
    N, Ci, H, W = x.shape
    co = w.shape[1]
    db = dout.sum(axis=(0, 2, 3))
    wm = w.transpose(0, 2, 3, 1).reshape(Ci, 16 * co)
    dfull = np.pad(dout, ((0, 0), (0, 0), (1, 1), (1, 1)))
    dx = np.empty(x.shape)
    dwm = np.zeros((Ci, 16 * co))
    dcols = np.empty((4, 4, co, H, W))
    for n in range(N):
        for ki in range(4):
            for kj in range(4):
                dcols[ki, kj] = dfull[n, :, ki:ki + 2 * H:2, kj:kj + 2 * W:2]
        d2 = dcols.reshape(16 * co, H * W)
        xn = x[n].reshape(Ci, H * W)
        dx[n] = (wm @ d2).reshape(Ci, H, W)
        dwm += xn @ d2.T
    dw = dwm.reshape(Ci, 4, 4, co).transpose(0, 3, 1, 2)
    return dx, dw, db


def batchnorm_forward(x, gamma, beta, running_mean, running_var, training):
    """Per-channel batch norm. Returns ``(out, cache, stats)``.

    In training mode the batch statistics normalize the input and are returned
    as ``(mean, var, count)`` for the running averages; in inference mode the
    running statistics are used and the stats slot is ``None``.
    """
    if training:
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        stats = (mean, var, x.shape[0] * x.shape[2] * x.shape[3])
    else:
        mean, var = running_mean, running_var
        stats = None
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - mean[:, None, None]) * inv_std[:, None, None]
    out = gamma[:, None, None] * xhat + beta[:, None, None]
    return out, (xhat, gamma, inv_std, training), stats


def batchnorm_backward(dout, cache):
    xhat, gamma, inv_std, training = cache
    dgamma = np.sum(dout * xhat, axis=(0, 2, 3))
    dbeta = dout.sum(axis=(0, 2, 3))
    dxhat = dout * gamma[:, None, None]
    if training:
        m = dout.shape[0] * dout.shape[2] * dout.shape[3]
        s1 = dxhat.sum(axis=(0, 2, 3))[:, None, None]
        s2 = np.sum(dxhat * xhat, axis=(0, 2, 3))[:, None, None]
        dx = (inv_std[:, None, None] / m) * (m * dxhat - s1 - xhat * s2)
    else:
        dx = dxhat * inv_std[:, None, None]
    return dx, dgamma, dbeta


def update_running(running_mean, running_var, stats):
    """Fold batch statistics into running averages (unbiased variance)."""
    mean, var, n = stats
    unbiased = var * n / max(n - 1, 1)
    new_mean = (1 - BN_MOMENTUM) * running_mean + BN_MOMENTUM * mean
    new_var = (1 - BN_MOMENTUM) * running_var + BN_MOMENTUM * unbiased
    return new_mean, new_var


def relu_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(dout, mask):
    return dout * mask


_QUADS = ((0, 0), (0, 1), (1, 0), (1, 1))


def maxpool_forward(x):
    """2x2 max pooling, stride 2. Ties route to the first window element (row-major)."""
    quads = np.stack([x[:, :, r::2, c::2] for r, c in _QUADS], axis=-1)
    idx = np.argmax(quads, axis=-1)
    out = np.take_along_axis(quads, idx[..., None], axis=-1)[..., 0]
    return out, (idx, x.shape)


def maxpool_backward(dout, cache):
    idx, shape = cache
    dx = np.zeros(shape)
    for q, (r, c) in enumerate(_QUADS):
        dx[:, :, r::2, c::2] = dout * (idx == q)
    return dx


def sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
