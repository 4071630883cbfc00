"""Layer primitives with hand-derived gradients (numpy, float64).

Conventions: batch-first arrays; dense weights are ``(out, in)``; LSTM
weights are ``(4H, F + H)`` acting on ``[x; h]`` with gate blocks in the
order input, forget, cell candidate, output (``"ifgo"``). Backward passes
sum over the batch; loss functions do the averaging.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GATE_ORDER = "ifgo"


class ShapeError(ValueError):
    pass


class StaleCacheError(RuntimeError):
    """Backward called with a cache from parameters that have since changed."""


def sigmoid(z):
    # tanh form avoids overflow warnings for large |z|
    return 0.5 * (1.0 + np.tanh(0.5 * z))


# ---------------------------------------------------------------- LSTM ----

@dataclass
class LstmParams:
    W: np.ndarray
    b: np.ndarray
    version: int = 0

    @property
    def hidden(self) -> int:
        return self.b.shape[0] // 4

    @property
    def in_features(self) -> int:
        return self.W.shape[1] - self.hidden


@dataclass
class LstmCache:
    x: np.ndarray
    h0: np.ndarray
    c0: np.ndarray
    hs: np.ndarray     # (B, T, H) hidden outputs
    cs: np.ndarray     # (B, T, H) cell states
    acts: np.ndarray   # (B, T, 4H) activated gates i, f, g, o
    tcs: np.ndarray    # (B, T, H) tanh(c)
    version: int


def lstm_init(in_features: int, hidden: int, rng: np.random.Generator) -> LstmParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, forget bias 1."""
    fan_in = in_features + hidden
    lim = 1.0 / np.sqrt(fan_in)
    W = rng.uniform(-lim, lim, (4 * hidden, fan_in))
    b = np.zeros(4 * hidden)
    b[hidden:2 * hidden] = 1.0
    return LstmParams(W, b)


def lstm_forward(p: LstmParams, x: np.ndarray, state=None):
    """Run the cell over ``x`` of shape (B, T, F).

    Returns ``(y, (h, c), cache)`` with ``y`` of shape (B, T, H); ``(h, c)``
    is the final state for carrying into the next call.
    """
    if x.ndim != 3:
        raise ShapeError(f"LSTM input must be (batch, time, features), got {x.shape}")
    B, T, F = x.shape
    H = p.hidden
    if F != p.in_features:
        raise ShapeError(f"LSTM expects {p.in_features} input features, got {F}")
    if state is None:
        h = np.zeros((B, H))
        c = np.zeros((B, H))
    else:
        h, c = state
        if h.shape != (B, H) or c.shape != (B, H):
            raise ShapeError(f"state must be ({B}, {H}), got {h.shape}/{c.shape}")
    h0, c0 = h, c
    Wx = p.W[:, :F]
    WhT = np.ascontiguousarray(p.W[:, F:].T)
    zx = x @ Wx.T + p.b
    hs = np.empty((B, T, H))
    cs = np.empty((B, T, H))
    tcs = np.empty((B, T, H))
    acts = np.empty((B, T, 4 * H))
    for t in range(T):
        z = zx[:, t] + h @ WhT
        a = acts[:, t]
        a[:, :2 * H] = sigmoid(z[:, :2 * H])
        a[:, 2 * H:3 * H] = np.tanh(z[:, 2 * H:3 * H])
        a[:, 3 * H:] = sigmoid(z[:, 3 * H:])
        c = a[:, H:2 * H] * c + a[:, :H] * a[:, 2 * H:3 * H]
        tc = np.tanh(c)
        h = a[:, 3 * H:] * tc
        hs[:, t] = h
        cs[:, t] = c
        tcs[:, t] = tc
    cache = LstmCache(x, h0, c0, hs, cs, acts, tcs, p.version)
    return hs, (h, c), cache


def lstm_backward(p: LstmParams, cache: LstmCache, dy: np.ndarray, dstate=None) -> dict:
    """Backpropagation through time inside one call.

    ``dy`` is dLoss/dy (B, T, H); ``dstate`` optionally the gradient w.r.t.
    the returned final (h, c). Returns gradients ``W``, ``b``, ``x``, ``h0``,
    ``c0``.
    """
    if cache.version != p.version:
        raise StaleCacheError(f"cache from parameter version {cache.version}, now {p.version}")
    x = cache.x
    B, T, F = x.shape
    H = p.hidden
    if dy.shape != (B, T, H):
        raise ShapeError(f"upstream gradient must be {(B, T, H)}, got {dy.shape}")
    Wh = p.W[:, F:]
    if dstate is None:
        dh = np.zeros((B, H))
        dc = np.zeros((B, H))
    else:
        dh, dc = (np.array(s, dtype=float) for s in dstate)
    dz = np.empty((B, T, 4 * H))
    for t in range(T - 1, -1, -1):
        a = cache.acts[:, t]
        i, f, g, o = a[:, :H], a[:, H:2 * H], a[:, 2 * H:3 * H], a[:, 3 * H:]
        tc = cache.tcs[:, t]
        c_prev = cache.cs[:, t - 1] if t > 0 else cache.c0
        dh = dh + dy[:, t]
        dc = dc + dh * o * (1.0 - tc * tc)
        d = dz[:, t]
        d[:, :H] = dc * g * i * (1.0 - i)
        d[:, H:2 * H] = dc * c_prev * f * (1.0 - f)
        d[:, 2 * H:3 * H] = dc * i * (1.0 - g * g)
        d[:, 3 * H:] = dh * tc * o * (1.0 - o)
        dc = dc * f
        dh = d @ Wh
    h_prev = np.concatenate([cache.h0[:, None], cache.hs[:, :-1]], axis=1)
    dz2 = dz.reshape(-1, 4 * H)
    dW = np.empty_like(p.W)
    dW[:, :F] = dz2.T @ x.reshape(-1, F)
    dW[:, F:] = dz2.T @ h_prev.reshape(-1, H)
    return {
        "W": dW,
        "b": dz2.sum(axis=0),
        "x": dz @ p.W[:, :F],
        "h0": dh,
        "c0": dc,
    }


# --------------------------------------------------------------- dense ----

def dense_init(n_in: int, n_out: int, rng: np.random.Generator):
    lim = 1.0 / np.sqrt(n_in)
    return rng.uniform(-lim, lim, (n_out, n_in)), np.zeros(n_out)


def dense_forward(W, b, x):
    if x.shape[-1] != W.shape[1]:
        raise ShapeError(f"dense expects {W.shape[1]} features, got {x.shape[-1]}")
    return x @ W.T + b


def dense_backward(W, x, dy):
    """Gradients of a dense map applied over any leading dimensions."""
    x2 = x.reshape(-1, x.shape[-1])
    d2 = dy.reshape(-1, dy.shape[-1])
    return {"W": d2.T @ x2, "b": d2.sum(axis=0), "x": dy @ W}


def time_distributed_dense(W, b, x):
    """Same affine map at every time step of a (B, T, H) sequence."""
    if x.ndim != 3:
        raise ShapeError(f"expected (batch, time, features), got {x.shape}")
    return dense_forward(W, b, x)


time_distributed_dense_backward = dense_backward


# ------------------------------------------------------------- dropout ----

def dropout(x, rate: float, training: bool, rng=None):
    """Inverted dropout. Returns ``(y, mask)``; ``mask`` already carries the
    1/keep scaling so the backward pass is ``dy * mask``.

    ``rng`` may be a Generator or an integer seed.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x, None
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    keep = 1.0 - rate
    mask = (rng.random(x.shape) < keep) / keep
    return x * mask, mask


def dropout_backward(dy, mask):
    return dy if mask is None else dy * mask


# ---------------------------------------------------------------- conv ----

def conv2d_init(c_in: int, c_out: int, k: int, rng: np.random.Generator):
    fan_in = c_in * k * k
    lim = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-lim, lim, (c_out, c_in, k, k)), np.zeros(c_out)


def conv2d_forward(K, b, x):
    """Valid cross-correlation. x: (N, C, H, W), K: (Co, C, kh, kw)."""
    if x.ndim != 4 or x.shape[1] != K.shape[1]:
        raise ShapeError(f"conv input {x.shape} incompatible with kernel {K.shape}")
    kh, kw = K.shape[2:]
    if x.shape[2] < kh or x.shape[3] < kw:
        raise ShapeError(f"image {x.shape[2:]} smaller than kernel {(kh, kw)}")
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    # win: (N, C, H', W', kh, kw)
    return np.einsum("nchwij,ocij->nohw", win, K, optimize=True) + b[None, :, None, None]


def conv2d_backward(K, x, dy):
    kh, kw = K.shape[2:]
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    dK = np.einsum("nchwij,nohw->ocij", win, dy, optimize=True)
    db = dy.sum(axis=(0, 2, 3))
    dx = np.zeros_like(x)
    Ho, Wo = dy.shape[2:]
    for i in range(kh):
        for j in range(kw):
            dx[:, :, i:i + Ho, j:j + Wo] += np.einsum("nohw,oc->nchw", dy, K[:, :, i, j], optimize=True)
    return {"W": dK, "b": db, "x": dx}


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(x, dy):
    return dy * (x > 0)


def maxpool2x2_forward(x):
    """2x2 max pool with stride 2; odd trailing rows/columns are dropped.

    Returns ``(y, argmax)`` where ``argmax`` picks the first maximum in each
    window (row-major), so ties route the gradient to one input.
    """
    N, C, H, W = x.shape
    Ho, Wo = H // 2, W // 2
    if Ho == 0 or Wo == 0:
        raise ShapeError(f"image {H}x{W} too small for 2x2 pooling")
    blocks = x[:, :, :2 * Ho, :2 * Wo].reshape(N, C, Ho, 2, Wo, 2).transpose(0, 1, 2, 4, 3, 5)
    blocks = blocks.reshape(N, C, Ho, Wo, 4)
    arg = blocks.argmax(axis=-1)
    y = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]
    return y, arg


def maxpool2x2_backward(x_shape, arg, dy):
    N, C, H, W = x_shape
    Ho, Wo = dy.shape[2:]
    blocks = np.zeros((N, C, Ho, Wo, 4))
    np.put_along_axis(blocks, arg[..., None], dy[..., None], axis=-1)
    blocks = blocks.reshape(N, C, Ho, Wo, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(N, C, 2 * Ho, 2 * Wo)
    dx = np.zeros(x_shape)
    dx[:, :, :2 * Ho, :2 * Wo] = blocks
    return dx


# -------------------------------------------------------------- losses ----

def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_crossentropy(logits, labels):
    """Mean cross-entropy over the batch; returns ``(loss, dlogits, probs)``."""
    labels = np.asarray(labels)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"logits {logits.shape} and labels {labels.shape} mismatch")
    probs = softmax(logits)
    n = logits.shape[0]
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -logp[np.arange(n), labels].mean()
    d = probs.copy()
    d[np.arange(n), labels] -= 1.0
    return float(loss), d / n, probs


def mse(pred, target):
    """Mean squared error over every element; returns ``(loss, dpred)``."""
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} and target {target.shape} differ")
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size
