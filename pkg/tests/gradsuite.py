"""Finite-difference gradient checks for every layer, on random small shapes.

Each check builds a random instance, a random linear functional of the
layer output as the scalar loss, and compares the analytic gradient of every
input and parameter with central differences.
"""

import numpy as np

from indoorloc.nn import layers as L
from oracles import numeric_grad, rel_error


def _check(loss, analytic: dict, arrays: dict) -> float:
    return max(rel_error(analytic[k], numeric_grad(loss, arrays[k])) for k in arrays)


def check_lstm(rng):
    B, T, F, H = rng.integers(1, 4), rng.integers(1, 5), rng.integers(1, 4), rng.integers(1, 5)
    p = L.lstm_init(F, H, rng)
    p.b = p.b + rng.normal(0, 0.3, p.b.shape)
    x = rng.normal(size=(B, T, F))
    h0 = rng.normal(0, 0.5, (B, H))
    c0 = rng.normal(0, 0.5, (B, H))
    wy = rng.normal(size=(B, T, H))
    wh = rng.normal(size=(B, H))
    wc = rng.normal(size=(B, H))

    def loss():
        y, (h, c), _ = L.lstm_forward(p, x, (h0, c0))
        return np.sum(wy * y) + np.sum(wh * h) + np.sum(wc * c)

    _, _, cache = L.lstm_forward(p, x, (h0, c0))
    g = L.lstm_backward(p, cache, wy, (wh, wc))
    return _check(loss, g, {"W": p.W, "b": p.b, "x": x, "h0": h0, "c0": c0})


def check_dense(rng):
    n, i, o = rng.integers(1, 5), rng.integers(1, 6), rng.integers(1, 6)
    W, b = L.dense_init(i, o, rng)
    b = b + rng.normal(size=o)
    x = rng.normal(size=(n, i))
    w = rng.normal(size=(n, o))
    g = L.dense_backward(W, x, w)
    return _check(lambda: np.sum(w * L.dense_forward(W, b, x)), g, {"W": W, "b": b, "x": x})


def check_time_distributed(rng):
    B, T, i, o = rng.integers(1, 4), rng.integers(1, 5), rng.integers(1, 5), rng.integers(1, 4)
    W, b = L.dense_init(i, o, rng)
    b = b + rng.normal(size=o)
    x = rng.normal(size=(B, T, i))
    w = rng.normal(size=(B, T, o))
    g = L.time_distributed_dense_backward(W, x, w)
    return _check(lambda: np.sum(w * L.time_distributed_dense(W, b, x)), g, {"W": W, "b": b, "x": x})


def check_conv(rng):
    N, C, O, k = rng.integers(1, 3), rng.integers(1, 3), rng.integers(1, 4), int(rng.choice([1, 3]))
    Hh, Ww = rng.integers(k, k + 4), rng.integers(k, k + 4)
    K, b = L.conv2d_init(C, O, k, rng)
    b = b + rng.normal(size=O)
    x = rng.normal(size=(N, C, Hh, Ww))
    w = rng.normal(size=(N, O, Hh - k + 1, Ww - k + 1))
    g = L.conv2d_backward(K, x, w)
    return _check(lambda: np.sum(w * L.conv2d_forward(K, b, x)), g, {"W": K, "b": b, "x": x})


def check_maxpool(rng):
    N, C, Hh, Ww = rng.integers(1, 3), rng.integers(1, 3), rng.integers(2, 7), rng.integers(2, 7)
    # distinct values keep the max away from ties, where the map is not differentiable
    x = rng.permutation(N * C * Hh * Ww).reshape(N, C, Hh, Ww) * 0.1 + rng.uniform(0, 0.01)
    y, arg = L.maxpool2x2_forward(x)
    w = rng.normal(size=y.shape)
    dx = L.maxpool2x2_backward(x.shape, arg, w)
    return _check(lambda: np.sum(w * L.maxpool2x2_forward(x)[0]), {"x": dx}, {"x": x})


def check_softmax_ce(rng):
    n, k = rng.integers(1, 6), rng.integers(2, 6)
    z = rng.normal(0, 2, (n, k))
    y = rng.integers(0, k, n)
    _, d, _ = L.softmax_crossentropy(z, y)
    return _check(lambda: L.softmax_crossentropy(z, y)[0], {"z": d}, {"z": z})


def check_mse(rng):
    shape = tuple(rng.integers(1, 4, size=rng.integers(1, 4)))
    p = rng.normal(size=shape)
    t = rng.normal(size=shape)
    _, d = L.mse(p, t)
    return _check(lambda: L.mse(p, t)[0], {"p": d}, {"p": p})


CHECKS = {
    "lstm": check_lstm,
    "dense": check_dense,
    "time_distributed_dense": check_time_distributed,
    "conv2d": check_conv,
    "maxpool": check_maxpool,
    "softmax_ce": check_softmax_ce,
    "mse": check_mse,
}


def run_suite(n_instances: int = 20, seed: int = 0) -> dict[str, float]:
    """Worst relative error per layer over ``n_instances`` random instances."""
    out = {}
    for j, (name, fn) in enumerate(CHECKS.items()):
        rng = np.random.default_rng([seed, j])
        out[name] = max(fn(rng) for _ in range(n_instances))
    return out
