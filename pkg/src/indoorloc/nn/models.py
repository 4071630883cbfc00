"""Network assemblies: stacked stateful LSTM regressor and RSS-image CNN."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import layers as L
from .optim import ParamStore


class LstmRegressor:
    """LSTM x layers -> dropout after each -> time-distributed dense."""

    kind = "lstm"

    def __init__(self, in_features: int = 3, hidden: int = 128, n_layers: int = 2,
                 out_features: int = 2, dropout: float = 0.2, seed: int = 0, store=None):
        if min(in_features, hidden, n_layers, out_features) < 1:
            raise ValueError("network dimensions must be positive")
        if not 0.0 <= dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        self.in_features = in_features
        self.hidden = hidden
        self.n_layers = n_layers
        self.out_features = out_features
        self.dropout = dropout
        if store is None:
            rng = np.random.default_rng(seed)
            store = ParamStore()
            f = in_features
            for k in range(n_layers):
                p = L.lstm_init(f, hidden, rng)
                store[f"lstm{k}.W"] = p.W
                store[f"lstm{k}.b"] = p.b
                f = hidden
            W, b = L.dense_init(hidden, out_features, rng)
            store["dense.W"] = W
            store["dense.b"] = b
        self.store = store

    def config(self) -> dict:
        return {"in_features": self.in_features, "hidden": self.hidden, "n_layers": self.n_layers,
                "out_features": self.out_features, "dropout": self.dropout}

    def lstm_params(self, k: int) -> L.LstmParams:
        return L.LstmParams(self.store[f"lstm{k}.W"], self.store[f"lstm{k}.b"], self.store.version)

    def zero_state(self, batch: int):
        return [(np.zeros((batch, self.hidden)), np.zeros((batch, self.hidden)))
                for _ in range(self.n_layers)]

    def forward(self, x, state=None, training: bool = False, rng=None):
        """Returns ``(y, new_state, cache)``; ``state`` is a per-layer list of
        ``(h, c)``, ``None`` meaning zeros."""
        if state is None:
            state = self.zero_state(x.shape[0])
        caches = []
        new_state = []
        h = x
        for k in range(self.n_layers):
            h, st, c = L.lstm_forward(self.lstm_params(k), h, state[k])
            hd, mask = L.dropout(h, self.dropout, training, rng)
            caches.append((c, mask))
            new_state.append(st)
            h = hd
        y = L.time_distributed_dense(self.store["dense.W"], self.store["dense.b"], h)
        return y, new_state, {"layers": caches, "top": h}

    def backward(self, cache, dy) -> dict[str, np.ndarray]:
        grads = {}
        g = L.time_distributed_dense_backward(self.store["dense.W"], cache["top"], dy)
        grads["dense.W"], grads["dense.b"] = g["W"], g["b"]
        d = g["x"]
        for k in range(self.n_layers - 1, -1, -1):
            c, mask = cache["layers"][k]
            d = L.dropout_backward(d, mask)
            g = L.lstm_backward(self.lstm_params(k), c, d)
            grads[f"lstm{k}.W"], grads[f"lstm{k}.b"] = g["W"], g["b"]
            d = g["x"]
        return grads


@dataclass(frozen=True)
class CnnSpec:
    """Default stack: conv3x3x8, conv3x3x16, conv3x3x16, conv3x3x32 (ReLU),
    2x2 max pool, dropout, dense(64, ReLU), dropout, dense(classes)."""

    convs: tuple = ((8, 3), (16, 3), (16, 3), (32, 3))
    dense_hidden: int = 64
    dropout1: float = 0.25
    dropout2: float = 0.5

    def __post_init__(self):
        if len(self.convs) < 1:
            raise ValueError("need at least one convolution")
        for ch, k in self.convs:
            if k % 2 == 0 or k < 1 or ch < 1:
                raise ValueError(f"convolution {(ch, k)}: kernel size must be odd and positive")


class CnnClassifier:
    kind = "cnn"

    def __init__(self, side: int, n_classes: int, spec: CnnSpec = CnnSpec(), seed: int = 0,
                 in_channels: int = 1, store=None):
        if n_classes < 2:
            raise ValueError("a classifier needs at least two classes")
        self.side = side
        self.n_classes = n_classes
        self.spec = spec
        self.in_channels = in_channels
        s = side
        for _, k in spec.convs:
            s -= k - 1
        s //= 2
        if s < 1:
            raise ValueError(f"image side {side} too small for the convolution stack")
        self.flat = s * s * spec.convs[-1][0]
        if store is None:
            rng = np.random.default_rng(seed)
            store = ParamStore()
            c = in_channels
            for i, (ch, k) in enumerate(spec.convs):
                K, b = L.conv2d_init(c, ch, k, rng)
                store[f"conv{i}.W"], store[f"conv{i}.b"] = K, b
                c = ch
            W, b = L.dense_init(self.flat, spec.dense_hidden, rng)
            store["fc1.W"], store["fc1.b"] = W, b
            W, b = L.dense_init(spec.dense_hidden, n_classes, rng)
            store["fc2.W"], store["fc2.b"] = W, b
        self.store = store

    def config(self) -> dict:
        return {"side": self.side, "n_classes": self.n_classes, "in_channels": self.in_channels,
                "convs": [list(c) for c in self.spec.convs], "dense_hidden": self.spec.dense_hidden,
                "dropout1": self.spec.dropout1, "dropout2": self.spec.dropout2}

    def forward(self, x, training: bool = False, rng=None):
        if x.ndim == 3:
            x = x[:, None]
        st = self.store
        cache = {"conv_in": [], "conv_out": []}
        h = x
        for i in range(len(self.spec.convs)):
            cache["conv_in"].append(h)
            z = L.conv2d_forward(st[f"conv{i}.W"], st[f"conv{i}.b"], h)
            cache["conv_out"].append(z)
            h = L.relu(z)
        cache["pool_in_shape"] = h.shape
        h, cache["pool_arg"] = L.maxpool2x2_forward(h)
        cache["pool_out_shape"] = h.shape
        h = h.reshape(len(h), -1)
        h, cache["mask1"] = L.dropout(h, self.spec.dropout1, training, rng)
        cache["fc1_in"] = h
        z = L.dense_forward(st["fc1.W"], st["fc1.b"], h)
        cache["fc1_out"] = z
        h = L.relu(z)
        h, cache["mask2"] = L.dropout(h, self.spec.dropout2, training, rng)
        cache["fc2_in"] = h
        logits = L.dense_forward(st["fc2.W"], st["fc2.b"], h)
        return logits, cache

    def backward(self, cache, dlogits) -> dict[str, np.ndarray]:
        st = self.store
        grads = {}
        g = L.dense_backward(st["fc2.W"], cache["fc2_in"], dlogits)
        grads["fc2.W"], grads["fc2.b"] = g["W"], g["b"]
        d = L.dropout_backward(g["x"], cache["mask2"])
        d = L.relu_backward(cache["fc1_out"], d)
        g = L.dense_backward(st["fc1.W"], cache["fc1_in"], d)
        grads["fc1.W"], grads["fc1.b"] = g["W"], g["b"]
        d = L.dropout_backward(g["x"], cache["mask1"])
        d = d.reshape(cache["pool_out_shape"])
        d = L.maxpool2x2_backward(cache["pool_in_shape"], cache["pool_arg"], d)
        for i in range(len(self.spec.convs) - 1, -1, -1):
            d = L.relu_backward(cache["conv_out"][i], d)
            g = L.conv2d_backward(st[f"conv{i}.W"], cache["conv_in"][i], d)
            grads[f"conv{i}.W"], grads[f"conv{i}.b"] = g["W"], g["b"]
            d = g["x"]
        return grads

    def predict_proba(self, x, batch: int = 256) -> np.ndarray:
        out = []
        for s in range(0, len(x), batch):
            logits, _ = self.forward(x[s:s + batch])
            out.append(L.softmax(logits))
        return np.concatenate(out) if out else np.empty((0, self.n_classes))
