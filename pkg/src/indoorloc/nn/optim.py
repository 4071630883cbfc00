"""Parameter store and the Adam optimizer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ParamStore:
    """Named parameter arrays with a version counter bumped on every update.

    Layer caches remember the version they were computed with so a backward
    pass against updated parameters fails loudly.
    """

    def __init__(self, params: dict[str, np.ndarray] | None = None):
        self.params: dict[str, np.ndarray] = dict(params or {})
        self.version = 0

    def __getitem__(self, name):
        return self.params[name]

    def __setitem__(self, name, value):
        self.params[name] = np.asarray(value, dtype=float)

    def __iter__(self):
        return iter(self.params)

    def __len__(self):
        return len(self.params)

    def items(self):
        return self.params.items()

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    def copy(self) -> "ParamStore":
        s = ParamStore({k: v.copy() for k, v in self.params.items()})
        s.version = self.version
        return s

    @property
    def size(self) -> int:
        return sum(v.size for v in self.params.values())


class NonFiniteGradientError(FloatingPointError):
    pass


@dataclass
class Adam:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params, grads: dict[str, np.ndarray]) -> None:
        """One in-place update of ``params`` (a ParamStore or dict).

        m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
        theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
        """
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradientError(f"non-finite gradient for {name!r} at step {self.t + 1}")
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        target = params.params if isinstance(params, ParamStore) else params
        for name, g in grads.items():
            theta = target[name]
            if g.shape != theta.shape:
                raise ValueError(f"gradient for {name!r} has shape {g.shape}, parameter {theta.shape}")
            m = self.m.get(name)
            if m is None:
                m = self.m[name] = np.zeros_like(theta)
                self.v[name] = np.zeros_like(theta)
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            theta -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        if isinstance(params, ParamStore):
            params.version += 1
