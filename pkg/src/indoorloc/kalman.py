"""Scalar Kalman smoothing for magnetometer / orientation streams.

Random-walk state model per axis: x_k+1 = x_k + w, z_k = x_k + v with
var(w) = q and var(v) = r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

DEFAULT_Q = 0.01
DEFAULT_R = 1.0


@dataclass(frozen=True)
class KalmanState:
    estimate: float
    error_cov: float
    process_noise_q: float = DEFAULT_Q
    measurement_noise_r: float = DEFAULT_R

    def __post_init__(self):
        if self.error_cov < 0 or self.process_noise_q < 0 or self.measurement_noise_r < 0:
            raise ValueError("covariances must be non-negative")

    @classmethod
    def initial(cls, measurement: float, q: float = DEFAULT_Q, r: float = DEFAULT_R) -> "KalmanState":
        """Start at the first measurement with error covariance r."""
        return cls(float(measurement), float(r), float(q), float(r))


def kalman_gain(prior_cov: float, r: float) -> float:
    denom = prior_cov + r
    if denom == 0.0:
        return 0.0
    return prior_cov / denom


def kalman_step(state: KalmanState, measurement: float) -> KalmanState:
    if not math.isfinite(measurement):
        raise ValueError(f"non-finite measurement: {measurement}")
    p = state.error_cov + state.process_noise_q
    k = kalman_gain(p, state.measurement_noise_r)
    x = state.estimate + k * (measurement - state.estimate)
    return replace(state, estimate=x, error_cov=(1.0 - k) * p)


def filter_series(series, q: float = DEFAULT_Q, r: float = DEFAULT_R) -> np.ndarray:
    """Filter an ``(n, 3)`` series with one independent scalar filter per column.

    Each filter starts at the first sample, so ``out[0] == series[0]``.
    """
    data = np.asarray(series, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if data.shape[0] == 0:
        raise ValueError("cannot filter an empty series")
    if not np.all(np.isfinite(data)):
        raise ValueError("series contains non-finite values")
    out = np.empty_like(data)
    for j in range(data.shape[1]):
        st = KalmanState.initial(data[0, j], q, r)
        out[0, j] = st.estimate
        for n in range(1, data.shape[0]):
            st = kalman_step(st, data[n, j])
            out[n, j] = st.estimate
    return out
