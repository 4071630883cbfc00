"""Localization error statistics.

Quantiles use the nearest-rank rule on the sorted errors: the p-quantile is
the smallest error e with at least ceil(p * N) errors <= e. A central band
of mass p spans the (1-p)/2 and (1+p)/2 quantiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

BOX_MASS = Fraction(3, 4)
WHISKER_MASS = Fraction(19, 20)
DEFAULT_ACCURACY_THRESHOLD_M = 0.6


def nearest_rank(sorted_values: np.ndarray, p) -> float:
    p = Fraction(p)
    if not 0 <= p <= 1:
        raise ValueError("quantile level must be in [0, 1]")
    n = len(sorted_values)
    if n == 0:
        raise ValueError("no values")
    rank = max(1, math.ceil(p * n))
    return float(sorted_values[rank - 1])


def central_band(sorted_values: np.ndarray, mass) -> tuple[float, float]:
    mass = Fraction(mass)
    return (nearest_rank(sorted_values, (1 - mass) / 2),
            nearest_rank(sorted_values, (1 + mass) / 2))


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    test_loss: float
    accuracy: float
    train_accuracy: float = float("nan")


@dataclass
class EvalReport:
    mean_err_m: float
    p75_box: tuple[float, float]
    p95_whisker: tuple[float, float]
    max_err_m: float
    n_samples: int
    median_err_m: float = 0.0
    accuracy: float = float("nan")
    per_epoch: list[EpochRecord] = field(default_factory=list)
    label: str = ""

    def as_row(self) -> dict:
        return {
            "label": self.label,
            "n_samples": self.n_samples,
            "mean_err_m": self.mean_err_m,
            "median_err_m": self.median_err_m,
            "p75_low_m": self.p75_box[0],
            "p75_high_m": self.p75_box[1],
            "p95_low_m": self.p95_whisker[0],
            "p95_high_m": self.p95_whisker[1],
            "max_err_m": self.max_err_m,
            "accuracy": self.accuracy,
        }


def euclidean_errors(pred, truth) -> np.ndarray:
    p = np.asarray(pred, dtype=float)
    t = np.asarray(truth, dtype=float)
    if p.shape != t.shape:
        raise ValueError(f"prediction shape {p.shape} != truth shape {t.shape}")
    if p.shape[-1] != 2:
        raise ValueError("positions must be 2-vectors")
    return np.sqrt(((p - t) ** 2).sum(axis=-1)).ravel()


def error_stats(pred, truth, threshold_m: float = DEFAULT_ACCURACY_THRESHOLD_M,
                label: str = "") -> EvalReport:
    err = euclidean_errors(pred, truth)
    if err.size == 0:
        raise ValueError("need at least one prediction")
    return stats_from_errors(err, threshold_m, label)


def stats_from_errors(err, threshold_m: float = DEFAULT_ACCURACY_THRESHOLD_M,
                      label: str = "") -> EvalReport:
    err = np.asarray(err, dtype=float).ravel()
    s = np.sort(err)
    return EvalReport(
        mean_err_m=float(err.mean()),
        p75_box=central_band(s, BOX_MASS),
        p95_whisker=central_band(s, WHISKER_MASS),
        max_err_m=float(s[-1]),
        n_samples=int(err.size),
        median_err_m=nearest_rank(s, Fraction(1, 2)),
        accuracy=float(np.mean(err < threshold_m)),
        label=label,
    )


def accuracy(pred, truth, threshold_m: float = DEFAULT_ACCURACY_THRESHOLD_M) -> float:
    """Fraction of predicted positions within ``threshold_m`` of the truth."""
    return float(np.mean(euclidean_errors(pred, truth) < threshold_m))
