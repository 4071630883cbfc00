"""Sliding-window sequence datasets: geomagnetic inputs, position targets."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import binfmt
from .geomap import GeoMap, OutOfDomainError

log = logging.getLogger(__name__)

DATASET_FORMAT_VERSION = 1


@dataclass(frozen=True)
class MinMaxNorm:
    """Per-feature min-max scaling for inputs and targets."""

    in_min: np.ndarray
    in_max: np.ndarray
    out_min: np.ndarray
    out_max: np.ndarray

    @staticmethod
    def _fwd(x, lo, hi):
        span = hi - lo
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (x - lo) / safe, 0.0)

    @staticmethod
    def _inv(x, lo, hi):
        return x * (hi - lo) + lo

    def transform_inputs(self, x):
        return self._fwd(np.asarray(x, dtype=float), self.in_min, self.in_max)

    def transform_targets(self, y):
        return self._fwd(np.asarray(y, dtype=float), self.out_min, self.out_max)

    def inverse_inputs(self, x):
        return self._inv(np.asarray(x, dtype=float), self.in_min, self.in_max)

    def inverse_targets(self, y):
        return self._inv(np.asarray(y, dtype=float), self.out_min, self.out_max)

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("in_min", "in_max", "out_min", "out_max")}

    @classmethod
    def from_dict(cls, d: dict) -> "MinMaxNorm":
        return cls(*(np.asarray(d[k], dtype=float) for k in ("in_min", "in_max", "out_min", "out_max")))

    @classmethod
    def fit(cls, inputs: np.ndarray, targets: np.ndarray) -> "MinMaxNorm":
        xi = inputs.reshape(-1, inputs.shape[-1])
        yo = targets.reshape(-1, targets.shape[-1])
        norm = cls(xi.min(axis=0), xi.max(axis=0), yo.min(axis=0), yo.max(axis=0))
        for name, lo, hi in (("input", norm.in_min, norm.in_max), ("target", norm.out_min, norm.out_max)):
            for j in np.flatnonzero(hi <= lo):
                log.warning("degenerate %s feature %d (min == max == %g); mapped to 0.0", name, j, lo[j])
        return norm

    def __eq__(self, other):
        if not isinstance(other, MinMaxNorm):
            return NotImplemented
        return all(np.array_equal(getattr(self, k), getattr(other, k))
                   for k in ("in_min", "in_max", "out_min", "out_max"))


@dataclass(frozen=True, eq=False)
class SequenceDataset:
    inputs: np.ndarray   # (samples, T, in_features)
    targets: np.ndarray  # (samples, T, out_features)
    norm: MinMaxNorm | None = None

    def __post_init__(self):
        if self.inputs.ndim != 3 or self.targets.ndim != 3:
            raise ValueError("inputs and targets must be 3-D")
        if self.inputs.shape[:2] != self.targets.shape[:2]:
            raise ValueError(f"inputs {self.inputs.shape} and targets {self.targets.shape} "
                             "disagree on samples/time steps")

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def time_steps(self) -> int:
        return self.inputs.shape[1]


def annotate(positions, gmap: GeoMap) -> np.ndarray:
    """Field value at every trace step, ``(n_steps, 3)``."""
    pos = np.asarray(getattr(positions, "positions", positions), dtype=float)
    inside = gmap.bed.contains(pos)
    if not np.all(inside):
        step = int(np.flatnonzero(~inside)[0])
        raise OutOfDomainError(f"trace step {step} at {tuple(pos[step])} is outside the map bed")
    return gmap.query(pos)


def sliding_window(inputs, targets, T: int, stride: int = 1) -> SequenceDataset:
    """Window ``i`` covers steps ``[i*stride, i*stride + T)``.

    Windows are read-only views into the given series.
    """
    x = np.ascontiguousarray(inputs, dtype=float)
    y = np.ascontiguousarray(targets, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    if len(x) != len(y):
        raise ValueError("input and target series differ in length")
    if T < 1 or stride < 1:
        raise ValueError("T and stride must be positive")
    if len(x) < T:
        raise ValueError(f"series length {len(x)} is shorter than window {T}")
    xw = np.lib.stride_tricks.sliding_window_view(x, T, axis=0)[::stride]
    yw = np.lib.stride_tricks.sliding_window_view(y, T, axis=0)[::stride]
    # sliding_window_view puts the window axis last
    return SequenceDataset(np.moveaxis(xw, -1, 1), np.moveaxis(yw, -1, 1))


def concat(datasets) -> SequenceDataset:
    ds = list(datasets)
    return SequenceDataset(np.concatenate([d.inputs for d in ds]),
                           np.concatenate([d.targets for d in ds]))


def split_point(n: int, split_ratio: float) -> int:
    if not 0 < split_ratio < 1:
        raise ValueError(f"split ratio must be in (0, 1), got {split_ratio}")
    return int(round(n * split_ratio))


def normalize(ds: SequenceDataset, split_ratio: float = 0.75) -> tuple[SequenceDataset, SequenceDataset]:
    """Chronological split; min-max parameters fitted on the first part only."""
    n_train = split_point(len(ds), split_ratio)
    if n_train < 1 or n_train >= len(ds):
        raise ValueError(f"split {split_ratio} of {len(ds)} samples leaves an empty part")
    norm = MinMaxNorm.fit(ds.inputs[:n_train], ds.targets[:n_train])

    def part(sl):
        return SequenceDataset(norm.transform_inputs(ds.inputs[sl]),
                               norm.transform_targets(ds.targets[sl]), norm)

    return part(slice(0, n_train)), part(slice(n_train, None))


def build_dataset(traces, gmap: GeoMap, T: int, stride: int = 1) -> SequenceDataset:
    """Annotate each trace and window it; windows never straddle two traces."""
    parts = []
    for tr in traces:
        pos = np.asarray(getattr(tr, "positions", tr), dtype=float)
        parts.append(sliding_window(annotate(pos, gmap), pos, T, stride))
    return concat(parts)


def save_split(path, train: SequenceDataset, test: SequenceDataset) -> None:
    """Store a normalized train/test pair (train first) with its norm."""
    binfmt.dump(path, "seqds", {
        "format_version": DATASET_FORMAT_VERSION,
        "n_samples": len(train) + len(test),
        "n_train": len(train),
        "time_steps": train.time_steps,
        "in_features": train.inputs.shape[2],
        "out_features": train.targets.shape[2],
        "norm": train.norm.to_dict(),
    }, {
        "inputs": np.concatenate([train.inputs, test.inputs]),
        "targets": np.concatenate([train.targets, test.targets]),
    })


def load_split(path) -> tuple[SequenceDataset, SequenceDataset]:
    meta, arrays = binfmt.load(path, "seqds")
    if meta.get("format_version") != DATASET_FORMAT_VERSION:
        raise binfmt.FormatError(f"{path}: unsupported dataset version")
    norm = MinMaxNorm.from_dict(meta["norm"])
    k = meta["n_train"]
    x, y = arrays["inputs"], arrays["targets"]
    return SequenceDataset(x[:k], y[:k], norm), SequenceDataset(x[k:], y[k:], norm)
