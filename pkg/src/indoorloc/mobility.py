"""Random-waypoint pedestrian traces.

A trace is built leg by leg: draw a waypoint uniformly in the bed, draw a
leg speed, walk toward the waypoint emitting one position per ``step_dt_s``
(the last step of a leg is truncated to land on the waypoint), then pause
for ``U[0, max_pause_s]`` seconds, emitting the arrival position once per
elapsed step. The Gamma variant draws leg speeds from Gamma(k, theta)
instead of ``U[v_min, v_max]``.

Randomness comes from ``numpy.random.Generator(PCG64(seed))``. Batches use
``seed + trace_index`` for trace ``trace_index``.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .geomap import TestBed


class ConfigError(ValueError):
    pass


class MobilityModel(enum.Enum):
    RWP = "rwp"
    GAMMA_RWP = "gamma"


@dataclass(frozen=True)
class RwpConfig:
    bed: TestBed
    n_steps: int = 100
    v_min: float = 0.5
    v_max: float = 1.5
    max_pause_s: float = 2.0
    step_dt_s: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_steps < 1:
            raise ConfigError("n_steps must be positive")
        if not self.v_min > 0:
            raise ConfigError(f"v_min must be positive, got {self.v_min}")
        if self.v_max < self.v_min:
            raise ConfigError("v_max must be >= v_min")
        if self.max_pause_s < 0:
            raise ConfigError("max_pause_s must be non-negative")
        if not self.step_dt_s > 0:
            raise ConfigError("step_dt_s must be positive")
        if not (self.bed.width_m > 0 and self.bed.height_m > 0):
            raise ConfigError("degenerate bed")


@dataclass(frozen=True, eq=False)
class Trace:
    positions: np.ndarray            # (n_steps, 2), metres
    seed: int
    model: MobilityModel
    waypoints: np.ndarray = field(repr=False, default=None)   # (n_legs, 2), drawn order
    leg_speeds: np.ndarray = field(repr=False, default=None)  # (n_legs,)

    def __len__(self):
        return len(self.positions)

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return (self.seed == other.seed and self.model == other.model
                and np.array_equal(self.positions, other.positions)
                and np.array_equal(self.waypoints, other.waypoints)
                and np.array_equal(self.leg_speeds, other.leg_speeds))


def _walk(cfg: RwpConfig, draw_speed, model: MobilityModel) -> Trace:
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    w, h = cfg.bed.width_m, cfg.bed.height_m
    dt = cfg.step_dt_s
    out = np.empty((cfg.n_steps, 2))
    out[0] = rng.uniform(0.0, 1.0, 2) * (w, h)
    filled = 1
    waypoints, speeds = [], []
    while filled < cfg.n_steps:
        target = rng.uniform(0.0, 1.0, 2) * (w, h)
        speed = draw_speed(rng)
        pause = rng.uniform(0.0, cfg.max_pause_s) if cfg.max_pause_s > 0 else 0.0
        waypoints.append(target)
        speeds.append(speed)

        start = out[filled - 1]
        delta = target - start
        dist = math.hypot(delta[0], delta[1])
        stride = speed * dt
        n_full = int(dist // stride)
        k = np.arange(1, n_full + 1)
        leg = start + np.outer(k * stride / dist, delta) if n_full else np.empty((0, 2))
        if dist - n_full * stride > 1e-12 or n_full == 0:
            leg = np.vstack([leg, target])
        else:
            leg[-1] = target
        n_pause = int(round(pause / dt))
        if n_pause:
            leg = np.vstack([leg, np.repeat(target[None], n_pause, axis=0)])
        take = min(len(leg), cfg.n_steps - filled)
        out[filled:filled + take] = leg[:take]
        filled += take
    np.clip(out, 0.0, (w, h), out=out)
    return Trace(out, cfg.seed, model, np.array(waypoints).reshape(-1, 2), np.array(speeds))


def rwp_generate(cfg: RwpConfig) -> Trace:
    return _walk(cfg, lambda rng: rng.uniform(cfg.v_min, cfg.v_max), MobilityModel.RWP)


def gamma_rwp_generate(cfg: RwpConfig, shape_k: float, scale_theta: float) -> Trace:
    """RWP with Gamma(shape_k, scale_theta) leg speeds, resampled if zero.

    ``v_min``/``v_max`` are ignored; the containment and speed laws still
    hold with the drawn per-leg speed.
    """
    if not (shape_k > 0 and scale_theta > 0):
        raise ConfigError(f"Gamma parameters must be positive, got k={shape_k}, theta={scale_theta}")

    def speed(rng):
        while True:
            v = rng.gamma(shape_k, scale_theta)
            if v > 0:
                return v

    return _walk(cfg, speed, MobilityModel.GAMMA_RWP)


def generate_traces(cfg: RwpConfig, n_traces: int, model: MobilityModel = MobilityModel.RWP,
                    shape_k: float = 2.0, scale_theta: float = 0.5) -> list[Trace]:
    traces = []
    for i in range(n_traces):
        c = RwpConfig(cfg.bed, cfg.n_steps, cfg.v_min, cfg.v_max, cfg.max_pause_s,
                      cfg.step_dt_s, cfg.seed + i)
        if model is MobilityModel.RWP:
            traces.append(rwp_generate(c))
        else:
            traces.append(gamma_rwp_generate(c, shape_k, scale_theta))
    return traces


def write_traces(traces, path) -> None:
    """CSV with columns trace_id, step, x, y (floats at full precision)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trace_id", "step", "x", "y"])
        for tid, tr in enumerate(traces):
            for step, (x, y) in enumerate(tr.positions.tolist()):
                w.writerow([tid, step, repr(x), repr(y)])


def read_traces(path) -> list[np.ndarray]:
    """Position arrays per trace id, in trace-id order."""
    rows: dict[int, list] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["trace_id", "step", "x", "y"]:
            raise ValueError(f"{path}: unexpected trace header {header}")
        for line, rec in enumerate(reader, start=2):
            if not rec:
                continue
            try:
                tid, step, x, y = int(rec[0]), int(rec[1]), float(rec[2]), float(rec[3])
            except (ValueError, IndexError):
                raise ValueError(f"{path}:{line}: malformed trace row") from None
            rows.setdefault(tid, []).append((step, x, y))
    out = []
    for tid in sorted(rows):
        pts = sorted(rows[tid])
        out.append(np.array([(x, y) for _, x, y in pts], dtype=float).reshape(-1, 2))
    return out
