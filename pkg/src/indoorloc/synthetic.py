"""Synthetic fields, fingerprint databases and RSS sets with known answers."""

from __future__ import annotations

import numpy as np

from .database import AP_COUNT, NOT_DETECTED, Database, Direction, records_from_arrays
from .geomap import GeoMap, TestBed


def linear_field(x, y):
    """Injective field (x, y, x + y) in uT; position is recoverable from it."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.stack([x, y, x + y], axis=-1)


def linear_field_gradient(x, y):
    g = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
    return np.broadcast_to(g, np.shape(x) + (2, 3)).copy()


def linear_map(bed: TestBed) -> GeoMap:
    return GeoMap.from_function(bed, linear_field, linear_field_gradient)


def smooth_field(x, y):
    """A bounded, smooth, building-like field (uT)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.stack([
        -25.0 + 3.0 * np.sin(0.4 * x) * np.cos(0.9 * y),
        -5.0 + 2.0 * np.cos(0.3 * x + 0.5 * y),
        -29.0 + 4.0 * np.sin(0.25 * x - 0.7 * y),
    ], axis=-1)


def separable_rss(n_classes: int, per_class: int, seed: int = 0, noise_db: float = 3.0,
                  n_aps: int = AP_COUNT):
    """RSS matrix where class ``c`` always hears AP ``c`` strongly.

    Every sample also hears a handful of random background APs weakly.
    Returns ``(rss, labels)`` with rss as ints in [-110, 0].
    """
    rng = np.random.default_rng(seed)
    n = n_classes * per_class
    rss = np.full((n, n_aps), NOT_DETECTED, dtype=np.int64)
    labels = np.repeat(np.arange(n_classes), per_class)
    for i, c in enumerate(labels):
        bg = rng.choice(n_aps, size=8, replace=False)
        rss[i, bg] = np.clip(np.rint(rng.normal(-90, noise_db, size=8)), -109, -1)
        rss[i, c] = int(np.clip(np.rint(rng.normal(-40, noise_db)), -109, -1))
    return rss, labels


def toy_database(bed: TestBed = TestBed(1.8, 1.2, 0.6), seed: int = 3, n_aps_heard: int = 12,
                 floor: str = "4", building: str = "IBSS") -> Database:
    """Small complete survey: four headings per grid node, path-loss RSS."""
    rng = np.random.default_rng(seed)
    nx1, ny1 = bed.node_shape
    aps = rng.choice(AP_COUNT, size=n_aps_heard, replace=False)
    ap_pos = rng.uniform([0, 0], [bed.width_m, bed.height_m], size=(n_aps_heard, 2))
    rss, locs, geo, ori, dirs = [], [], [], [], []
    for ix in range(nx1):
        for iy in range(ny1):
            p = np.array([ix, iy]) * bed.spacing_m
            base = smooth_field(p[0], p[1])
            for k, d in enumerate((Direction.NORTH, Direction.EAST, Direction.SOUTH, Direction.WEST)):
                v = np.full(AP_COUNT, NOT_DETECTED, dtype=np.int64)
                dist = np.linalg.norm(ap_pos - p, axis=1) + 0.5
                level = -40 - 20 * np.log10(dist) + rng.normal(0, 2, n_aps_heard)
                v[aps] = np.clip(np.rint(level), -109, -1)
                rss.append(v)
                locs.append((ix, iy))
                geo.append(np.round(base + rng.normal(0, 0.3, 3), 5))
                ori.append(np.round([90.0 * k + rng.normal(0, 2), rng.normal(0, 2), rng.normal(0, 2)], 5))
                dirs.append(d)
    recs = records_from_arrays(rss, locs, geo, ori, floor=floor, building=building,
                               directions=dirs, device="synthetic")
    return Database(tuple(recs), AP_COUNT, bed.spacing_m)
