"""RSS vectors rendered as square grayscale images.

One global layout is used for every sample: APs are ranked by their mean
detected RSS over the whole database (strongest first, ties by AP index) and
placed along a centre-outward square spiral, so strong APs cluster in the
middle of the image. Cells past the last AP stay 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import binfmt
from .database import AP_COUNT, NOT_DETECTED, RSS_MIN, Database

IMAGES_FORMAT_VERSION = 1


def spiral_order(side: int) -> list[tuple[int, int]]:
    """Cells of a ``side x side`` grid from the centre outward.

    Starts at ``((side-1)//2, (side-1)//2)`` and walks right, down, left, up
    with run lengths 1, 1, 2, 2, 3, 3, ...
    """
    r = c = (side - 1) // 2
    cells = [(r, c)]
    moves = [(0, 1), (1, 0), (0, -1), (-1, 0)]
    run, k = 1, 0
    while len(cells) < side * side:
        for _ in range(2):
            dr, dc = moves[k % 4]
            for _ in range(run):
                r += dr
                c += dc
                if 0 <= r < side and 0 <= c < side:
                    cells.append((r, c))
            k += 1
        run += 1
    return cells


@dataclass(frozen=True, eq=False)
class ApLayout:
    side: int
    rows: np.ndarray   # rows[i], cols[i]: cell of AP i
    cols: np.ndarray
    fill: float = 0.0

    def __eq__(self, other):
        return (isinstance(other, ApLayout) and self.side == other.side
                and np.array_equal(self.rows, other.rows) and np.array_equal(self.cols, other.cols))

    @property
    def n_aps(self) -> int:
        return len(self.rows)

    def placement(self, ap: int) -> tuple[int, int]:
        return int(self.rows[ap]), int(self.cols[ap])


def mean_detected_rss(db: Database) -> np.ndarray:
    """Mean over detections per AP; never-detected APs get the sentinel."""
    rss = db.rss_matrix().astype(float)
    det = rss != NOT_DETECTED
    cnt = det.sum(axis=0)
    tot = np.where(det, rss, 0.0).sum(axis=0)
    return np.where(cnt > 0, tot / np.maximum(cnt, 1), float(NOT_DETECTED))


def build_layout(db: Database) -> ApLayout:
    if len(db) == 0:
        raise ValueError("cannot build a layout from an empty database")
    n = db.ap_count
    side = math.isqrt(n - 1) + 1
    means = mean_detected_rss(db)
    # lexsort: last key primary -> descending mean, then ascending index
    ranking = np.lexsort((np.arange(n), -means))
    cells = spiral_order(side)
    rows = np.empty(n, dtype=np.int64)
    cols = np.empty(n, dtype=np.int64)
    for rank, ap in enumerate(ranking):
        rows[ap], cols[ap] = cells[rank]
    return ApLayout(side, rows, cols)


@dataclass(frozen=True, eq=False)
class RssImage:
    pixels: np.ndarray
    label: int = -1


def render(rss, layout: ApLayout, label: int = -1) -> RssImage:
    v = np.asarray(rss, dtype=float)
    if v.shape != (layout.n_aps,):
        raise ValueError(f"RSS vector must have {layout.n_aps} entries, got {v.shape}")
    img = np.full((layout.side, layout.side), layout.fill)
    img[layout.rows, layout.cols] = (v - RSS_MIN) / -RSS_MIN
    return RssImage(img, label)


def render_batch(rss_matrix, layout: ApLayout) -> np.ndarray:
    m = np.asarray(rss_matrix, dtype=float)
    out = np.full((len(m), layout.side, layout.side), layout.fill)
    out[:, layout.rows, layout.cols] = (m - RSS_MIN) / -RSS_MIN
    return out


def reference_labels(db: Database) -> tuple[np.ndarray, list[tuple[str, int, int]]]:
    """Class index per record, one class per (floor, loc_x, loc_y), sorted."""
    keys = [(r.floor, r.loc_x, r.loc_y) for r in db.records]
    classes = sorted(set(keys))
    index = {k: i for i, k in enumerate(classes)}
    return np.array([index[k] for k in keys], dtype=np.int64), classes


def write_pgm(path, pixels: np.ndarray) -> None:
    """Binary (P5) 8-bit PGM, 0 = black."""
    img = np.clip(np.rint(np.asarray(pixels) * 255), 0, 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def save_images(path, images: np.ndarray, labels: np.ndarray, layout: ApLayout,
                classes: list) -> None:
    binfmt.dump(path, "rssimg", {
        "format_version": IMAGES_FORMAT_VERSION,
        "side": layout.side,
        "classes": [list(c) for c in classes],
    }, {"pixels": images, "labels": labels, "rows": layout.rows, "cols": layout.cols})


def load_images(path):
    """Returns ``(pixels, labels, layout, classes)``."""
    meta, arrays = binfmt.load(path, "rssimg")
    if meta.get("format_version") != IMAGES_FORMAT_VERSION:
        raise binfmt.FormatError(f"{path}: unsupported image file version")
    layout = ApLayout(meta["side"], arrays["rows"], arrays["cols"])
    return arrays["pixels"], arrays["labels"], layout, [tuple(c) for c in meta["classes"]]


__all__ = ["ApLayout", "RssImage", "build_layout", "render", "render_batch", "spiral_order",
           "reference_labels", "write_pgm", "save_images", "load_images", "AP_COUNT"]
