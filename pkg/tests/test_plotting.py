import csv
import re

import numpy as np
import pytest

from indoorloc.geomap import GeoMap, TestBed, rasterize
from indoorloc.metrics import EpochRecord, stats_from_errors
from indoorloc.pipelines import CnnHistory
from indoorloc.plotting import (
    ReportIOError, plot_cnn_history, plot_density, plot_error_boxes, plot_histogram, plot_history,
    plot_raster, twin_csv,
)
from indoorloc.synthetic import smooth_field


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def svg_size(path):
    head = path.read_text()[:2000]
    w = float(re.search(r'width="([\d.]+)pt"', head).group(1))
    h = float(re.search(r'height="([\d.]+)pt"', head).group(1))
    return w, h


def test_history_twin_csv_and_determinism(tmp_path):
    hist = [EpochRecord(i, 1.0 / i, 1.5 / i, 0.1 * i, 0.12 * i) for i in range(1, 6)]
    p1, p2 = tmp_path / "a.svg", tmp_path / "b.svg"
    csv_path = plot_history(hist, p1)
    plot_history(hist, p2)
    assert csv_path == twin_csv(p1) == str(tmp_path / "a.csv")
    rows = read_csv(csv_path)
    assert rows[0] == ["epoch", "train_loss", "test_loss", "accuracy", "train_accuracy"]
    assert float(rows[3][1]) == 1.0 / 3
    assert p1.read_bytes() == p2.read_bytes()


def test_error_boxes_csv_holds_plotted_numbers(tmp_path):
    rng = np.random.default_rng(0)
    reps = [stats_from_errors(rng.gamma(2, 0.3, 500), label=l) for l in ("h128", "h512")]
    path = plot_error_boxes(reps, tmp_path / "box.svg")
    rows = read_csv(path)
    assert [r[0] for r in rows[1:]] == ["h128", "h512"]
    assert float(rows[1][rows[0].index("p75_high_m")]) == reps[0].p75_box[1]
    assert (tmp_path / "box.svg").exists()


def test_heatmap_size_proportional_to_bed(tmp_path):
    sizes = []
    for w, h in ((6.0, 1.2), (3.0, 0.6)):
        bed = TestBed(w, h)
        r = rasterize(GeoMap.from_function(bed, smooth_field), 0.1)
        path = plot_raster(r, bed, tmp_path / f"f{w}.svg")
        rows = read_csv(path)
        assert len(rows) - 1 == r.shape[0] * r.shape[1]
        sizes.append(svg_size(tmp_path / f"f{w}.svg"))
    (w1, h1), (w2, h2) = sizes
    assert abs(w1 / h1 - 5.0) < 1e-6 and abs(w1 / w2 - 2.0) < 1e-6


def test_other_figures(tmp_path):
    plot_histogram(np.arange(100.0), tmp_path / "h.svg", bins=10)
    assert sum(int(r[2]) for r in read_csv(tmp_path / "h.csv")[1:]) == 100
    H = np.arange(6).reshape(3, 2)
    plot_density(H, np.array([0, 1, 2, 3.0]), np.array([0, 1, 2.0]), tmp_path / "d.svg")
    assert len(read_csv(tmp_path / "d.csv")) == 7
    h = CnnHistory([1, 2], [0.9, 0.5], [0.5, 0.9], [float("nan")] * 2)
    plot_cnn_history(h, tmp_path / "c.svg")
    assert read_csv(tmp_path / "c.csv")[2][:3] == ["2", "0.5", "0.9"]


def test_unwritable_path(tmp_path):
    with pytest.raises(ReportIOError):
        plot_histogram([1.0], tmp_path / "missing" / "h.svg")
