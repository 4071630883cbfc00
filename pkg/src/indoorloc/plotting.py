"""Report figures. Every SVG is written next to a CSV holding exactly the
plotted numbers; the CSV is the source of truth.

Figures are rendered with the Agg backend and a fixed SVG hash salt and no
date metadata, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "svg.hashsalt": "indoorloc",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "figure.dpi": 100,
}

# inches per metre of bed for heat maps
HEATMAP_SCALE = 0.4


class ReportIOError(OSError):
    pass


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
    except OSError as exc:
        raise ReportIOError(f"cannot write {path}: {exc.strerror}") from exc


def _save(fig, path) -> None:
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise ReportIOError(f"cannot write {path}: {exc.strerror}") from exc
    finally:
        plt.close(fig)


def twin_csv(svg_path) -> str:
    return os.path.splitext(str(svg_path))[0] + ".csv"


def plot_history(history, svg_path, title: str = "LSTM training") -> str:
    """Loss and accuracy curves per epoch. ``history`` is a list of
    EpochRecord. Returns the CSV path."""
    header = ["epoch", "train_loss", "test_loss", "accuracy", "train_accuracy"]
    rows = [(h.epoch, h.train_loss, h.test_loss, h.accuracy, h.train_accuracy) for h in history]
    csv_path = twin_csv(svg_path)
    write_csv(csv_path, header, rows)
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7.0, 2.8))
        if rows:
            e = [r[0] for r in rows]
            ax1.plot(e, [r[1] for r in rows], label="train")
            ax1.plot(e, [r[2] for r in rows], label="test")
            ax2.plot(e, [r[4] for r in rows], label="train")
            ax2.plot(e, [r[3] for r in rows], label="test")
            ax1.legend()
            ax2.legend()
        ax1.set_xlabel("epoch")
        ax1.set_ylabel("MSE (normalized)")
        ax1.set_yscale("log" if rows and min(r[1] for r in rows) > 0 else "linear")
        ax2.set_xlabel("epoch")
        ax2.set_ylabel("accuracy")
        ax2.set_ylim(0, 1.02)
        fig.suptitle(title)
        fig.tight_layout()
        _save(fig, svg_path)
    return csv_path


def plot_cnn_history(hist, svg_path) -> str:
    header = ["epoch", "train_loss", "train_accuracy", "test_accuracy"]
    rows = hist.rows()
    csv_path = twin_csv(svg_path)
    write_csv(csv_path, header, rows)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 2.8))
        if rows:
            ax.plot([r[0] for r in rows], [r[2] for r in rows], label="train")
            if not all(np.isnan(r[3]) for r in rows):
                ax.plot([r[0] for r in rows], [r[3] for r in rows], label="held-out")
            ax.legend()
        ax.set_xlabel("epoch")
        ax.set_ylabel("accuracy")
        ax.set_ylim(0, 1.02)
        ax.set_title("CNN localization")
        fig.tight_layout()
        _save(fig, svg_path)
    return csv_path


def plot_error_boxes(reports, svg_path) -> str:
    """Box per report: box = central 75 %, whiskers = central 95 %, dot =
    mean, cross = max."""
    rows = [r.as_row() for r in reports]
    header = list(rows[0]) if rows else ["label", "n_samples", "mean_err_m", "median_err_m",
                                         "p75_low_m", "p75_high_m", "p95_low_m", "p95_high_m",
                                         "max_err_m", "accuracy"]
    csv_path = twin_csv(svg_path)
    write_csv(csv_path, header, [[r[k] for k in header] for r in rows])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(1.0 + 1.2 * max(len(rows), 1), 3.0))
        for i, r in enumerate(rows):
            lo, hi = r["p75_low_m"], r["p75_high_m"]
            ax.add_patch(plt.Rectangle((i - 0.25, lo), 0.5, hi - lo, facecolor="#4c72b0", alpha=0.7))
            ax.plot([i, i], [r["p95_low_m"], lo], color="k")
            ax.plot([i, i], [hi, r["p95_high_m"]], color="k")
            ax.plot([i - 0.15, i + 0.15], [r["p95_low_m"]] * 2, color="k")
            ax.plot([i - 0.15, i + 0.15], [r["p95_high_m"]] * 2, color="k")
            ax.plot(i, r["mean_err_m"], "o", color="#dd8452")
            ax.plot(i, r["max_err_m"], "x", color="#c44e52")
        ax.set_xticks(range(len(rows)))
        ax.set_xticklabels([r["label"] or str(i) for i, r in enumerate(rows)])
        ax.set_xlim(-0.6, max(len(rows), 1) - 0.4)
        ax.set_ylabel("localization error (m)")
        ax.set_ylim(bottom=0)
        ax.autoscale_view(scalex=False)
        fig.tight_layout()
        _save(fig, svg_path)
    return csv_path


def plot_raster(raster, bed, svg_path, component: int = 2) -> str:
    """Heat map of one field component. Figure size is proportional to the
    bed. The twin CSV holds x, y and all three components."""
    X, Y = np.meshgrid(raster.xs, raster.ys, indexing="ij")
    vals = raster.values.reshape(-1, raster.values.shape[-1])
    csv_path = twin_csv(svg_path)
    write_csv(csv_path, ["x_m", "y_m", "GeoX", "GeoY", "GeoZ"],
              ([x, y, *v] for x, y, v in zip(X.ravel(), Y.ravel(), vals)))
    with plt.rc_context(STYLE):
        fig = plt.figure(figsize=(bed.width_m * HEATMAP_SCALE, bed.height_m * HEATMAP_SCALE))
        ax = fig.add_axes([0, 0, 1, 1])
        ax.imshow(raster.values[:, :, component].T, origin="lower", cmap="viridis", aspect="auto",
                  extent=(0, bed.width_m, 0, bed.height_m), interpolation="nearest")
        ax.set_axis_off()
        _save(fig, svg_path)
    return csv_path


def plot_histogram(values, svg_path, bins: int = 50, xlabel: str = "value") -> str:
    counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bins)
    csv_path = twin_csv(svg_path)
    write_csv(csv_path, ["bin_low", "bin_high", "count"], zip(edges[:-1], edges[1:], counts))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 2.8))
        ax.stairs(counts, edges, fill=True)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("count")
        fig.tight_layout()
        _save(fig, svg_path)
    return csv_path


def plot_density(H, xedges, yedges, svg_path) -> str:
    """2-D histogram (e.g. RWP position density)."""
    csv_path = twin_csv(svg_path)
    rows = []
    for i in range(H.shape[0]):
        for j in range(H.shape[1]):
            rows.append((xedges[i], xedges[i + 1], yedges[j], yedges[j + 1], int(H[i, j])))
    write_csv(csv_path, ["x_low", "x_high", "y_low", "y_high", "count"], rows)
    with plt.rc_context(STYLE):
        w = xedges[-1] - xedges[0]
        h = yedges[-1] - yedges[0]
        fig = plt.figure(figsize=(w * HEATMAP_SCALE, h * HEATMAP_SCALE))
        ax = fig.add_axes([0, 0, 1, 1])
        ax.imshow(H.T, origin="lower", extent=(xedges[0], xedges[-1], yedges[0], yedges[-1]),
                  aspect="auto", cmap="magma", interpolation="nearest")
        ax.set_axis_off()
        _save(fig, svg_path)
    return csv_path
