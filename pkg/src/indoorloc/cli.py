"""Command-line interface.

Exit codes: 0 success, 1 runtime error (one ``error: <kind>: <message>``
line on stderr), 2 usage error. Log verbosity comes from ``--log-level`` or
the ``INDOORLOC_LOG`` environment variable (default WARNING).
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

import numpy as np

from . import __version__

log = logging.getLogger("indoorloc")


def _bed(text: str, spacing: float):
    from .geomap import TestBed
    return TestBed.parse(text, spacing)


def _bounds(text: str | None):
    if text is None:
        return None
    try:
        x, y = (int(t) for t in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bounds must look like MAXXxMAXY, got {text!r}") from None
    return x, y


def _write_rows(path, header, rows):
    from .plotting import write_csv
    write_csv(path, header, rows)


# ------------------------------------------------------------ commands ----

def cmd_ingest(a):
    from .database import read_database, write_database
    db = read_database(a.input, bounds=_bounds(a.bounds), spacing_m=a.spacing)
    if a.out:
        write_database(db, a.out)
    print(f"records={len(db)}")


def cmd_validate(a):
    from .database import NOT_DETECTED, read_database, validate
    db = read_database(a.input, spacing_m=a.spacing)
    rep = validate(db, _bounds(a.bounds))
    for line in rep.summary_lines():
        print(line)
    if a.out:
        _write_rows(a.out, ["ap", "detections"],
                    ((f"WAP{i:03d}", c) for i, c in enumerate(rep.ap_detection_counts)))
    if a.svg:
        from .plotting import plot_histogram
        rss = db.rss_matrix()
        plot_histogram(rss[rss != NOT_DETECTED], a.svg, bins=55,
                       xlabel="RSS (dBm)")


def cmd_filter(a):
    from .database import read_database, write_database
    from .kalman import filter_series
    db = read_database(a.input, spacing_m=a.spacing)
    write_database(db.with_geo(filter_series(db.geo_matrix(), a.q, a.r)), a.out)
    print(f"records={len(db)}")


def cmd_build_map(a):
    from .database import Direction, read_database
    from .geomap import build_geomap
    db = read_database(a.input, spacing_m=a.spacing)
    direction = Direction.parse(a.direction) if a.direction else None
    gmap = build_geomap(db, _bed(a.bed, a.spacing), direction=direction, floor=a.floor)
    gmap.save(a.out)
    print(f"nodes={gmap.n_nodes} triangles={len(gmap.triangles)}")


def cmd_rasterize(a):
    from .geomap import GeoMap, rasterize
    gmap = GeoMap.load(a.map)
    r = rasterize(gmap, a.pitch)
    X, Y = np.meshgrid(r.xs, r.ys, indexing="ij")
    vals = r.values.reshape(-1, 3)
    _write_rows(a.out, ["x_m", "y_m", "GeoX", "GeoY", "GeoZ"],
                ([x, y, *v] for x, y, v in zip(X.ravel(), Y.ravel(), vals)))
    if a.svg:
        from .plotting import plot_raster
        plot_raster(r, gmap.bed, a.svg, component="xyz".index(a.component))
    print(f"raster={r.shape[0]}x{r.shape[1]}")


def cmd_gen_traces(a):
    from .mobility import MobilityModel, RwpConfig, generate_traces, write_traces
    bed = _bed(a.bed, a.spacing)
    cfg = RwpConfig(bed, a.steps, a.v_min, a.v_max, a.max_pause, a.dt, a.seed)
    traces = generate_traces(cfg, a.n, MobilityModel(a.model), a.shape, a.scale)
    write_traces(traces, a.out)
    if a.density_svg:
        from .plotting import plot_density
        pos = np.concatenate([t.positions for t in traces])
        H, xe, ye = np.histogram2d(pos[:, 0], pos[:, 1], bins=(max(1, bed.nx), max(1, bed.ny)),
                                   range=((0, bed.width_m), (0, bed.height_m)))
        plot_density(H, xe, ye, a.density_svg)
    print(f"traces={len(traces)} steps={a.steps}")


def cmd_make_dataset(a):
    from .geomap import GeoMap
    from .mobility import read_traces
    from .sequences import build_dataset, normalize, save_split
    gmap = GeoMap.load(a.map)
    traces = read_traces(a.traces)
    ds = build_dataset(traces, gmap, a.T, a.stride)
    train, test = normalize(ds, a.split)
    save_split(a.out, train, test)
    print(f"samples={len(ds)} train={len(train)} test={len(test)} time_steps={a.T}")


def _lstm_config(a):
    from .pipelines import LstmPipelineConfig, replace_config
    cfg = LstmPipelineConfig.from_file(a.config) if a.config else LstmPipelineConfig()
    overrides = {k: v for k, v in (("epochs", a.epochs), ("seed", a.seed), ("hidden", a.hidden),
                                   ("batch", a.batch), ("lr", a.lr)) if v is not None}
    return replace_config(cfg, **overrides)


def cmd_train_lstm(a):
    from .pipelines import replace_config, train_lstm
    from .sequences import load_split
    train, test = load_split(a.ds)
    cfg = _lstm_config(a)
    if cfg.time_steps != train.time_steps:
        log.warning("config time_steps=%d overridden by dataset (%d)", cfg.time_steps, train.time_steps)
        cfg = replace_config(cfg, time_steps=train.time_steps)
    est, history = train_lstm(cfg, train, test)
    est.save(a.out)
    if a.history:
        from .plotting import plot_history
        plot_history(history, os.path.splitext(a.history)[0] + ".svg")
    last = history[-1] if history else None
    print(f"epochs={len(history)}" + (f" train_loss={last.train_loss:.6g} test_loss={last.test_loss:.6g} "
                                      f"accuracy={last.accuracy:.4f}" if last else ""))


def cmd_train_cnn(a):
    from .nn.checkpoint import save_model
    from .pipelines import CnnPipelineConfig, replace_config, train_cnn
    from .rss_image import load_images
    pixels, labels, layout, classes = load_images(a.images)
    cfg = CnnPipelineConfig.from_file(a.config) if a.config else CnnPipelineConfig()
    overrides = {k: v for k, v in (("epochs", a.epochs), ("seed", a.seed), ("holdout", a.holdout))
                 if v is not None}
    cfg = replace_config(cfg, **overrides)
    model, hist = train_cnn(cfg, pixels, labels, n_classes=len(classes))
    save_model(a.out, model, {"classes": [list(c) for c in classes],
                              "layout_rows": layout.rows.tolist(), "layout_cols": layout.cols.tolist()})
    if a.history:
        from .plotting import plot_cnn_history
        plot_cnn_history(hist, os.path.splitext(a.history)[0] + ".svg")
    print(f"epochs={len(hist.epoch)} train_accuracy={hist.train_accuracy[-1] if hist.epoch else float('nan'):.4f}")


def _read_geo_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"GeoX", "GeoY", "GeoZ"} - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        return np.array([[float(r["GeoX"]), float(r["GeoY"]), float(r["GeoZ"])] for r in reader])


def cmd_estimate(a):
    from .pipelines import TrajectoryEstimator, estimate_trajectory
    est = TrajectoryEstimator.load(a.model)
    path = estimate_trajectory(est, _read_geo_csv(a.geo))
    _write_rows(a.out, ["step", "x_m", "y_m"], ((i, x, y) for i, (x, y) in enumerate(path)))
    print(f"steps={len(path)}")


def cmd_evaluate(a):
    from .nn.checkpoint import load_model
    from .nn.models import CnnClassifier
    from .plotting import plot_error_boxes
    reports = []
    for i, path in enumerate(a.model):
        label = a.label[i] if a.label and i < len(a.label) else os.path.splitext(os.path.basename(path))[0]
        model, extra = load_model(path)
        if isinstance(model, CnnClassifier):
            reports.append(_evaluate_cnn(a, model, extra, label))
        else:
            from .pipelines import TrajectoryEstimator, evaluate_lstm
            from .sequences import load_split
            if not a.ds:
                raise ValueError("evaluating an LSTM model needs --ds")
            _, test = load_split(a.ds)
            reports.append(evaluate_lstm(TrajectoryEstimator.load(path), test, label))
    plot_error_boxes(reports, os.path.splitext(a.out)[0] + ".svg")
    for r in reports:
        print(f"{r.label}: n={r.n_samples} mean={r.mean_err_m:.4f} "
              f"p75=[{r.p75_box[0]:.4f},{r.p75_box[1]:.4f}] max={r.max_err_m:.4f}")


def _evaluate_cnn(a, model, extra, label):
    from .metrics import error_stats
    from .rss_image import load_images
    if not a.images:
        raise ValueError("evaluating a CNN model needs --images")
    pixels, labels, _, classes = load_images(a.images)
    pred = model.predict_proba(pixels).argmax(axis=1)
    table = extra.get("classes") or [list(c) for c in classes]
    xy = np.array([[c[1], c[2]] for c in table], dtype=float) * a.spacing
    return error_stats(xy[pred], xy[labels], label=label)


def cmd_render_images(a):
    from .database import read_database
    from .rss_image import build_layout, reference_labels, render_batch, save_images, write_pgm
    db = read_database(a.input, spacing_m=a.spacing)
    layout = build_layout(db)
    pixels = render_batch(db.rss_matrix(), layout)
    labels, classes = reference_labels(db)
    save_images(a.out, pixels, labels, layout, classes)
    if a.pgm_dir:
        os.makedirs(a.pgm_dir, exist_ok=True)
        for i in range(min(len(pixels), a.pgm_limit)):
            write_pgm(os.path.join(a.pgm_dir, f"img{i:05d}.pgm"), pixels[i])
    print(f"images={len(pixels)} side={layout.side} classes={len(classes)}")


# -------------------------------------------------------------- parser ----

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="indoorloc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--log-level", default=os.environ.get("INDOORLOC_LOG", "WARNING"))
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.set_defaults(func=func)
        return sp

    def db_in(sp):
        sp.add_argument("--in", dest="input", required=True, help="fingerprint CSV")
        sp.add_argument("--spacing", type=float, default=0.6, help="grid pitch in metres")

    sp = add("ingest", cmd_ingest, "parse a fingerprint CSV and rewrite it canonically")
    db_in(sp)
    sp.add_argument("--bounds", help="inclusive max grid index, e.g. 50x12")
    sp.add_argument("--out")

    sp = add("validate", cmd_validate, "report AP detections, floor counts and out-of-bounds rows")
    db_in(sp)
    sp.add_argument("--bounds")
    sp.add_argument("--out", help="per-AP detection count CSV")
    sp.add_argument("--svg", help="histogram of detected RSS values (twin CSV alongside)")

    sp = add("filter", cmd_filter, "Kalman-smooth the geomagnetic columns")
    db_in(sp)
    sp.add_argument("--q", type=float, default=0.01, help="process noise")
    sp.add_argument("--r", type=float, default=1.0, help="measurement noise")
    sp.add_argument("--out", required=True)

    sp = add("build-map", cmd_build_map, "build a Clough-Tocher geomagnetic map")
    db_in(sp)
    sp.add_argument("--bed", required=True, help="WIDTHxHEIGHT in metres, e.g. 30x7.2")
    sp.add_argument("--direction", help="use only one heading (North, East, ...)")
    sp.add_argument("--floor")
    sp.add_argument("--out", required=True)

    sp = add("rasterize", cmd_rasterize, "sample a map on a fine lattice")
    sp.add_argument("--map", required=True)
    sp.add_argument("--pitch", type=float, default=0.1)
    sp.add_argument("--out", required=True)
    sp.add_argument("--svg", help="heat map of one component (twin CSV alongside)")
    sp.add_argument("--component", choices=["x", "y", "z"], default="z")

    sp = add("gen-traces", cmd_gen_traces, "generate random-waypoint traces")
    sp.add_argument("--model", choices=["rwp", "gamma"], default="rwp")
    sp.add_argument("--bed", required=True)
    sp.add_argument("--spacing", type=float, default=0.6)
    sp.add_argument("--steps", type=int, default=100)
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--v-min", type=float, default=0.5)
    sp.add_argument("--v-max", type=float, default=1.5)
    sp.add_argument("--max-pause", type=float, default=2.0)
    sp.add_argument("--dt", type=float, default=1.0)
    sp.add_argument("--shape", type=float, default=2.0, help="Gamma shape k")
    sp.add_argument("--scale", type=float, default=0.5, help="Gamma scale theta")
    sp.add_argument("--density-svg", help="position density heat map (twin CSV alongside)")
    sp.add_argument("--out", required=True)

    sp = add("make-dataset", cmd_make_dataset, "annotate traces and build windowed datasets")
    sp.add_argument("--traces", required=True)
    sp.add_argument("--map", required=True)
    sp.add_argument("--T", type=int, default=30)
    sp.add_argument("--stride", type=int, default=1)
    sp.add_argument("--split", type=float, default=0.75)
    sp.add_argument("--out", required=True)

    sp = add("train-lstm", cmd_train_lstm, "train the stacked LSTM trajectory estimator")
    sp.add_argument("--ds", required=True)
    sp.add_argument("--config")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--hidden", type=int)
    sp.add_argument("--batch", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--out", required=True)
    sp.add_argument("--history", help="per-epoch CSV; an SVG with the same stem is written too")

    sp = add("train-cnn", cmd_train_cnn, "train the RSS-image CNN")
    sp.add_argument("--images", required=True)
    sp.add_argument("--config")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--holdout", type=float)
    sp.add_argument("--out", required=True)
    sp.add_argument("--history")

    sp = add("estimate", cmd_estimate, "estimate a trajectory from a field sequence")
    sp.add_argument("--model", required=True)
    sp.add_argument("--geo", required=True, help="CSV with GeoX, GeoY, GeoZ columns")
    sp.add_argument("--out", required=True)

    sp = add("evaluate", cmd_evaluate, "error statistics and box plot for one or more models")
    sp.add_argument("--model", action="append", required=True)
    sp.add_argument("--label", action="append")
    sp.add_argument("--ds", help="dataset file (LSTM models; test split is used)")
    sp.add_argument("--images", help="image file (CNN models)")
    sp.add_argument("--spacing", type=float, default=0.6)
    sp.add_argument("--out", required=True, help="report CSV; the SVG box plot shares its stem")

    sp = add("render-images", cmd_render_images, "render RSS vectors as images")
    db_in(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--pgm-dir")
    sp.add_argument("--pgm-limit", type=int, default=16)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ValueError, OSError, RuntimeError, KeyError) as exc:
        kind = getattr(exc, "kind", type(exc).__name__)
        msg = str(exc).replace("\n", " ")
        print(f"error: {kind}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
