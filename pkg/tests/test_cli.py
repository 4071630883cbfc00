import csv
import os
import subprocess
import sys
from importlib import resources

import numpy as np
import pytest

from indoorloc.cli import main
from indoorloc.database import read_database, serialize_database
from indoorloc.synthetic import toy_database

TOY = str(resources.files("indoorloc") / "data" / "toy_db.csv")


def run(*args):
    return main([str(a) for a in args])


def test_bundled_toy_matches_generator():
    with open(TOY, encoding="utf-8") as fh:
        assert fh.read() == serialize_database(toy_database())


def test_help_and_usage_errors(capsys):
    assert run("--help") == 0
    assert "gen-traces" in capsys.readouterr().out
    assert run("bogus") == 2
    assert run("filter", "--in", TOY) == 2


def test_runtime_error_is_one_line(tmp_path, capsys):
    assert run("build-map", "--in", TOY, "--bed", "3x3", "--out", tmp_path / "m.bin") == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("error: ")
    bad = tmp_path / "bad.csv"
    bad.write_text("WAP000\n1\n")
    assert run("ingest", "--in", bad) == 1
    assert capsys.readouterr().err.startswith("error: schema: ")


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "indoorloc", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("indoorloc ")


def pipeline(d, seed):
    d.mkdir()
    os.chdir(d)
    assert run("ingest", "--in", TOY, "--out", "db.csv") == 0
    assert run("validate", "--in", "db.csv", "--bounds", "3x2", "--svg", "rss.svg") == 0
    assert run("filter", "--in", "db.csv", "--out", "f.csv", "--q", 0.02, "--r", 0.5) == 0
    assert run("build-map", "--in", "f.csv", "--bed", "1.8x1.2", "--out", "map.bin") == 0
    assert run("rasterize", "--map", "map.bin", "--pitch", 0.1, "--out", "field.csv", "--svg", "field.svg") == 0
    assert run("gen-traces", "--bed", "1.8x1.2", "--steps", 120, "--n", 2, "--seed", seed,
               "--out", "tr.csv", "--density-svg", "dens.svg") == 0
    assert run("gen-traces", "--model", "gamma", "--bed", "1.8x1.2", "--steps", 50, "--seed", seed,
               "--out", "gtr.csv") == 0
    assert run("make-dataset", "--traces", "tr.csv", "--map", "map.bin", "--T", 6, "--out", "ds.bin") == 0
    assert run("train-lstm", "--ds", "ds.bin", "--epochs", 2, "--hidden", 6, "--seed", seed,
               "--out", "m.bin", "--history", "hist.csv") == 0
    with open("geo.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["GeoX", "GeoY", "GeoZ"])
        w.writerows(np.genfromtxt("field.csv", delimiter=",", skip_header=1)[:20, 2:])
    assert run("estimate", "--model", "m.bin", "--geo", "geo.csv", "--out", "path.csv") == 0
    assert run("render-images", "--in", "db.csv", "--out", "img.bin", "--pgm-dir", "pgm") == 0
    assert run("train-cnn", "--images", "img.bin", "--epochs", 1, "--seed", seed, "--out", "c.bin",
               "--history", "ch.csv") == 0
    assert run("evaluate", "--model", "m.bin", "--model", "c.bin", "--label", "lstm", "--label", "cnn",
               "--ds", "ds.bin", "--images", "img.bin", "--out", "report.csv") == 0
    return {f: open(f, "rb").read() for f in sorted(os.listdir(".")) if os.path.isfile(f)}


def test_end_to_end_bit_identical(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    a = pipeline(tmp_path / "a", 3)
    b = pipeline(tmp_path / "b", 3)
    assert a.keys() == b.keys()
    assert [k for k in a if a[k] != b[k]] == []
    for svg in ("rss.svg", "field.svg", "dens.svg", "hist.svg", "ch.svg", "report.svg"):
        assert svg in a and svg[:-4] + ".csv" in a
    assert read_database(tmp_path / "a" / "db.csv") == toy_database()
    rows = list(csv.reader(open(tmp_path / "a" / "report.csv")))
    assert [r[0] for r in rows[1:]] == ["lstm", "cnn"]
    c = pipeline(tmp_path / "c", 4)
    assert c["tr.csv"] != a["tr.csv"] and c["m.bin"] != a["m.bin"]
