"""Fingerprint database in the WAP/Loc/Geo/Ori CSV layout.

One row per capture: 516 RSS columns (WAP000..WAP515), the grid location,
floor and building tokens, three geomagnetic components, three orientation
angles and three optional trailing columns (Direction, Device, Timestamp).
"""

from __future__ import annotations

import csv
import enum
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np

AP_COUNT = 516
RSS_MIN = -110
RSS_MAX = 0
NOT_DETECTED = -110
GRID_SPACING_M = 0.6

WAP_COLUMNS = [f"WAP{i:03d}" for i in range(AP_COUNT)]
LOC_COLUMNS = ["Loc_x", "Loc_y", "Floor", "Building"]
SENSOR_COLUMNS = ["GeoX", "GeoY", "GeoZ", "OriX", "OriY", "OriZ"]
TRAILING_COLUMNS = ["Direction", "Device", "Timestamp"]
CORE_COLUMNS = WAP_COLUMNS + LOC_COLUMNS + SENSOR_COLUMNS
COLUMNS = CORE_COLUMNS + TRAILING_COLUMNS


class DatabaseError(ValueError):
    """Base class for rejected database input.

    ``row`` is the 0-based data-row index (header excluded), ``column`` the
    offending column name when one can be named.
    """

    kind = "database"

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class SchemaError(DatabaseError):
    kind = "schema"


class FieldParseError(DatabaseError):
    kind = "parse"


class RangeError(DatabaseError):
    kind = "range"


class Direction(enum.Enum):
    NORTH = "North"
    SOUTH = "South"
    EAST = "East"
    WEST = "West"
    LEFT = "Left"
    RIGHT = "Right"
    UP = "Up"

    @classmethod
    def parse(cls, token: str) -> "Direction":
        for d in cls:
            if d.value.lower() == token.strip().lower():
                return d
        raise ValueError(f"unknown direction {token!r}")


@dataclass(frozen=True)
class FingerprintRecord:
    rss: tuple[int, ...]
    loc_x: int
    loc_y: int
    floor: str
    building: str
    geo: tuple[float, float, float]
    ori: tuple[float, float, float]
    direction: Direction | None = None
    device: str = ""
    timestamp: int | None = None

    def __post_init__(self):
        if len(self.rss) != AP_COUNT:
            raise SchemaError(f"expected {AP_COUNT} RSS values, got {len(self.rss)}")
        for i, v in enumerate(self.rss):
            if not RSS_MIN <= v <= RSS_MAX:
                raise RangeError(f"RSS {v} outside [{RSS_MIN}, {RSS_MAX}]", column=WAP_COLUMNS[i])
        if self.loc_x < 0 or self.loc_y < 0:
            raise RangeError("negative grid location", column="Loc_x" if self.loc_x < 0 else "Loc_y")
        for name, vec in (("Geo", self.geo), ("Ori", self.ori)):
            for axis, v in zip("XYZ", vec):
                if not math.isfinite(v):
                    raise RangeError(f"non-finite value {v}", column=name + axis)

    @property
    def detected(self) -> list[int]:
        """Indices of APs with a reading above the not-detected sentinel."""
        return [i for i, v in enumerate(self.rss) if v != NOT_DETECTED]


@dataclass(frozen=True)
class Database:
    records: tuple[FingerprintRecord, ...] = ()
    ap_count: int = AP_COUNT
    spacing_m: float = GRID_SPACING_M

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.spacing_m > 0:
            raise ValueError("spacing_m must be positive")
        for r in self.records:
            if len(r.rss) != self.ap_count:
                raise SchemaError("record AP count differs from database ap_count")

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def rss_matrix(self) -> np.ndarray:
        """RSS readings as an ``(n_records, ap_count)`` int array."""
        if not self.records:
            return np.empty((0, self.ap_count), dtype=np.int64)
        return np.array([r.rss for r in self.records], dtype=np.int64)

    def geo_matrix(self) -> np.ndarray:
        return np.array([r.geo for r in self.records], dtype=float).reshape(-1, 3)

    def with_geo(self, geo: np.ndarray) -> "Database":
        """Copy of the database with the geomagnetic columns replaced."""
        geo = np.asarray(geo, dtype=float)
        if geo.shape != (len(self.records), 3):
            raise ValueError(f"geo must have shape ({len(self.records)}, 3), got {geo.shape}")
        recs = [
            FingerprintRecord(
                rss=r.rss, loc_x=r.loc_x, loc_y=r.loc_y, floor=r.floor, building=r.building,
                geo=tuple(float(v) for v in g), ori=r.ori, direction=r.direction,
                device=r.device, timestamp=r.timestamp,
            )
            for r, g in zip(self.records, geo)
        ]
        return Database(tuple(recs), self.ap_count, self.spacing_m)

    def select(self, floor: str | None = None, direction: Direction | None = None) -> "Database":
        recs = [
            r for r in self.records
            if (floor is None or r.floor == floor) and (direction is None or r.direction == direction)
        ]
        return Database(tuple(recs), self.ap_count, self.spacing_m)


def _parse_int(token: str, row: int, column: str) -> int:
    try:
        return int(token.strip())
    except ValueError:
        try:
            f = float(token)
        except ValueError:
            raise FieldParseError(f"not a number: {token!r}", row, column) from None
        if not f.is_integer():
            raise FieldParseError(f"not an integer: {token!r}", row, column) from None
        return int(f)


def _parse_float(token: str, row: int, column: str) -> float:
    try:
        v = float(token)
    except ValueError:
        raise FieldParseError(f"not a number: {token!r}", row, column) from None
    if not math.isfinite(v):
        raise RangeError(f"non-finite value {token!r}", row, column)
    return v


def _parse_row(cells: list[str], row: int, bounds: tuple[int, int] | None) -> FingerprintRecord:
    rss = []
    for i in range(AP_COUNT):
        v = _parse_int(cells[i], row, WAP_COLUMNS[i])
        if not RSS_MIN <= v <= RSS_MAX:
            raise RangeError(f"RSS {v} outside [{RSS_MIN}, {RSS_MAX}]", row, WAP_COLUMNS[i])
        rss.append(v)
    k = AP_COUNT
    loc_x = _parse_int(cells[k], row, "Loc_x")
    loc_y = _parse_int(cells[k + 1], row, "Loc_y")
    for name, v in (("Loc_x", loc_x), ("Loc_y", loc_y)):
        if v < 0:
            raise RangeError(f"negative grid coordinate {v}", row, name)
    if bounds is not None:
        if loc_x > bounds[0]:
            raise RangeError(f"Loc_x {loc_x} beyond bound {bounds[0]}", row, "Loc_x")
        if loc_y > bounds[1]:
            raise RangeError(f"Loc_y {loc_y} beyond bound {bounds[1]}", row, "Loc_y")
    floor = cells[k + 2].strip()
    building = cells[k + 3].strip()
    sensors = [_parse_float(cells[k + 4 + j], row, SENSOR_COLUMNS[j]) for j in range(6)]

    direction, device, timestamp = None, "", None
    if len(cells) == len(COLUMNS):
        token = cells[-3].strip()
        if token:
            try:
                direction = Direction.parse(token)
            except ValueError as exc:
                raise FieldParseError(str(exc), row, "Direction") from None
        device = cells[-2].strip()
        if cells[-1].strip():
            timestamp = _parse_int(cells[-1], row, "Timestamp")
    return FingerprintRecord(
        rss=tuple(rss), loc_x=loc_x, loc_y=loc_y, floor=floor, building=building,
        geo=tuple(sensors[:3]), ori=tuple(sensors[3:]),
        direction=direction, device=device, timestamp=timestamp,
    )


def parse_database(stream: TextIO | str, bounds: tuple[int, int] | None = None,
                   spacing_m: float = GRID_SPACING_M) -> Database:
    """Parse a CSV stream (or string) into a :class:`Database`.

    The header must be the core columns, optionally followed by the three
    trailing columns. ``bounds`` is the inclusive maximum ``(loc_x, loc_y)``.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SchemaError("empty input: missing header row") from None
    if header not in (CORE_COLUMNS, COLUMNS):
        n = min(len(header), len(COLUMNS))
        bad = next((i for i in range(n) if header[i] != COLUMNS[i]), n)
        col = COLUMNS[bad] if bad < len(COLUMNS) else header[bad]
        raise SchemaError(f"unexpected header ({len(header)} columns)", column=col)
    width = len(header)
    records = []
    for row, cells in enumerate(reader):
        if not cells or (len(cells) == 1 and not cells[0].strip()):
            continue
        if len(cells) != width:
            col = COLUMNS[len(cells)] if len(cells) < width else f"#{len(cells)}"
            raise SchemaError(f"expected {width} columns, got {len(cells)}", row, col)
        records.append(_parse_row(cells, row, bounds))
    return Database(tuple(records), AP_COUNT, spacing_m)


def read_database(path, **kwargs) -> Database:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_database(fh, **kwargs)


def _fmt_float(v: float) -> str:
    return repr(float(v))


def serialize_database(db: Database, stream: TextIO | None = None) -> str | None:
    """Write ``db`` as CSV with the full column set.

    Floats are written with ``repr`` so parsing reproduces them exactly.
    Returns the text when no stream is given.
    """
    out = stream if stream is not None else io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in db.records:
        writer.writerow(
            [str(v) for v in r.rss]
            + [str(r.loc_x), str(r.loc_y), r.floor, r.building]
            + [_fmt_float(v) for v in r.geo]
            + [_fmt_float(v) for v in r.ori]
            + [r.direction.value if r.direction else "", r.device,
               "" if r.timestamp is None else str(r.timestamp)]
        )
    if stream is None:
        return out.getvalue()
    return None


def write_database(db: Database, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        serialize_database(db, fh)


@dataclass
class ValidationReport:
    n_records: int
    ap_detection_counts: list[int]
    floor_counts: dict[str, int]
    out_of_bounds_rows: list[int] = field(default_factory=list)
    reference_points: dict[str, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.out_of_bounds_rows

    def summary_lines(self) -> list[str]:
        lines = [f"records={self.n_records}"]
        detected = sum(1 for c in self.ap_detection_counts if c)
        lines.append(f"aps_detected={detected}/{len(self.ap_detection_counts)}")
        for fl in sorted(self.floor_counts):
            lines.append(f"floor={fl} records={self.floor_counts[fl]} "
                         f"reference_points={self.reference_points.get(fl, 0)}")
        lines.append(f"out_of_bounds_rows={len(self.out_of_bounds_rows)}")
        return lines


def validate(db: Database, bounds: tuple[int, int] | None = None) -> ValidationReport:
    """Per-AP detection counts, per-floor record and reference-point counts,
    and the rows outside ``bounds`` (inclusive max ``(loc_x, loc_y)``)."""
    rss = db.rss_matrix()
    counts = (rss != NOT_DETECTED).sum(axis=0).astype(int).tolist() if len(db) else [0] * db.ap_count
    floors = Counter(r.floor for r in db.records)
    points: dict[str, set] = {}
    for r in db.records:
        points.setdefault(r.floor, set()).add((r.loc_x, r.loc_y))
    bad = []
    if bounds is not None:
        bad = [i for i, r in enumerate(db.records) if r.loc_x > bounds[0] or r.loc_y > bounds[1]]
    return ValidationReport(
        n_records=len(db),
        ap_detection_counts=counts,
        floor_counts=dict(floors),
        out_of_bounds_rows=bad,
        reference_points={k: len(v) for k, v in points.items()},
    )


def records_from_arrays(rss: Iterable, locs: Iterable, geo: Iterable, ori: Iterable | None = None,
                        floor: str = "4", building: str = "IBSS", directions=None,
                        device: str = "") -> list[FingerprintRecord]:
    """Convenience constructor used by the synthetic-data helpers."""
    rss = list(rss)
    locs = list(locs)
    geo = list(geo)
    ori = list(ori) if ori is not None else [(0.0, 0.0, 0.0)] * len(rss)
    directions = list(directions) if directions is not None else [None] * len(rss)
    return [
        FingerprintRecord(
            rss=tuple(int(v) for v in r), loc_x=int(l[0]), loc_y=int(l[1]), floor=floor,
            building=building, geo=tuple(float(v) for v in g), ori=tuple(float(v) for v in o),
            direction=d, device=device,
        )
        for r, l, g, o, d in zip(rss, locs, geo, ori, directions)
    ]
