"""Geomagnetic field map: C1 Clough-Tocher interpolation over a regular grid.

Every grid cell is split along its (+x, +y) diagonal into two macro
triangles; each macro triangle is split at its centroid into three cubic
Bezier micro-triangles. Node values and gradients fix the control points
around each vertex, the cross-boundary (normal) derivative along every macro
edge is forced to be linear so neighbouring patches join with C1 continuity,
and the remaining interior points follow from C1 conditions inside the macro
triangle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import binfmt
from .database import Database, Direction

MAP_FORMAT_VERSION = 1

# Cubic multi-indices (a, b, c) over a micro-triangle (A, B, C=centroid).
CUBIC_INDEX = np.array([
    (3, 0, 0), (0, 3, 0), (0, 0, 3),
    (2, 1, 0), (1, 2, 0),
    (2, 0, 1), (1, 0, 2),
    (0, 2, 1), (0, 1, 2),
    (1, 1, 1),
])
_MULTINOMIAL = np.array([6 / (math.factorial(a) * math.factorial(b) * math.factorial(c))
                         for a, b, c in CUBIC_INDEX])
_POS = {tuple(ix): k for k, ix in enumerate(CUBIC_INDEX)}


class GeoMapError(ValueError):
    pass


class OutOfDomainError(GeoMapError):
    pass


@dataclass(frozen=True)
class TestBed:
    width_m: float
    height_m: float
    spacing_m: float = 0.6

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not (self.width_m > 0 and self.height_m > 0 and self.spacing_m > 0):
            raise GeoMapError(f"degenerate bed {self.width_m}x{self.height_m} @ {self.spacing_m}")
        for name, v in (("width", self.width_m), ("height", self.height_m)):
            n = round(v / self.spacing_m)
            if n < 1 or abs(n * self.spacing_m - v) > 1e-9:
                raise GeoMapError(f"bed {name} {v} is not a multiple of spacing {self.spacing_m}")

    @property
    def nx(self) -> int:
        """Number of cells along x."""
        return round(self.width_m / self.spacing_m)

    @property
    def ny(self) -> int:
        return round(self.height_m / self.spacing_m)

    @property
    def node_shape(self) -> tuple[int, int]:
        return self.nx + 1, self.ny + 1

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return ((p[:, 0] >= -tol) & (p[:, 0] <= self.width_m + tol)
                & (p[:, 1] >= -tol) & (p[:, 1] <= self.height_m + tol))

    @classmethod
    def parse(cls, text: str, spacing_m: float = 0.6) -> "TestBed":
        """Parse ``"30x7.2"``."""
        try:
            w, h = (float(t) for t in text.lower().split("x"))
        except ValueError:
            raise GeoMapError(f"bed must look like WIDTHxHEIGHT, got {text!r}") from None
        return cls(w, h, spacing_m)


def _node_positions(bed: TestBed) -> np.ndarray:
    nx1, ny1 = bed.node_shape
    ix, iy = np.meshgrid(np.arange(nx1), np.arange(ny1), indexing="ij")
    return np.stack([ix * bed.spacing_m, iy * bed.spacing_m], axis=-1).reshape(-1, 2)


def grid_triangles(bed: TestBed) -> np.ndarray:
    """Counter-clockwise node-index triples, two per cell.

    Node (ix, iy) has flat index ``ix * (ny + 1) + iy``. Cell (i, j) yields
    triangle ``2 * (i * ny + j)`` below the diagonal and ``+1`` above it.
    """
    nx, ny = bed.nx, bed.ny
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    i, j = i.ravel(), j.ravel()

    def n(a, b):
        return a * (ny + 1) + b

    lower = np.stack([n(i, j), n(i + 1, j), n(i + 1, j + 1)], axis=1)
    upper = np.stack([n(i, j), n(i + 1, j + 1), n(i, j + 1)], axis=1)
    return np.stack([lower, upper], axis=1).reshape(-1, 3)


def central_gradients(values: np.ndarray, spacing: float) -> np.ndarray:
    """Central differences inside the grid, one-sided on the boundary.

    ``values`` has shape ``(nx+1, ny+1, C)``; returns ``(nx+1, ny+1, 2, C)``.
    """
    gx = np.gradient(values, spacing, axis=0, edge_order=1)
    gy = np.gradient(values, spacing, axis=1, edge_order=1)
    return np.stack([gx, gy], axis=2)


def _inward_normal_bary(A, B, C):
    """Barycentric coordinates (w.r.t. A, B, C) of the unit normal of edge AB
    pointing into the triangle."""
    e = B - A
    n = np.stack([-e[:, 1], e[:, 0]], axis=1)
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    flip = np.einsum("ij,ij->i", n, C - A) < 0
    n[flip] *= -1
    M = np.stack([
        np.stack([A[:, 0], B[:, 0], C[:, 0]], axis=1),
        np.stack([A[:, 1], B[:, 1], C[:, 1]], axis=1),
        np.ones((len(A), 3)),
    ], axis=1)
    rhs = np.stack([n[:, 0], n[:, 1], np.zeros(len(A))], axis=1)
    return np.linalg.solve(M, rhs[..., None])[..., 0]


def clough_tocher_coefficients(verts: np.ndarray, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Bezier control points for a batch of macro triangles.

    verts: (n, 3, 2) positions, f: (n, 3, C) values, g: (n, 3, 2, C)
    gradients. Returns (n, 3, 10, C): for micro-triangle m, with vertices
    (V_m, V_{m+1}, centroid), coefficients in :data:`CUBIC_INDEX` order.
    """
    n, _, _ = verts.shape
    ncomp = f.shape[-1]
    cen = verts.mean(axis=1)

    def dgrad(i, vec):
        # g_i . vec / 3, vec is (n, 2) -> (n, C)
        return np.einsum("nd,ndc->nc", vec, g[:, i]) / 3.0

    # edge neighbours e[i][j] and first interior point p1[i] around each vertex
    e = {}
    for i in range(3):
        for j in range(3):
            if i != j:
                e[i, j] = f[:, i] + dgrad(i, verts[:, j] - verts[:, i])
    p1 = [f[:, i] + dgrad(i, cen - verts[:, i]) for i in range(3)]

    # face point of micro m from the linear cross-boundary derivative condition
    T = []
    for m in range(3):
        a, b = m, (m + 1) % 3
        u = _inward_normal_bary(verts[:, a], verts[:, b], cen)
        uA, uB, uC = (u[:, k:k + 1] for k in range(3))
        N0 = 3.0 * (uA * f[:, a] + uB * e[a, b] + uC * p1[a])
        N2 = 3.0 * (uA * e[b, a] + uB * f[:, b] + uC * p1[b])
        T.append(((N0 + N2) / 6.0 - uA * e[a, b] - uB * e[b, a]) / uC)

    p2 = [(p1[i] + T[i] + T[(i - 1) % 3]) / 3.0 for i in range(3)]
    centre = (p2[0] + p2[1] + p2[2]) / 3.0

    coef = np.empty((n, 3, 10, ncomp))
    for m in range(3):
        a, b = m, (m + 1) % 3
        coef[:, m, _POS[3, 0, 0]] = f[:, a]
        coef[:, m, _POS[0, 3, 0]] = f[:, b]
        coef[:, m, _POS[0, 0, 3]] = centre
        coef[:, m, _POS[2, 1, 0]] = e[a, b]
        coef[:, m, _POS[1, 2, 0]] = e[b, a]
        coef[:, m, _POS[2, 0, 1]] = p1[a]
        coef[:, m, _POS[1, 0, 2]] = p2[a]
        coef[:, m, _POS[0, 2, 1]] = p1[b]
        coef[:, m, _POS[0, 1, 2]] = p2[b]
        coef[:, m, _POS[1, 1, 1]] = T[m]
    return coef


def _bernstein(lam: np.ndarray) -> np.ndarray:
    """Cubic Bernstein basis values, lam is (N, 3) -> (N, 10)."""
    powers = lam[:, None, :] ** CUBIC_INDEX[None, :, :]
    return _MULTINOMIAL * powers.prod(axis=2)


@dataclass(frozen=True, eq=False)
class GeoMap:
    bed: TestBed
    values: np.ndarray      # (nx+1, ny+1, 3) node values, uT
    gradients: np.ndarray   # (nx+1, ny+1, 2, 3) d/dx, d/dy per component
    triangles: np.ndarray = field(init=False, repr=False)
    _coef: np.ndarray = field(init=False, repr=False)
    _inv: np.ndarray = field(init=False, repr=False)
    _verts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        grads = np.array(self.gradients, dtype=float)
        shape = self.bed.node_shape
        if vals.ndim != 3 or vals.shape[:2] != shape:
            raise GeoMapError(f"node values must have shape {shape + (3,)}, got {vals.shape}")
        if grads.shape != shape + (2, vals.shape[2]):
            raise GeoMapError(f"gradients must have shape {shape + (2, vals.shape[2])}")
        if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(grads))):
            raise GeoMapError("non-finite node data")
        vals.setflags(write=False)
        grads.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "gradients", grads)

        tris = grid_triangles(self.bed)
        pos = _node_positions(self.bed)
        fv = vals.reshape(-1, vals.shape[2])
        gv = grads.reshape(-1, 2, vals.shape[2])
        verts = pos[tris]
        coef = clough_tocher_coefficients(verts, fv[tris], gv[tris])
        # per micro-triangle barycentric transform: lam = inv @ [x, y, 1]
        cen = verts.mean(axis=1)
        inv = np.empty((len(tris), 3, 3, 3))
        for m in range(3):
            A, B = verts[:, m], verts[:, (m + 1) % 3]
            M = np.stack([
                np.stack([A[:, 0], B[:, 0], cen[:, 0]], axis=1),
                np.stack([A[:, 1], B[:, 1], cen[:, 1]], axis=1),
                np.ones((len(tris), 3)),
            ], axis=1)
            inv[:, m] = np.linalg.inv(M)
        for arr in (tris, coef, inv, verts):
            arr.setflags(write=False)
        object.__setattr__(self, "triangles", tris)
        object.__setattr__(self, "_coef", coef)
        object.__setattr__(self, "_inv", inv)
        object.__setattr__(self, "_verts", verts)

    # construction helpers -------------------------------------------------
    @classmethod
    def from_grid(cls, bed: TestBed, values, gradients=None) -> "GeoMap":
        values = np.asarray(values, dtype=float)
        if gradients is None:
            gradients = central_gradients(values, bed.spacing_m)
        return cls(bed, values, gradients)

    @classmethod
    def from_function(cls, bed: TestBed, func, grad=None) -> "GeoMap":
        """Sample ``func(x, y) -> (..., 3)`` at the nodes; ``grad(x, y)``
        returning ``(..., 2, 3)`` supplies exact gradients if given."""
        pos = _node_positions(bed)
        shape = bed.node_shape
        vals = np.asarray(func(pos[:, 0], pos[:, 1]), dtype=float).reshape(shape + (-1,))
        grads = None
        if grad is not None:
            grads = np.asarray(grad(pos[:, 0], pos[:, 1]), dtype=float).reshape(shape + (2, -1))
        return cls.from_grid(bed, vals, grads)

    @property
    def node_positions(self) -> np.ndarray:
        return _node_positions(self.bed)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.bed.node_shape))

    # evaluation -------------------------------------------------------------
    def locate(self, points) -> np.ndarray:
        """Macro-triangle index for each in-bed point."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        s = self.bed.spacing_m
        u = p[:, 0] / s
        v = p[:, 1] / s
        i = np.clip(np.floor(u).astype(np.int64), 0, self.bed.nx - 1)
        j = np.clip(np.floor(v).astype(np.int64), 0, self.bed.ny - 1)
        upper = (v - j) > (u - i)
        return 2 * (i * self.bed.ny + j) + upper.astype(np.int64)

    def eval_patch(self, tri, points, derivative: bool = False, micro=None):
        """Evaluate the polynomial patches of macro triangles ``tri`` at
        ``points`` (no domain check; points slightly outside a triangle
        evaluate its polynomial extension). ``micro`` forces the cubic piece
        (0..2, piece m spans vertices m, m+1 and the centroid) instead of the
        one containing each point. With ``derivative`` also return the
        (N, 2, 3) spatial gradient."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        tri = np.broadcast_to(np.asarray(tri, dtype=np.int64), (len(p),))
        hom = np.concatenate([p, np.ones((len(p), 1))], axis=1)
        # barycentrics w.r.t. the macro triangle: from micro 0 transform
        lam0 = np.einsum("nij,nj->ni", self._inv[tri, 0], hom)
        # micro lam (V0, V1, C) -> macro lam: l0 = a + c/3, l1 = b + c/3, l2 = c/3
        macro = np.stack([lam0[:, 0] + lam0[:, 2] / 3, lam0[:, 1] + lam0[:, 2] / 3, lam0[:, 2] / 3], axis=1)
        if micro is None:
            m = (np.argmin(macro, axis=1) + 1) % 3
        else:
            m = np.broadcast_to(np.asarray(micro, dtype=np.int64), (len(p),))
        lam = np.einsum("nij,nj->ni", self._inv[tri, m], hom)
        coef = self._coef[tri, m]             # (N, 10, C)
        val = np.einsum("nk,nkc->nc", _bernstein(lam), coef)
        if not derivative:
            return val
        # d/d lam_r of the cubic: 3 * sum over quadratic basis of b_{beta + e_r}
        dlam = np.zeros((len(p), 3, coef.shape[2]))
        quad = [(a, b, 2 - a - b) for a in range(3) for b in range(3 - a)]
        for beta in quad:
            bq = (2 / (math.factorial(beta[0]) * math.factorial(beta[1]) * math.factorial(beta[2]))
                  * lam[:, 0] ** beta[0] * lam[:, 1] ** beta[1] * lam[:, 2] ** beta[2])
            for r in range(3):
                idx = list(beta)
                idx[r] += 1
                dlam[:, r] += 3 * bq[:, None] * coef[:, _POS[tuple(idx)]]
        inv = self._inv[tri, m]              # rows: lam_r = inv[r] . (x, y, 1)
        grad = np.einsum("nrd,nrc->ndc", inv[:, :, :2], dlam)
        return val, grad

    def query(self, points) -> np.ndarray:
        """Field value(s) at in-bed point(s); raises OutOfDomainError outside.

        A single 2-vector returns a 3-vector, an (N, 2) array returns (N, 3).
        """
        arr = np.asarray(points, dtype=float)
        single = arr.ndim == 1
        p = np.atleast_2d(arr)
        if p.shape[1] != 2:
            raise GeoMapError(f"points must be 2-vectors, got shape {arr.shape}")
        inside = self.bed.contains(p)
        if not np.all(inside):
            bad = int(np.flatnonzero(~inside)[0])
            raise OutOfDomainError(
                f"point {tuple(p[bad])} (index {bad}) outside bed "
                f"[0, {self.bed.width_m}] x [0, {self.bed.height_m}]")
        q = np.clip(p, 0.0, [self.bed.width_m, self.bed.height_m])
        out = self.eval_patch(self.locate(q), q)
        return out[0] if single else out

    def gradient(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if not np.all(self.bed.contains(p)):
            raise OutOfDomainError("point outside bed")
        return self.eval_patch(self.locate(p), p, derivative=True)[1]

    # persistence ------------------------------------------------------------
    def save(self, path) -> None:
        binfmt.dump(path, "geomap", {
            "format_version": MAP_FORMAT_VERSION,
            "width_m": self.bed.width_m,
            "height_m": self.bed.height_m,
            "spacing_m": self.bed.spacing_m,
        }, {"values": self.values, "gradients": self.gradients})

    @classmethod
    def load(cls, path) -> "GeoMap":
        meta, arrays = binfmt.load(path, "geomap")
        if meta.get("format_version") != MAP_FORMAT_VERSION:
            raise binfmt.FormatError(f"{path}: unsupported map version {meta.get('format_version')}")
        bed = TestBed(meta["width_m"], meta["height_m"], meta["spacing_m"])
        return cls(bed, arrays["values"], arrays["gradients"])


def build_geomap(db: Database, bed: TestBed, direction: Direction | None = None,
                 floor: str | None = None) -> GeoMap:
    """Average the geomagnetic readings per grid node and build the map.

    ``direction`` keeps only records captured at that heading; by default all
    headings are averaged component-wise.
    """
    if abs(db.spacing_m - bed.spacing_m) > 1e-12:
        raise GeoMapError(f"database spacing {db.spacing_m} != bed spacing {bed.spacing_m}")
    nx1, ny1 = bed.node_shape
    acc = np.zeros((nx1, ny1, 3))
    cnt = np.zeros((nx1, ny1), dtype=np.int64)
    for idx, r in enumerate(db.records):
        if floor is not None and r.floor != floor:
            continue
        if direction is not None and r.direction != direction:
            continue
        if r.loc_x >= nx1 or r.loc_y >= ny1:
            raise GeoMapError(f"record {idx} at grid ({r.loc_x}, {r.loc_y}) lies outside the bed")
        acc[r.loc_x, r.loc_y] += r.geo
        cnt[r.loc_x, r.loc_y] += 1
    missing = np.argwhere(cnt == 0)
    if len(missing):
        listed = ", ".join(f"({x},{y})" for x, y in missing[:20].tolist())
        more = f" and {len(missing) - 20} more" if len(missing) > 20 else ""
        raise GeoMapError(f"{len(missing)} missing grid node(s): {listed}{more}")
    return GeoMap.from_grid(bed, acc / cnt[..., None])


@dataclass(frozen=True)
class Raster:
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray  # (len(xs), len(ys), 3)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.xs), len(self.ys)


def rasterize(gmap: GeoMap, pitch_m: float) -> Raster:
    """Sample the map on a regular ``pitch_m`` lattice covering the bed."""
    if not pitch_m > 0:
        raise GeoMapError(f"pitch must be positive, got {pitch_m}")
    if pitch_m > gmap.bed.spacing_m + 1e-12:
        raise GeoMapError(f"pitch {pitch_m} exceeds grid spacing {gmap.bed.spacing_m}")
    nx = int(math.floor(gmap.bed.width_m / pitch_m + 1e-9)) + 1
    ny = int(math.floor(gmap.bed.height_m / pitch_m + 1e-9)) + 1
    xs = np.minimum(np.arange(nx) * pitch_m, gmap.bed.width_m)
    ys = np.minimum(np.arange(ny) * pitch_m, gmap.bed.height_m)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    vals = gmap.query(np.stack([X.ravel(), Y.ravel()], axis=1)).reshape(nx, ny, -1)
    return Raster(xs, ys, vals)
