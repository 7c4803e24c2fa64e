"""Random planar environments: percolation clusters, Poisson-Delaunay
triangulations, square lattices, and coarse-grained red-box fields.

All generators are pure functions of (params, seed) and return immutable
:class:`EmbeddedGraph` objects that can be shared read-only across workers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from rswlab import rng as rnglib


class GraphFormatError(ValueError):
    """Malformed serialized graph; carries a location string."""


class DegenerateSampleError(RuntimeError):
    """A stochastic generator produced an unusable sample."""


class SubcriticalSampleError(DegenerateSampleError):
    """Largest percolation cluster too small to carry any diagnostics."""


class DegeneratePointSetError(DegenerateSampleError):
    """Fewer than three points sampled; no triangulation exists."""


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle given by center and half-widths."""

    cx: float
    cy: float
    hx: float
    hy: float

    def __post_init__(self):
        if not (self.hx > 0 and self.hy > 0):
            raise ValueError("rectangle half-widths must be positive")

    @classmethod
    def square(cls, center: tuple[float, float], half: float) -> "Rect":
        return cls(center[0], center[1], half, half)

    @property
    def center(self) -> tuple[float, float]:
        return (self.cx, self.cy)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """(xmin, xmax, ymin, ymax)."""
        return (self.cx - self.hx, self.cx + self.hx, self.cy - self.hy, self.cy + self.hy)

    def contains(self, x, y) -> np.ndarray | bool:
        """Closed-box membership; vectorized over coordinate arrays."""
        return (
            (np.abs(np.asarray(x) - self.cx) <= self.hx)
            & (np.abs(np.asarray(y) - self.cy) <= self.hy)
        )

    def padded(self, pad: float) -> "Rect":
        return Rect(self.cx, self.cy, self.hx + pad, self.hy + pad)

    def translated(self, dx: float, dy: float) -> "Rect":
        return Rect(self.cx + dx, self.cy + dy, self.hx, self.hy)

    @property
    def area(self) -> float:
        return 4.0 * self.hx * self.hy

    def boundary_distance(self, x: float, y: float) -> float:
        """Euclidean distance from an interior point to the rectangle boundary."""
        xmin, xmax, ymin, ymax = self.bounds
        return min(x - xmin, xmax - x, y - ymin, ymax - y)


@dataclass(frozen=True)
class PercolationParams:
    p: float
    n: int
    supercritical: bool = True

    def __post_init__(self):
        if not (0.0 < self.p <= 1.0):
            raise ValueError(f"p must be in (0, 1], got {self.p}")
        if self.n < 2:
            raise ValueError(f"box half-width n must be >= 2, got {self.n}")
        if self.supercritical and not self.p > 0.5:
            raise ValueError(
                f"supercritical sampling requires p > 1/2, got p={self.p}; "
                "pass supercritical=False to sample anyway"
            )


@dataclass(frozen=True)
class PoissonParams:
    intensity: float
    box: Rect
    padding: float = 0.0

    def __post_init__(self):
        if not self.intensity > 0:
            raise ValueError("intensity must be positive")
        if self.padding < 0:
            raise ValueError("padding must be nonnegative")


class EmbeddedGraph:
    """Planar graph with 2D vertex coordinates and unit edge weights.

    Vertices are indexed 0..n-1; adjacency is stored CSR-style with each
    neighbor run sorted.  Instances are immutable after construction.
    """

    __slots__ = ("xs", "ys", "indptr", "indices", "meta")

    def __init__(
        self,
        coords: np.ndarray,
        edges: np.ndarray | Sequence[tuple[int, int]],
        meta: dict | None = None,
        validate: bool = True,
    ):
        coords = np.asarray(coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValueError("coords must be an (n, 2) array")
        n = coords.shape[0]
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if validate and len(edges):
            if edges.min() < 0 or edges.max() >= n:
                raise ValueError("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise ValueError("self-loops are not allowed")
            canon = np.sort(edges, axis=1)
            if len(np.unique(canon, axis=0)) != len(canon):
                raise ValueError("duplicate edges are not allowed")
        both = np.concatenate([edges, edges[:, ::-1]]) if len(edges) else np.empty((0, 2), np.int64)
        order = np.lexsort((both[:, 1], both[:, 0]))
        both = both[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        if len(both):
            np.add.at(indptr, both[:, 0] + 1, 1)
        indptr = np.cumsum(indptr)
        xs = np.ascontiguousarray(coords[:, 0])
        ys = np.ascontiguousarray(coords[:, 1])
        for arr in (xs, ys, indptr, both):
            arr.setflags(write=False)
        self.xs = xs
        self.ys = ys
        self.indptr = indptr
        self.indices = np.ascontiguousarray(both[:, 1])
        self.indices.setflags(write=False)
        self.meta = dict(meta or {})

    # -- basic accessors -------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return self.xs.shape[0]

    @property
    def n_edges(self) -> int:
        return self.indices.shape[0] // 2

    def degree(self, v: int | None = None):
        if v is None:
            return np.diff(self.indptr)
        return int(self.indptr[v + 1] - self.indptr[v])

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]: self.indptr[v + 1]]

    def position(self, v: int) -> tuple[float, float]:
        return (float(self.xs[v]), float(self.ys[v]))

    def positions(self) -> np.ndarray:
        return np.column_stack([self.xs, self.ys])

    def edge_array(self) -> np.ndarray:
        """All edges as (m, 2) with u < v, lexicographically sorted."""
        u = np.repeat(np.arange(self.n_vertices), np.diff(self.indptr))
        v = self.indices
        mask = u < v
        return np.column_stack([u[mask], v[mask]])

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        i = np.searchsorted(nb, v)
        return i < len(nb) and nb[i] == v

    def vertices_in(self, rect: Rect) -> np.ndarray:
        """Ids of vertices whose position lies in the closed rectangle."""
        return np.nonzero(rect.contains(self.xs, self.ys))[0]

    def is_connected(self) -> bool:
        if self.n_vertices <= 1:
            return True
        ncomp, _ = connected_components(self._csr(), directed=False)
        return ncomp == 1

    def _csr(self) -> csr_matrix:
        data = np.ones(len(self.indices), dtype=np.int8)
        return csr_matrix(
            (data, self.indices, self.indptr), shape=(self.n_vertices, self.n_vertices)
        )

    def structurally_equal(self, other: "EmbeddedGraph") -> bool:
        return (
            self.n_vertices == other.n_vertices
            and np.array_equal(self.xs, other.xs)
            and np.array_equal(self.ys, other.ys)
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )

    def origin_vertex(self) -> int:
        """Vertex closest to the origin; ties by smallest (x, y, id)."""
        return self.nearest_vertex(0.0, 0.0)

    def nearest_vertex(self, x: float, y: float) -> int:
        d2 = (self.xs - x) ** 2 + (self.ys - y) ** 2
        best = np.nonzero(d2 == d2.min())[0]
        if len(best) == 1:
            return int(best[0])
        order = np.lexsort((best, self.ys[best], self.xs[best]))
        return int(best[order[0]])

    def translated(self, dx: float, dy: float) -> "EmbeddedGraph":
        coords = np.column_stack([self.xs + dx, self.ys + dy])
        return EmbeddedGraph(coords, self.edge_array(), meta=self.meta, validate=False)

    def rotated90(self) -> "EmbeddedGraph":
        """Rotate the embedding by +90 degrees about the origin."""
        coords = np.column_stack([-self.ys, self.xs])
        return EmbeddedGraph(coords, self.edge_array(), meta=self.meta, validate=False)


def _largest_component(coords, edges, keep_meta):
    """Restrict to the largest connected component, relabelling vertices."""
    n = coords.shape[0]
    if len(edges) == 0:
        raise SubcriticalSampleError("no edges in sample")
    data = np.ones(len(edges), dtype=np.int8)
    m = csr_matrix((data, (edges[:, 0], edges[:, 1])), shape=(n, n))
    ncomp, labels = connected_components(m, directed=False)
    sizes = np.bincount(labels, minlength=ncomp)
    big = int(np.argmax(sizes))
    keep = labels == big
    if sizes[big] < 2:
        raise SubcriticalSampleError(
            f"largest cluster has {sizes[big]} vertex; subcritical-like sample"
        )
    new_id = -np.ones(n, dtype=np.int64)
    new_id[keep] = np.arange(int(sizes[big]))
    emask = keep[edges[:, 0]] & keep[edges[:, 1]]
    new_edges = new_id[edges[emask]]
    meta = dict(keep_meta)
    meta["largest_cluster_fraction"] = float(sizes[big]) / n
    meta["n_components"] = int(ncomp)
    return EmbeddedGraph(coords[keep], new_edges, meta=meta, validate=False)


def generate_square_lattice(box: Rect, mesh: float) -> EmbeddedGraph:
    """Grid graph of mesh-spaced points in ``box`` with 4-neighbor adjacency."""
    if mesh <= 0:
        raise ValueError("mesh must be positive")
    if 2 * box.hx < mesh or 2 * box.hy < mesh:
        raise ValueError("box dimensions must be at least one mesh step")
    nx = int(math.floor(2 * box.hx / mesh + 1e-9)) + 1
    ny = int(math.floor(2 * box.hy / mesh + 1e-9)) + 1
    x0, y0 = box.cx - box.hx, box.cy - box.hy
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    coords = np.column_stack([(x0 + ii.ravel() * mesh), (y0 + jj.ravel() * mesh)])
    idx = np.arange(nx * ny).reshape(nx, ny)
    right = np.column_stack([idx[:-1, :].ravel(), idx[1:, :].ravel()])
    up = np.column_stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()])
    edges = np.concatenate([right, up])
    meta = {"env": "lattice", "mesh": mesh, "nx": nx, "ny": ny}
    return EmbeddedGraph(coords, edges, meta=meta, validate=False)


def generate_percolation_cluster(params: PercolationParams, seed: int) -> EmbeddedGraph:
    """Largest open cluster of Bernoulli bond percolation on a box of Z^2.

    The box is the square of half-width ``params.n`` centered at the origin.
    The returned graph is the subgraph induced by open edges restricted to
    its largest connected component, a finite-volume surrogate for the
    infinite cluster.
    """
    n = params.n
    w = 2 * n + 1
    gen = rnglib.generator(seed, 0)
    ii, jj = np.meshgrid(np.arange(w), np.arange(w), indexing="ij")
    coords = np.column_stack([ii.ravel() - n, jj.ravel() - n]).astype(np.float64)
    idx = np.arange(w * w).reshape(w, w)
    right = np.column_stack([idx[:-1, :].ravel(), idx[1:, :].ravel()])
    up = np.column_stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()])
    all_edges = np.concatenate([right, up])
    open_mask = gen.random(len(all_edges)) < params.p
    edges = all_edges[open_mask]
    if len(edges) == 0:
        raise SubcriticalSampleError("no open edges; subcritical-like sample")
    meta = {
        "env": "percolation",
        "p": params.p,
        "n": n,
        "seed": int(seed),
        "open_edges": int(open_mask.sum()),
    }
    return _largest_component(coords, edges, meta)


# -- Delaunay triangulation ---------------------------------------------

def _circumcircle(p1, p2, p3):
    """Circumcenter and squared radius; None for collinear triples."""
    ax, ay = p1
    bx, by = p2
    cx, cy = p3
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0.0:
        return None
    a2 = ax * ax + ay * ay
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
    uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
    r2 = (ax - ux) ** 2 + (ay - uy) ** 2
    return ux, uy, r2


def _incircle_exact(pa, pb, pc, pd) -> int:
    """Sign of the incircle determinant, exact over rationals.

    Positive iff pd lies strictly inside the circumcircle of the
    counterclockwise triangle (pa, pb, pc).
    """
    ax, ay, bx, by, cx, cy, dx, dy = (
        Fraction(v) for v in (*pa, *pb, *pc, *pd)
    )
    adx, ady = ax - dx, ay - dy
    bdx, bdy = bx - dx, by - dy
    cdx, cdy = cx - dx, cy - dy
    det = (
        (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
        - (bdx * bdx + bdy * bdy) * (adx * cdy - cdx * ady)
        + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady)
    )
    return (det > 0) - (det < 0)


def _orient(pa, pb, pc) -> float:
    return (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0])


class _Triangulator:
    """Incremental insertion with a bucketed conflict scan.

    Conflict = the new point lies strictly inside a triangle's circumdisk.
    Candidate triangles are found through a uniform bucket grid over
    circumcenters (disks wider than the bucket pitch live in an overflow
    list), so each insertion touches a near-constant number of triangles.
    Near-ties fall back to the exact rational incircle predicate; exact
    cocircularity counts as *outside*, which realizes a deterministic
    symbolic perturbation (later points are pushed infinitesimally out).
    """

    def __init__(self, pts: np.ndarray):
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        c = (lo + hi) / 2.0
        span = max(hi[0] - lo[0], hi[1] - lo[1], 1.0)
        big = 16.0 * span
        self.n_real = len(pts)
        self.all_pts = np.concatenate(
            [
                pts,
                np.array(
                    [
                        [c[0] - 3 * big, c[1] - big],
                        [c[0] + 3 * big, c[1] - big],
                        [c[0], c[1] + 3 * big],
                    ]
                ),
            ]
        )
        cap = 16
        self.tri = np.zeros((cap, 3), dtype=np.int64)
        self.alive = np.zeros(cap, dtype=bool)
        self.ccx = np.zeros(cap)
        self.ccy = np.zeros(cap)
        self.r2 = np.full(cap, -1.0)
        self.n_tri = 0
        # bucket pitch tracks the current point spacing (rebuilt on a
        # doubling schedule); disks wider than 2 buckets go to overflow
        self.span = span
        self.h = span
        self.buckets: dict[tuple[int, int], list[int]] = {}
        self.overflow: list[int] = []
        self.n_stored = 0
        self.n_alive = 0
        self.next_rebuild = 8
        s = self.n_real
        self._push(s, s + 1, s + 2)

    def _grow(self):
        cap = len(self.alive) * 2
        for name in ("tri", "alive", "ccx", "ccy", "r2"):
            old = getattr(self, name)
            new = np.zeros((cap,) + old.shape[1:], dtype=old.dtype)
            new[: len(old)] = old
            setattr(self, name, new)

    def _push(self, a, b, c):
        P = self.all_pts
        if _orient(P[a], P[b], P[c]) < 0:
            a, b = b, a
        cc = _circumcircle(P[a], P[b], P[c])
        if cc is None:
            return  # collinear sliver: zero-area, never in conflict
        if self.n_tri == len(self.alive):
            self._grow()
        t = self.n_tri
        self.n_tri += 1
        self.tri[t] = (a, b, c)
        self.alive[t] = True
        self.n_alive += 1
        self.ccx[t], self.ccy[t], self.r2[t] = cc
        self._bin(t)

    def _bin(self, t: int):
        if self.r2[t] > (2.0 * self.h) ** 2:
            self.overflow.append(t)
        else:
            key = (int(math.floor(self.ccx[t] / self.h)), int(math.floor(self.ccy[t] / self.h)))
            self.buckets.setdefault(key, []).append(t)
        self.n_stored += 1

    def _rebuild_index(self, n_inserted: int):
        """Re-bin alive triangles at the pitch matching current density."""
        self.h = max(self.span / math.sqrt(max(n_inserted, 4)), 1e-12)
        self.buckets = {}
        self.overflow = []
        self.n_stored = 0
        for t in np.nonzero(self.alive[: self.n_tri])[0]:
            self._bin(int(t))

    def _candidates(self, px, py) -> np.ndarray:
        ix = int(math.floor(px / self.h))
        iy = int(math.floor(py / self.h))
        cand = list(self.overflow)
        for dx in range(-3, 4):
            for dy in range(-3, 4):
                cand.extend(self.buckets.get((ix + dx, iy + dy), ()))
        return np.asarray(cand, dtype=np.int64)

    def insert_all(self):
        P = self.all_pts
        for p_idx in range(self.n_real):
            if p_idx >= self.next_rebuild or self.n_stored > 4 * self.n_alive + 64:
                self._rebuild_index(max(p_idx, 1))
                self.next_rebuild = max(2 * p_idx, 8)
            px, py = P[p_idx]
            cand = self._candidates(px, py)
            cand = cand[self.alive[cand]]
            d2 = (self.ccx[cand] - px) ** 2 + (self.ccy[cand] - py) ** 2
            margin = d2 - self.r2[cand]
            scale = np.maximum(self.r2[cand], 1.0) * 1e-9
            conflict = margin < -scale
            near = ~conflict & (margin <= scale)
            for k in np.nonzero(near)[0]:
                a, b, c = self.tri[cand[k]]
                if _incircle_exact(P[a], P[b], P[c], (px, py)) > 0:
                    conflict[k] = True
            bad = cand[conflict]
            if len(bad) == 0:
                continue  # exact duplicate of an existing vertex
            # cavity boundary: edges of bad triangles not shared by two bad ones
            edge_once: dict[tuple[int, int], tuple[int, int] | None] = {}
            for t in bad:
                a, b, c = self.tri[t]
                for u, v in ((a, b), (b, c), (c, a)):
                    key = (u, v) if u < v else (v, u)
                    edge_once[key] = None if key in edge_once else (int(u), int(v))
                self.alive[t] = False
                self.n_alive -= 1
            for oriented in edge_once.values():
                if oriented is not None:
                    self._push(oriented[0], oriented[1], p_idx)

    def triangles(self) -> list[tuple[int, int, int]]:
        out = []
        for t in range(self.n_tri):
            if not self.alive[t]:
                continue
            a, b, c = self.tri[t]
            if a >= self.n_real or b >= self.n_real or c >= self.n_real:
                continue
            out.append(tuple(sorted((int(a), int(b), int(c)))))
        return sorted(out)


def delaunay_triangles(pts: np.ndarray) -> list[tuple[int, int, int]]:
    """Delaunay triangles (sorted index triples) of a point set."""
    pts = np.asarray(pts, dtype=np.float64)
    if len(pts) < 3:
        raise DegeneratePointSetError(f"need >= 3 points, got {len(pts)}")
    # exact duplicates break the cavity step; keep first occurrence
    _, uniq_idx = np.unique(pts, axis=0, return_index=True)
    if len(uniq_idx) < 3:
        raise DegeneratePointSetError("fewer than 3 distinct points")
    tr = _Triangulator(pts)
    tr.insert_all()
    return tr.triangles()


def generate_poisson_delaunay(params: PoissonParams, seed: int) -> EmbeddedGraph:
    """Delaunay triangulation of a Poisson sample, clipped to the inner box.

    Points are sampled on the padded box; the triangulation is computed on
    all of them and then restricted to vertices inside ``params.box`` (an
    edge is kept iff both endpoints are inside).  Triangles with all three
    corners inside are recorded in ``meta["triangles"]``.
    """
    box, pad, lam = params.box, params.padding, params.intensity
    padded = box.padded(pad)
    if lam * padded.area < 3:
        raise ValueError("expected point count below 3; enlarge box or intensity")
    gen = rnglib.generator(seed, 0)
    n_pts = int(gen.poisson(lam * padded.area))
    if n_pts < 3:
        raise DegeneratePointSetError(f"sampled {n_pts} points; degenerate point set")
    xmin, xmax, ymin, ymax = padded.bounds
    pts = np.column_stack(
        [gen.uniform(xmin, xmax, n_pts), gen.uniform(ymin, ymax, n_pts)]
    )
    tris = delaunay_triangles(pts)
    inner = box.contains(pts[:, 0], pts[:, 1])
    if inner.sum() < 2:
        raise DegeneratePointSetError("fewer than 2 points in the inner box")
    new_id = -np.ones(n_pts, dtype=np.int64)
    new_id[inner] = np.arange(int(inner.sum()))
    edges = set()
    kept_tris = []
    for a, b, c in tris:
        for u, v in ((a, b), (b, c), (a, c)):
            if inner[u] and inner[v]:
                edges.add((min(u, v), max(u, v)))
        if inner[a] and inner[b] and inner[c]:
            kept_tris.append((int(new_id[a]), int(new_id[b]), int(new_id[c])))
    edges = np.array(sorted(edges), dtype=np.int64).reshape(-1, 2)
    meta = {
        "env": "delaunay",
        "intensity": lam,
        "padding": pad,
        "seed": int(seed),
        "n_sampled": n_pts,
        "n_inner": int(inner.sum()),
    }
    g = _largest_component(pts[inner], new_id[edges], meta)
    if g.meta["n_components"] > 1:
        # clipping can strand isolated corners; rebuild the triangle list
        old_of_new = np.nonzero(inner)[0]
        pos = {(float(pts[o, 0]), float(pts[o, 1])): None for o in old_of_new}
        keep_pos = {(float(g.xs[i]), float(g.ys[i])): i for i in range(g.n_vertices)}
        remap = {}
        for o in old_of_new:
            key = (float(pts[o, 0]), float(pts[o, 1]))
            if key in keep_pos:
                remap[int(new_id[o])] = keep_pos[key]
        kept_tris = [
            tuple(sorted(remap[i] for i in t))
            for t in kept_tris
            if all(i in remap for i in t)
        ]
        del pos
    g.meta["triangles"] = sorted(kept_tris)
    return g


# -- coarse red-box fields ----------------------------------------------

@dataclass
class CoarseField:
    """Red/A-red classification of overlapping side-2s boxes on the s-grid.

    ``red[i, j]`` refers to the box of half-width ``s`` centered at
    ``(origin + (i, j)) * s``; boxes of adjacent grid points overlap.
    """

    s: float
    A: float
    origin: tuple[int, int]          # grid index of red[0, 0] in s*Z^2
    red: np.ndarray                  # bool (nx, ny)
    a_red: np.ndarray                # bool (nx, ny)
    red_density: float
    far_correlation: float           # empirical correlation at grid distance 3

    @property
    def shape(self) -> tuple[int, int]:
        return self.red.shape

    def cell_center(self, i: int, j: int) -> tuple[float, float]:
        return ((self.origin[0] + i) * self.s, (self.origin[1] + j) * self.s)

    def cell_box(self, i: int, j: int) -> Rect:
        cx, cy = self.cell_center(i, j)
        return Rect(cx, cy, self.s, self.s)


def _grid_range(lo: float, hi: float, s: float) -> tuple[int, int]:
    """Indices i such that the box [is - s, is + s] meets [lo, hi]."""
    i0 = int(math.ceil((lo - s) / s - 1e-12))
    i1 = int(math.floor((hi + s) / s + 1e-12))
    return i0, i1


def coarse_grain_red_boxes(
    points: np.ndarray,
    s: float,
    A: float = math.inf,
    extent: Rect | None = None,
) -> CoarseField:
    """Classify every grid box meeting the point set's bounding box.

    A box is red iff each of its 400 sub-boxes of side s/10 holds at least
    one point, and A-red iff each holds at most ``A * s**2`` points as well.
    """
    if s <= 0:
        raise ValueError("cell size s must be positive")
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if extent is None:
        if len(points) == 0:
            return CoarseField(s, A, (0, 0), np.zeros((0, 0), bool), np.zeros((0, 0), bool), 0.0, 0.0)
        extent = Rect(
            (points[:, 0].min() + points[:, 0].max()) / 2,
            (points[:, 1].min() + points[:, 1].max()) / 2,
            max((points[:, 0].max() - points[:, 0].min()) / 2, s / 2),
            max((points[:, 1].max() - points[:, 1].min()) / 2, s / 2),
        )
    xmin, xmax, ymin, ymax = extent.bounds
    i0, i1 = _grid_range(xmin, xmax, s)
    j0, j1 = _grid_range(ymin, ymax, s)
    nx, ny = i1 - i0 + 1, j1 - j0 + 1
    # fine histogram at pitch s/10 covering all boxes: box i spans fine
    # columns 10*(i-1) .. 10*(i+1)-1 relative to fine index 10*i0 - 10
    fine = s / 10.0
    fx0 = 10 * (i0 - 1)
    fy0 = 10 * (j0 - 1)
    fnx = 10 * (i1 + 1) - fx0
    fny = 10 * (j1 + 1) - fy0
    counts = np.zeros((fnx, fny), dtype=np.int64)
    if len(points):
        fx = np.floor(points[:, 0] / fine).astype(np.int64) - fx0
        fy = np.floor(points[:, 1] / fine).astype(np.int64) - fy0
        ok = (fx >= 0) & (fx < fnx) & (fy >= 0) & (fy < fny)
        np.add.at(counts, (fx[ok], fy[ok]), 1)
    cap = A * s * s
    red = np.zeros((nx, ny), dtype=bool)
    a_red = np.zeros((nx, ny), dtype=bool)
    for di in range(nx):
        u = 10 * (i0 + di - 1) - fx0
        for dj in range(ny):
            v = 10 * (j0 + dj - 1) - fy0
            w = counts[u: u + 20, v: v + 20]
            lo = w.min()
            red[di, dj] = lo >= 1
            a_red[di, dj] = lo >= 1 and w.max() <= cap
    density = float(red.mean()) if red.size else 0.0
    corr = _far_correlation(red)
    return CoarseField(s, float(A), (i0, j0), red, a_red, density, corr)


def _far_correlation(red: np.ndarray) -> float:
    """Mean empirical correlation of the red field at L1 grid distance 3."""
    if red.size == 0:
        return 0.0
    x = red.astype(np.float64)
    n0, n1 = x.shape
    cors = []
    for dx, dy in ((3, 0), (0, 3), (2, 1), (1, 2)):
        if n0 <= dx or n1 <= dy:
            continue
        a = x[: n0 - dx, : n1 - dy]
        b = x[dx:, dy:]
        if a.size < 2:
            continue
        sa, sb = a.std(), b.std()
        if sa == 0 or sb == 0:
            cors.append(0.0)
        else:
            cors.append(float(((a - a.mean()) * (b - b.mean())).mean() / (sa * sb)))
    return float(np.mean(cors)) if cors else 0.0


# -- serialization -------------------------------------------------------

def serialize_graph(g: EmbeddedGraph) -> bytes:
    """JSON-compatible text encoding; edges listed u < v, sorted."""
    obj = {
        "vertices": [
            {"id": int(i), "x": float(g.xs[i]), "y": float(g.ys[i])}
            for i in range(g.n_vertices)
        ],
        "edges": [[int(u), int(v)] for u, v in g.edge_array()],
    }
    return (json.dumps(obj, separators=(",", ":")) + "\n").encode()


def parse_graph(data: bytes | str) -> EmbeddedGraph:
    """Inverse of :func:`serialize_graph`; raises GraphFormatError with a
    line/field location on malformed input."""
    if isinstance(data, bytes):
        data = data.decode()
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as e:
        raise GraphFormatError(f"line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(obj, dict):
        raise GraphFormatError("top level: expected object")
    for key in ("vertices", "edges"):
        if key not in obj or not isinstance(obj[key], list):
            raise GraphFormatError(f"field '{key}': missing or not a list")
    n = len(obj["vertices"])
    coords = np.zeros((n, 2))
    seen = set()
    for k, rec in enumerate(obj["vertices"]):
        if not isinstance(rec, dict) or not {"id", "x", "y"} <= set(rec):
            raise GraphFormatError(f"vertices[{k}]: expected object with id, x, y")
        i = rec["id"]
        if not isinstance(i, int) or not (0 <= i < n):
            raise GraphFormatError(f"vertices[{k}].id: expected int in [0, {n})")
        if i in seen:
            raise GraphFormatError(f"vertices[{k}].id: duplicate id {i}")
        seen.add(i)
        try:
            coords[i] = (float(rec["x"]), float(rec["y"]))
        except (TypeError, ValueError):
            raise GraphFormatError(f"vertices[{k}]: x, y must be numbers") from None
    edges = []
    for k, e in enumerate(obj["edges"]):
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(t, int) for t in e)):
            raise GraphFormatError(f"edges[{k}]: expected [u, v] ints")
        u, v = e
        if not (0 <= u < n and 0 <= v < n):
            raise GraphFormatError(f"edges[{k}]: endpoint out of range")
        if u == v:
            raise GraphFormatError(f"edges[{k}]: self-loop")
        edges.append((u, v))
    try:
        return EmbeddedGraph(coords, np.array(edges, dtype=np.int64).reshape(-1, 2))
    except ValueError as e:
        raise GraphFormatError(str(e)) from None
