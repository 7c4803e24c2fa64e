"""Deterministic geometric diagnostics on embedded graphs.

Everything here is exact given the graph: BFS balls, boundary counts, the
Euler identity for triangulation pieces, isoperimetric profiles (exhaustive
for small subsets, annealed above that), discrete Poincare constants, hole
structure of coarse fields, and path bounds through red boxes.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy import ndimage
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from rswlab.graphs import CoarseField, EmbeddedGraph, Rect
from rswlab.planar import rotation_system, trace_faces


class DisconnectedSetError(ValueError):
    """Operation requires a connected vertex set."""


class EnumerationModeError(ValueError):
    """Exhaustive enumeration requested beyond the supported size cap."""


class HypothesisNotMetError(ValueError):
    """Inputs do not satisfy the stated hypotheses; this is a refusal,
    not a counterexample."""


EXHAUSTIVE_CAP = 14


# ------------------------------------------------------------------ balls

@dataclass
class BallIndex:
    """Graph-distance ball: members with exact BFS distances."""

    center: int
    radius: int
    vertices: np.ndarray     # sorted member ids
    distances: np.ndarray    # distance per member, aligned with vertices

    def __contains__(self, v: int) -> bool:
        i = np.searchsorted(self.vertices, v)
        return i < len(self.vertices) and self.vertices[i] == v

    def distance(self, v: int) -> int:
        i = np.searchsorted(self.vertices, v)
        if i >= len(self.vertices) or self.vertices[i] != v:
            raise KeyError(v)
        return int(self.distances[i])

    @property
    def size(self) -> int:
        return len(self.vertices)


def bfs_distances(g: EmbeddedGraph, source: int, cap: int | None = None) -> np.ndarray:
    """BFS distances from ``source``; unreachable vertices get -1."""
    dist = np.full(g.n_vertices, -1, dtype=np.int64)
    dist[source] = 0
    frontier = [source]
    d = 0
    while frontier and (cap is None or d < cap):
        d += 1
        nxt = []
        for v in frontier:
            for w in g.neighbors(v):
                if dist[w] < 0:
                    dist[w] = d
                    nxt.append(int(w))
        frontier = nxt
    return dist


def graph_ball(g: EmbeddedGraph, center: int, r: int) -> BallIndex:
    """Ball of radius ``r`` around ``center`` with exact BFS distances."""
    if not (0 <= center < g.n_vertices):
        raise ValueError(f"center {center} not in graph")
    if r < 0:
        raise ValueError("radius must be nonnegative")
    dist = bfs_distances(g, center, cap=r)
    members = np.nonzero((dist >= 0) & (dist <= r))[0]
    return BallIndex(center, r, members, dist[members])


def ball_of_size(g: EmbeddedGraph, center: int, size: int) -> BallIndex:
    """Smallest ball around ``center`` trimmed to exactly ``size`` vertices.

    The last BFS shell is truncated in (distance, id) order, which keeps the
    result deterministic.
    """
    dist = bfs_distances(g, center)
    reach = np.nonzero(dist >= 0)[0]
    if len(reach) < size:
        raise ValueError(f"component has only {len(reach)} vertices")
    order = np.lexsort((reach, dist[reach]))
    chosen = reach[order][:size]
    chosen.sort()
    return BallIndex(center, int(dist[chosen].max()), chosen, dist[chosen])


# --------------------------------------------------------- inclusion check

@dataclass
class InclusionReport:
    holds: bool
    c_euc: float            # requested constant
    fitted_c: float         # smallest constant making both inclusions hold
    found: bool             # fitted constant exists below the cap


def inclusion_check(
    g: EmbeddedGraph, n: float, c_euc: float, cap: float = 64.0
) -> InclusionReport:
    """Check B(o, n/C) inside the square of half-width n inside B(o, Cn).

    ``o`` is the vertex nearest the origin (ties by smallest x, y, id); the
    first inclusion reads "every vertex at graph distance <= n/C lies in the
    square" and the second "every vertex in the square is at graph distance
    <= Cn".  Also fits the smallest constant for which both hold.
    """
    o = g.origin_vertex()
    dist = bfs_distances(g, o)
    in_sq = (np.abs(g.xs) <= n) & (np.abs(g.ys) <= n)
    # smallest C for the outer inclusion
    sq_d = dist[in_sq]
    if np.any(sq_d < 0):
        fitted_outer = math.inf
    else:
        fitted_outer = float(sq_d.max()) / n if len(sq_d) else 1.0
    # smallest C for the inner inclusion: need n/C < min distance outside
    outside_d = dist[~in_sq & (dist >= 0)]
    min_out = float(outside_d.min()) if len(outside_d) else math.inf
    fitted_inner = n / min_out if min_out > 0 else math.inf
    fitted = max(fitted_outer, fitted_inner, 1.0)
    if math.isinf(fitted_inner) and not math.isinf(fitted_outer):
        fitted = max(fitted_outer, 1.0)

    def holds_at(c: float) -> bool:
        if c < 1:
            return False
        ball_inner = (dist >= 0) & (dist <= n / c)
        if np.any(ball_inner & ~in_sq):
            return False
        return not np.any(in_sq & ((dist < 0) | (dist > c * n)))

    return InclusionReport(
        holds=holds_at(c_euc),
        c_euc=c_euc,
        fitted_c=fitted if fitted <= cap else math.inf,
        found=fitted <= cap,
    )


# -------------------------------------------------------- boundary report

@dataclass
class BoundaryReport:
    size: int
    vol_E: int               # sum of ambient-subgraph degrees over A
    boundary_E: int          # edges from A to ambient minus A
    boundary_V: int          # vertices of A with a neighbor outside A (full graph)
    boundary_int: int        # vertices of A with a neighbor in ambient minus A
    ratio: float             # boundary_E / vol_E
    n_edges: int             # edges induced by A
    perimeter: int | None    # outer-face walk length, when traceable
    n_triangle_faces: int | None
    simply_connected: bool | None
    euler_identity_holds: bool | None   # |E| == 3|A| - |P| - 3
    seventh_bound_holds: bool           # ratio >= boundary_int / (7 size)


def _induced_edge_count(g: EmbeddedGraph, mask: np.ndarray) -> int:
    total = 0
    for v in np.nonzero(mask)[0]:
        total += int(mask[g.neighbors(v)].sum())
    return total // 2


def _is_connected_subset(g: EmbeddedGraph, verts: np.ndarray) -> bool:
    if len(verts) == 0:
        return False
    member = np.zeros(g.n_vertices, dtype=bool)
    member[verts] = True
    seen = {int(verts[0])}
    stack = [int(verts[0])]
    while stack:
        v = stack.pop()
        for w in g.neighbors(v):
            w = int(w)
            if member[w] and w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(verts)


def boundary_report(
    g: EmbeddedGraph, ambient: np.ndarray | BallIndex, A: np.ndarray
) -> BoundaryReport:
    """All boundary cardinalities of ``A`` inside the ambient subgraph.

    When the subgraph induced by A is a simply connected piece of a
    triangulation (every bounded face a triangle), the Euler identity
    |E| = 3|A| - |P| - 3 is verified exactly.
    """
    amb = ambient.vertices if isinstance(ambient, BallIndex) else np.asarray(ambient)
    A = np.asarray(A, dtype=np.int64)
    amb_mask = np.zeros(g.n_vertices, dtype=bool)
    amb_mask[amb] = True
    a_mask = np.zeros(g.n_vertices, dtype=bool)
    a_mask[A] = True
    if np.any(a_mask & ~amb_mask):
        raise ValueError("A must be a subset of the ambient set")
    if not _is_connected_subset(g, A):
        raise DisconnectedSetError("A must induce a connected subgraph")

    vol_E = 0
    boundary_E = 0
    boundary_V = 0
    boundary_int = 0
    for v in A:
        nb = g.neighbors(v)
        in_amb = amb_mask[nb]
        in_a = a_mask[nb]
        vol_E += int(in_amb.sum())
        boundary_E += int((in_amb & ~in_a).sum())
        if np.any(~in_a):
            boundary_V += 1
        if np.any(in_amb & ~in_a):
            boundary_int += 1
    n_edges = _induced_edge_count(g, a_mask)

    perimeter = None
    n_tri = None
    simply = None
    euler = None
    if n_edges > 0:
        rot = rotation_system(g, a_mask)
        faces, outer = trace_faces(g, rot)
        perimeter = len(faces[outer])
        bounded = [f for i, f in enumerate(faces) if i != outer]
        n_tri = sum(1 for f in bounded if len(f) == 3)
        simply = all(len(f) == 3 for f in bounded)
        if simply:
            euler = n_edges == 3 * len(A) - perimeter - 3
    elif len(A) == 1:
        simply = True
        perimeter = 0
        n_tri = 0
        euler = None   # single vertex: no outer walk, identity degenerate

    ratio = boundary_E / vol_E if vol_E else math.inf
    seventh = ratio >= boundary_int / (7.0 * len(A)) - 1e-12
    return BoundaryReport(
        size=len(A),
        vol_E=vol_E,
        boundary_E=boundary_E,
        boundary_V=boundary_V,
        boundary_int=boundary_int,
        ratio=ratio,
        n_edges=n_edges,
        perimeter=perimeter,
        n_triangle_faces=n_tri,
        simply_connected=simply,
        euler_identity_holds=euler,
        seventh_bound_holds=seventh,
    )


# ----------------------------------------- connected-subset enumeration

def adjacency_masks(g: EmbeddedGraph, vertices: np.ndarray) -> tuple[list[int], dict]:
    """Bitmask adjacency of the subgraph induced by ``vertices``.

    Returns (masks, id_map) with local bit positions in sorted-id order.
    """
    vertices = np.sort(np.asarray(vertices, dtype=np.int64))
    id_map = {int(v): i for i, v in enumerate(vertices)}
    masks = [0] * len(vertices)
    for v, i in id_map.items():
        m = 0
        for w in g.neighbors(v):
            j = id_map.get(int(w))
            if j is not None:
                m |= 1 << j
        masks[i] = m
    return masks, id_map


def connected_subset_masks(neigh: list[int], max_size: int):
    """Yield every connected subset (as a bitmask) of size <= max_size once.

    Standard extension enumeration: subsets are rooted at their lowest
    vertex and grown using larger-indexed vertices only.
    """
    n = len(neigh)
    full = (1 << n) - 1

    def rec(S: int, ext: int, forb: int, size: int):
        yield S
        if size == max_size:
            return
        local_forb = forb
        e = ext
        while e:
            u = e & (-e)
            e ^= u
            ui = u.bit_length() - 1
            new_ext = e | (neigh[ui] & ~S & ~local_forb & above & ~u)
            yield from rec(S | u, new_ext, local_forb, size + 1)
            local_forb |= u

    for v in range(n):
        above = full & ~((1 << (v + 1)) - 1)
        yield from rec(1 << v, neigh[v] & above, 0, 1)


@dataclass
class IsoRow:
    size: int
    vol_E: int
    boundary_E: int
    boundary_V: int
    boundary_int: int
    ratio: float
    complement_connected: bool


@dataclass
class IsoReport:
    ball: BallIndex
    max_size: int
    mode: str                      # "exhaustive" or "anneal"
    n_enumerated: int
    half_vol: float                # |H|_E / 2 admissibility threshold
    iso_constant: float            # min ratio over admissible, complement connected
    iso_constant_any: float        # min ratio over admissible connected subsets
    minimizer: tuple[int, ...]     # vertex ids of the minimizing subset
    largest_c_i: float             # min of ratio * sqrt(vol_E)
    rows: list[IsoRow] = field(default_factory=list)
    keep_rows: bool = True


def isoperimetric_profile(
    g: EmbeddedGraph,
    ball: BallIndex,
    max_size: int,
    mode: str = "exhaustive",
    rng: np.random.Generator | None = None,
    keep_rows: bool = False,
    anneal_steps: int = 20_000,
) -> IsoReport:
    """Isoperimetric profile of the ball-induced subgraph.

    Exhaustive mode enumerates every connected subset of at most
    ``max_size`` vertices (cap 14) whose edge volume is at most half the
    subgraph's; the reported constant is the minimum boundary/volume ratio
    over subsets whose complement stays connected.  Annealed mode is a
    randomized local search and is labelled heuristic: it yields an upper
    bound on the constant only.
    """
    verts = ball.vertices
    neigh, id_map = adjacency_masks(g, verts)
    n = len(verts)
    deg = [m.bit_count() for m in neigh]
    total_vol = sum(deg)
    half_vol = total_vol / 2.0
    full = (1 << n) - 1
    local_ids = {i: int(v) for v, i in id_map.items()}

    best = math.inf
    best_any = math.inf
    best_mask = 0
    best_ci = math.inf
    rows: list[IsoRow] = []
    n_enum = 0

    def metrics(S: int):
        vol = 0
        bnd = 0
        bv = 0
        bi = 0
        T = S
        while T:
            u = T & (-T)
            T ^= u
            ui = u.bit_length() - 1
            vol += deg[ui]
            out = neigh[ui] & ~S
            k = out.bit_count()
            bnd += k
            if k:
                bv += 1
                bi += 1
        return vol, bnd, bv, bi

    def complement_connected(S: int) -> bool:
        comp = full & ~S
        if comp == 0:
            return False
        start = comp & (-comp)
        seen = start
        frontier = start
        while frontier:
            nxt = 0
            T = frontier
            while T:
                u = T & (-T)
                T ^= u
                nxt |= neigh[u.bit_length() - 1]
            nxt &= comp & ~seen
            seen |= nxt
            frontier = nxt
        return seen == comp

    if mode == "exhaustive":
        if max_size > EXHAUSTIVE_CAP:
            raise EnumerationModeError(
                f"exhaustive enumeration capped at {EXHAUSTIVE_CAP}; "
                "use mode='anneal' for larger subsets"
            )
        for S in connected_subset_masks(neigh, max_size):
            vol, bnd, bv, bi = metrics(S)
            if vol == 0 or vol > half_vol:
                continue
            n_enum += 1
            ratio = bnd / vol
            cc = complement_connected(S)
            if keep_rows:
                rows.append(IsoRow(S.bit_count(), vol, bnd, bv, bi, ratio, cc))
            if ratio < best_any:
                best_any = ratio
            if cc and ratio < best:
                best = ratio
                best_mask = S
            ci = ratio * math.sqrt(vol)
            if ci < best_ci:
                best_ci = ci
    elif mode == "anneal":
        if rng is None:
            raise ValueError("anneal mode needs an explicit rng")
        S = 1 << int(rng.integers(n))
        cur_ratio = math.inf
        for step in range(anneal_steps):
            temp = max(0.5 * (1 - step / anneal_steps), 1e-3)
            # propose: add a random neighbor or drop a random member
            members = [i for i in range(n) if (S >> i) & 1]
            border = 0
            for i in members:
                border |= neigh[i] & ~S
            add_opts = [i for i in range(n) if (border >> i) & 1]
            if add_opts and (len(members) < max_size) and (rng.random() < 0.6 or len(members) <= 1):
                cand = S | (1 << add_opts[int(rng.integers(len(add_opts)))])
            elif len(members) > 1:
                drop = members[int(rng.integers(len(members)))]
                cand = S & ~(1 << drop)
                if not _mask_connected(cand, neigh):
                    continue
            else:
                continue
            vol, bnd, bv, bi = metrics(cand)
            if vol == 0 or vol > half_vol:
                continue
            ratio = bnd / vol
            n_enum += 1
            if ratio <= cur_ratio or rng.random() < math.exp((cur_ratio - ratio) / temp):
                S, cur_ratio = cand, ratio
            if ratio < best_any:
                best_any = ratio
            if ratio < best and complement_connected(cand):
                best = ratio
                best_mask = cand
            ci = ratio * math.sqrt(vol)
            if ci < best_ci:
                best_ci = ci
            if keep_rows:
                rows.append(IsoRow(cand.bit_count(), vol, bnd, bv, bi, ratio,
                                   complement_connected(cand)))
    else:
        raise ValueError(f"unknown mode {mode!r}")

    minimizer = tuple(sorted(local_ids[i] for i in range(n) if (best_mask >> i) & 1))
    return IsoReport(
        ball=ball,
        max_size=max_size,
        mode=mode,
        n_enumerated=n_enum,
        half_vol=half_vol,
        iso_constant=best,
        iso_constant_any=best_any,
        minimizer=minimizer,
        largest_c_i=best_ci,
        rows=rows,
        keep_rows=keep_rows,
    )


def _mask_connected(S: int, neigh: list[int]) -> bool:
    if S == 0:
        return False
    start = S & (-S)
    seen = start
    frontier = start
    while frontier:
        nxt = 0
        T = frontier
        while T:
            u = T & (-T)
            T ^= u
            nxt |= neigh[u.bit_length() - 1]
        nxt &= S & ~seen
        seen |= nxt
        frontier = nxt
    return seen == S


@dataclass
class SweepReport:
    """Result of the exhaustive per-subset lemma sweep on a ball."""

    n_subsets: int
    n_simply_connected: int
    n_euler_checked: int
    n_containment_checked: int
    euler_violations: list[tuple[int, ...]]
    seventh_violations: list[tuple[int, ...]]
    containment_violations: list[tuple[int, ...]]

    @property
    def clean(self) -> bool:
        return not (
            self.euler_violations
            or self.seventh_violations
            or self.containment_violations
        )


def lemma_sweep(g: EmbeddedGraph, ball: BallIndex, max_size: int) -> SweepReport:
    """Exhaustively check the Euler identity, the 1/7 boundary bound, and
    the boundary containment lemma over every connected subset of the ball
    with at most ``max_size`` vertices.

    A compiled kernel enumerates subsets and flags suspects; every flag is
    re-verified here with the slow exact path (:func:`boundary_report` and
    a full-graph BFS) before being reported as a violation.
    """
    from rswlab._subsets import subset_sweep

    verts = ball.vertices
    n = len(verts)
    if n > 62:
        raise EnumerationModeError("sweep supports at most 62 ball vertices")
    neigh, id_map = adjacency_masks(g, verts)
    local_of = {int(v): i for i, v in enumerate(np.sort(verts))}
    ball_mask = np.zeros(g.n_vertices, dtype=bool)
    ball_mask[verts] = True
    ext_bdry = np.zeros(n, dtype=bool)
    for v, i in local_of.items():
        ext_bdry[i] = bool(np.any(~ball_mask[g.neighbors(v)]))
    # rotation of the ball-induced subgraph in local ids
    rot = rotation_system(g, ball_mask)
    sorted_verts = np.sort(verts)
    rot_lists = []
    for v in sorted_verts:
        rot_lists.append([local_of[int(w)] for w in rot[int(v)]])
    rot_ptr = np.zeros(n + 1, dtype=np.int64)
    for i, lst in enumerate(rot_lists):
        rot_ptr[i + 1] = rot_ptr[i] + len(lst)
    rot_flat = np.array(
        [w for lst in rot_lists for w in lst] or [0], dtype=np.int64
    )[: rot_ptr[-1]]
    pos_uv = -np.ones((n, n), dtype=np.int16)
    for v, lst in enumerate(rot_lists):
        for k, u in enumerate(lst):
            pos_uv[u, v] = k
    xs = g.xs[sorted_verts]
    ys = g.ys[sorted_verts]
    cross = xs[:, None] * ys[None, :] - xs[None, :] * ys[:, None]

    counts, flags = subset_sweep(
        np.array(neigh, dtype=np.int64),
        ext_bdry,
        rot_flat,
        rot_ptr,
        pos_uv,
        np.ascontiguousarray(cross),
        max_size,
    )

    euler_bad: list[tuple[int, ...]] = []
    seventh_bad: list[tuple[int, ...]] = []
    contain_bad: list[tuple[int, ...]] = []
    for cat, mask in flags:
        A = np.array(
            [int(sorted_verts[i]) for i in range(n) if (int(mask) >> i) & 1],
            dtype=np.int64,
        )
        rep = boundary_report(g, verts, A)
        if cat == 0:
            if rep.simply_connected and rep.euler_identity_holds is False:
                euler_bad.append(tuple(A))
        elif cat == 1:
            if not rep.seventh_bound_holds:
                seventh_bad.append(tuple(A))
        else:
            d = diameter_checks(g, A, ambient_ball=ball)
            if d.containment_hypothesis_met and d.containment_holds is False:
                contain_bad.append(tuple(A))
    return SweepReport(
        n_subsets=int(counts[0]),
        n_simply_connected=int(counts[1]),
        n_euler_checked=int(counts[2]),
        n_containment_checked=int(counts[3]),
        euler_violations=euler_bad,
        seventh_violations=seventh_bad,
        containment_violations=contain_bad,
    )


def iso_report_csv(report: IsoReport) -> str:
    """CSV dump, one row per enumerated subset."""
    lines = ["size,vol_E,boundary_E,boundary_V,boundary_int,ratio"]
    for r in report.rows:
        lines.append(
            f"{r.size},{r.vol_E},{r.boundary_E},{r.boundary_V},{r.boundary_int},{r.ratio:.10g}"
        )
    return "\n".join(lines) + "\n"


# -------------------------------------------------------------- Poincare

@dataclass
class PoincareReport:
    kappa: float             # optimal constant: variance <= kappa * energy
    lambda2: float           # smallest nonzero generalized eigenvalue
    residual: float
    ratio_c: float | None    # kappa * I_H**2 when an iso constant is supplied


def poincare_constant(
    g: EmbeddedGraph, ball: BallIndex, iso_constant: float | None = None
) -> PoincareReport:
    """Optimal weak-Poincare constant of the ball-induced subgraph.

    kappa = max over nonconstant f of
        sum_v (f(v) - fbar)^2 deg(v) / sum_e (grad f)^2
    computed as 1/lambda_2 of the degree-weighted generalized eigenproblem
    L f = lambda D f on the induced subgraph.
    """
    verts = ball.vertices
    n = len(verts)
    if n < 2:
        raise ValueError("ball must contain at least two vertices")
    if n > 2000:
        raise ValueError("ball too large for the dense eigensolver (cap 2000)")
    if not _is_connected_subset(g, verts):
        raise DisconnectedSetError("ball does not induce a connected subgraph")
    idx = {int(v): i for i, v in enumerate(verts)}
    L = np.zeros((n, n))
    for v in verts:
        i = idx[int(v)]
        for w in g.neighbors(v):
            j = idx.get(int(w))
            if j is not None:
                L[i, i] += 1.0
                L[i, j] -= 1.0
    D = np.diag(np.diag(L))
    if np.any(np.diag(L) <= 0):
        raise DisconnectedSetError("isolated vertex in induced subgraph")
    w, vecs = scipy.linalg.eigh(L, D)
    lam2 = float(w[1])
    if lam2 <= 1e-13:
        raise DisconnectedSetError("zero spectral gap: subgraph disconnected")
    f = vecs[:, 1]
    residual = float(np.max(np.abs(L @ f - lam2 * (D @ f))))
    if residual > 1e-8:
        raise RuntimeError(f"eigen-solve residual too large: {residual:.3e}")
    kappa = 1.0 / lam2
    ratio = kappa * iso_constant**2 if iso_constant is not None else None
    return PoincareReport(kappa=kappa, lambda2=lam2, residual=residual, ratio_c=ratio)


def poincare_quotient(g: EmbeddedGraph, ball: BallIndex, f: dict[int, float]) -> tuple[float, float]:
    """(variance term, energy term) of an explicit test function on the ball."""
    verts = ball.vertices
    vals = np.array([f[int(v)] for v in verts])
    member = {int(v): i for i, v in enumerate(verts)}
    deg = np.zeros(len(verts))
    energy = 0.0
    for v in verts:
        i = member[int(v)]
        for w in g.neighbors(v):
            j = member.get(int(w))
            if j is not None:
                deg[i] += 1
                if j > i:
                    energy += (vals[i] - vals[j]) ** 2
    fbar = float((vals * deg).sum() / deg.sum())
    variance = float(((vals - fbar) ** 2 * deg).sum())
    return variance, energy


# ------------------------------------------------------------------ holes

@dataclass
class HoleReport:
    n_cells: int
    n_open: int
    cluster_size: int            # largest 4-connected open cluster
    chemical_diameter: int
    hole_sizes: list[int]        # *-connected closed components, descending
    max_hole: int
    proximity: int               # max Chebyshev distance of a cell to the cluster
    diam_lower_ok: bool          # chemical diameter >= n/2
    diam_upper_ok: bool          # chemical diameter <= C n
    proximity_ok: bool           # every cell within k of the cluster
    hole_size_ok: bool           # max hole size <= k^2
    n: int
    k: int
    C: float

    @property
    def event_holds(self) -> bool:
        return (
            self.diam_lower_ok
            and self.diam_upper_ok
            and self.proximity_ok
            and self.hole_size_ok
        )


def _chemical_diameter(open_mask: np.ndarray) -> int:
    """Exact graph diameter of the largest 4-connected open cluster."""
    lab, nlab = ndimage.label(open_mask, structure=[[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    if nlab == 0:
        return -1
    sizes = ndimage.sum_labels(np.ones_like(lab), lab, index=range(1, nlab + 1))
    big = 1 + int(np.argmax(sizes))
    cells = np.argwhere(lab == big)
    m = len(cells)
    if m == 1:
        return 0
    index = -np.ones(open_mask.shape, dtype=np.int64)
    index[cells[:, 0], cells[:, 1]] = np.arange(m)
    rows = []
    cols = []
    for di, dj in ((1, 0), (0, 1)):
        a = cells[:, 0] + di
        b = cells[:, 1] + dj
        ok = (a < open_mask.shape[0]) & (b < open_mask.shape[1])
        ok[ok] &= index[a[ok], b[ok]] >= 0
        rows.extend(np.arange(m)[ok])
        cols.extend(index[a[ok], b[ok]])
    adj = csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(m, m)
    )
    adj = adj + adj.T
    diam = 0
    chunk = 512
    for start in range(0, m, chunk):
        d = dijkstra(adj, indices=np.arange(start, min(start + chunk, m)), unweighted=True)
        finite = d[np.isfinite(d)]
        if len(finite):
            diam = max(diam, int(finite.max()))
    return diam


def hole_analysis(field: CoarseField, box: Rect, k: int, C: float = 10.0) -> HoleReport:
    """Hole structure and the three-bullet event verdict on a coarse field.

    Works on the subgrid of cells whose centers lie in ``box``; holes are
    maximal *-connected (8-neighbor) components of closed cells, the open
    cluster is 4-connected, and chemical distances are exact BFS distances
    on the cell grid.
    """
    if field.red.size == 0:
        raise ValueError("empty field")
    i0, j0 = field.origin
    nx, ny = field.shape
    ii = (np.arange(nx) + i0) * field.s
    jj = (np.arange(ny) + j0) * field.s
    sel_i = np.abs(ii - box.cx) <= box.hx + 1e-9
    sel_j = np.abs(jj - box.cy) <= box.hy + 1e-9
    if not sel_i.any() or not sel_j.any():
        raise ValueError("field does not cover the requested box")
    red = field.red[np.ix_(sel_i, sel_j)]
    n = int(max(red.shape) // 2)

    closed = ~red
    lab8, n8 = ndimage.label(closed, structure=np.ones((3, 3), dtype=int))
    hole_sizes = sorted(
        (int(s) for s in ndimage.sum_labels(np.ones_like(lab8), lab8, range(1, n8 + 1))),
        reverse=True,
    )
    max_hole = hole_sizes[0] if hole_sizes else 0

    lab4, n4 = ndimage.label(red, structure=[[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    if n4 == 0:
        cluster_size = 0
        diam = -1
        proximity = max(red.shape)
    else:
        sizes4 = ndimage.sum_labels(np.ones_like(lab4), lab4, range(1, n4 + 1))
        big = 1 + int(np.argmax(sizes4))
        cluster_size = int(sizes4[big - 1])
        diam = _chemical_diameter(red)
        dt = ndimage.distance_transform_cdt(lab4 != big, metric="chessboard")
        proximity = int(dt.max())

    return HoleReport(
        n_cells=int(red.size),
        n_open=int(red.sum()),
        cluster_size=cluster_size,
        chemical_diameter=diam,
        hole_sizes=hole_sizes,
        max_hole=max_hole,
        proximity=proximity,
        diam_lower_ok=diam >= n / 2,
        diam_upper_ok=0 <= diam <= C * n,
        proximity_ok=proximity <= k,
        hole_size_ok=max_hole <= k * k,
        n=n,
        k=k,
        C=C,
    )


def hole_report_csv(report: HoleReport) -> str:
    """CSV dump, one row per hole on the 4-adjacency cell graph.

    vol_E counts cell-graph degrees inside the hole, boundary columns count
    cell-graph contacts with the complement.
    """
    lines = ["size,vol_E,boundary_E,boundary_V,boundary_int,ratio"]
    for size in report.hole_sizes:
        # per-hole graph metrics on the square-grid cell graph are not
        # retained; the canonical columns carry size with grid-degree volume
        vol = 4 * size
        lines.append(f"{size},{vol},,,,")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------- diameter checks

@dataclass
class DiameterReport:
    graph_diameter: int
    euclidean_diameter: float
    containment_hypothesis_met: bool
    containment_holds: bool | None    # A inside B(v, 2|boundary_int|) for all v


def diameter_checks(
    g: EmbeddedGraph, A: np.ndarray, ambient_ball: BallIndex | None = None
) -> DiameterReport:
    """Graph and Euclidean diameters of A, plus the boundary containment check.

    The containment verdict applies when A sits in an ambient ball whose
    boundary it touches with a connected vertex boundary: then every
    interior-boundary vertex v must satisfy A inside B(v, 2k) with
    k = |interior boundary|.
    """
    A = np.asarray(A, dtype=np.int64)
    if not _is_connected_subset(g, A):
        raise DisconnectedSetError("A must induce a connected subgraph")
    a_mask = np.zeros(g.n_vertices, dtype=bool)
    a_mask[A] = True

    gdiam = 0
    member = {int(v): i for i, v in enumerate(A)}
    for v in A:
        dist = {int(v): 0}
        q = deque([int(v)])
        while q:
            u = q.popleft()
            for w in g.neighbors(u):
                w = int(w)
                if a_mask[w] and w not in dist:
                    dist[w] = dist[u] + 1
                    q.append(w)
        gdiam = max(gdiam, max(dist.values()))
    dx = g.xs[A][:, None] - g.xs[A][None, :]
    dy = g.ys[A][:, None] - g.ys[A][None, :]
    ediam = float(np.sqrt(dx * dx + dy * dy).max()) if len(A) > 1 else 0.0

    hyp = False
    holds = None
    if ambient_ball is not None:
        ball_mask = np.zeros(g.n_vertices, dtype=bool)
        ball_mask[ambient_ball.vertices] = True
        if np.any(a_mask & ~ball_mask):
            raise ValueError("A must lie inside the ambient ball")
        bdry_v = [int(v) for v in A if np.any(~a_mask[g.neighbors(v)])]
        bdry_int = [int(v) for v in bdry_v if np.any(ball_mask[g.neighbors(v)] & ~a_mask[g.neighbors(v)])]
        ball_bdry = {
            int(v)
            for v in ambient_ball.vertices
            if np.any(~ball_mask[g.neighbors(v)])
        }
        touches = any(v in ball_bdry for v in bdry_v)
        connected_bdry = len(bdry_v) > 0 and _is_connected_subset(
            g, np.asarray(bdry_v, dtype=np.int64)
        )
        hyp = touches and connected_bdry and len(bdry_int) > 0
        if hyp:
            kk = 2 * len(bdry_int)
            holds = True
            for v in bdry_int:
                dist = bfs_distances(g, v, cap=kk)
                if np.any(a_mask & (dist < 0)):
                    holds = False
                    break
    return DiameterReport(
        graph_diameter=gdiam,
        euclidean_diameter=ediam,
        containment_hypothesis_met=hyp,
        containment_holds=holds,
    )


# ------------------------------------------------------- red path bound

@dataclass
class RedPathReport:
    path: list[int] | None
    cap: float                    # 800 A s^2
    within_cap: bool | None
    endpoints: tuple[int, int] | None


def red_path_bound(
    field: CoarseField,
    g: EmbeddedGraph,
    cell1: tuple[int, int],
    cell2: tuple[int, int],
) -> RedPathReport:
    """Path between points of two adjacent A-red cells, inside their union.

    Endpoints are graph vertices taken from the central sub-box of each
    cell (at least s/4 from the union-rectangle boundary); the path stays
    inside the union rectangle and its vertex count is checked against the
    cap 800 A s^2.  Unmet hypotheses raise, they are never reported as
    counterexamples.
    """
    if math.isinf(field.A):
        raise HypothesisNotMetError("cap requires a finite A")
    (i1, j1), (i2, j2) = cell1, cell2
    if abs(i1 - i2) + abs(j1 - j2) != 1:
        raise HypothesisNotMetError("cells must be adjacent in the s-grid")
    i0, j0 = field.origin
    for (i, j) in (cell1, cell2):
        a, b = i - i0, j - j0
        if not (0 <= a < field.shape[0] and 0 <= b < field.shape[1]):
            raise HypothesisNotMetError(f"cell {(i, j)} outside the field")
        if not field.a_red[a, b]:
            raise HypothesisNotMetError(f"cell {(i, j)} is not A-red")
    s = field.s
    c1 = (i1 * s, j1 * s)
    c2 = (i2 * s, j2 * s)
    union = Rect(
        (c1[0] + c2[0]) / 2.0,
        (c1[1] + c2[1]) / 2.0,
        abs(c1[0] - c2[0]) / 2.0 + s,
        abs(c1[1] - c2[1]) / 2.0 + s,
    )
    cap = 800.0 * field.A * s * s

    def central_vertex(cc):
        # central sub-box [cc - s/20, cc + s/20]^2 is >= s/4 from the union edge
        sub = Rect(cc[0], cc[1], s / 20.0, s / 20.0)
        ids = g.vertices_in(sub)
        if len(ids) == 0:
            raise HypothesisNotMetError(
                f"no graph vertex in the central sub-box at {cc}"
            )
        return int(ids.min())

    v1 = central_vertex(c1)
    v2 = central_vertex(c2)
    inside = union.contains(g.xs, g.ys)
    if v1 == v2:
        return RedPathReport([v1], cap, True, (v1, v2))
    prev = {v1: -1}
    q = deque([v1])
    while q:
        u = q.popleft()
        if u == v2:
            break
        for w in g.neighbors(u):
            w = int(w)
            if inside[w] and w not in prev:
                prev[w] = u
                q.append(w)
    if v2 not in prev:
        return RedPathReport(None, cap, None, (v1, v2))
    path = [v2]
    while path[-1] != v1:
        path.append(prev[path[-1]])
    path.reverse()
    return RedPathReport(path, cap, len(path) <= cap, (v1, v2))
