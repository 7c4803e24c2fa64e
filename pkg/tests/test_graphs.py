import math

import numpy as np
import pytest

from rswlab.graphs import (
    CoarseField,
    DegeneratePointSetError,
    EmbeddedGraph,
    GraphFormatError,
    PercolationParams,
    PoissonParams,
    Rect,
    SubcriticalSampleError,
    _circumcircle,
    coarse_grain_red_boxes,
    delaunay_triangles,
    generate_percolation_cluster,
    generate_poisson_delaunay,
    generate_square_lattice,
    parse_graph,
    serialize_graph,
)


# ---------------------------------------------------------------- lattice

def test_lattice_3x3(grid3):
    assert grid3.n_vertices == 9
    assert grid3.n_edges == 12


def test_lattice_interior_degree(grid5):
    center = grid5.nearest_vertex(0, 0)
    assert grid5.degree(center) == 4


@pytest.mark.parametrize("n", [1, 2, 5])
def test_lattice_vertex_count(n):
    g = generate_square_lattice(Rect.square((0, 0), n), 1.0)
    assert g.n_vertices == (2 * n + 1) ** 2


def test_lattice_rejects_tiny_box():
    with pytest.raises(ValueError):
        generate_square_lattice(Rect.square((0, 0), 0.4), 1.0)


# ------------------------------------------------------------ percolation

def test_percolation_full_is_grid():
    g = generate_percolation_cluster(PercolationParams(1.0, 2), seed=1)
    assert g.n_vertices == 25 and g.n_edges == 40
    assert g.meta["open_edges"] == 40
    lattice = generate_square_lattice(Rect.square((0, 0), 2), 1.0)
    assert g.structurally_equal(lattice)


def test_percolation_supercritical_guard():
    with pytest.raises(ValueError, match="supercritical"):
        PercolationParams(0.5, 8)
    # explicit opt-out allows subcritical sampling
    PercolationParams(0.5, 8, supercritical=False)


def test_percolation_connected_and_symmetric():
    g = generate_percolation_cluster(PercolationParams(0.7, 16), seed=5)
    assert g.is_connected()
    for v in range(0, g.n_vertices, 7):
        for w in g.neighbors(v):
            assert v in g.neighbors(w)


class _UnionFind:
    """Independent union-find oracle for cluster statistics."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


def _uf_largest_fraction(p, n, seed):
    """Largest-cluster fraction by a from-scratch union-find sweep."""
    from rswlab import rng as rnglib

    w = 2 * n + 1
    gen = rnglib.generator(seed, 0)
    idx = np.arange(w * w).reshape(w, w)
    right = np.column_stack([idx[:-1, :].ravel(), idx[1:, :].ravel()])
    up = np.column_stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()])
    all_edges = np.concatenate([right, up])
    open_mask = gen.random(len(all_edges)) < p
    uf = _UnionFind(w * w)
    for u, v in all_edges[open_mask]:
        uf.union(int(u), int(v))
    return max(uf.size[uf.find(a)] for a in range(w * w)) / (w * w)


def test_percolation_fraction_matches_union_find_oracle():
    # oracle mean over 100 seeds vs one fixed-seed sample of the generator
    p, n = 0.6, 64
    oracle_mean = np.mean([_uf_largest_fraction(p, n, s) for s in range(100)])
    g = generate_percolation_cluster(PercolationParams(p, n), seed=11)
    assert abs(g.meta["largest_cluster_fraction"] - oracle_mean) <= 0.05


def test_percolation_degenerate_sample_error():
    with pytest.raises(SubcriticalSampleError):
        generate_percolation_cluster(
            PercolationParams(1e-6, 4, supercritical=False), seed=0
        )


# --------------------------------------------------------------- delaunay

def test_delaunay_three_points():
    tris = delaunay_triangles(np.array([[0.0, 0.0], [2.0, 0.0], [1.0, 1.7]]))
    assert tris == [(0, 1, 2)]


def test_delaunay_too_few_points():
    with pytest.raises(DegeneratePointSetError):
        delaunay_triangles(np.array([[0.0, 0.0], [1.0, 0.0]]))


def test_delaunay_empty_circumcircle(delaunay_small):
    # exhaustive scan: no sampled point strictly inside any circumcircle
    g = delaunay_small
    pts = g.positions()
    assert len(g.meta["triangles"]) > 0
    for a, b, c in g.meta["triangles"]:
        cx, cy, r2 = _circumcircle(pts[a], pts[b], pts[c])
        d2 = (pts[:, 0] - cx) ** 2 + (pts[:, 1] - cy) ** 2
        inside = d2 < r2 * (1 - 1e-9)
        inside[[a, b, c]] = False
        assert not inside.any()


def test_delaunay_interior_faces_are_triangles(delaunay_small):
    # every interior face of the planar embedding has length 3
    from rswlab.planar import trace_faces

    faces, outer = trace_faces(delaunay_small)
    for i, f in enumerate(faces):
        if i != outer:
            assert len(f) == 3


def test_delaunay_connected_and_planar_invariants(delaunay_small):
    g = delaunay_small
    assert g.is_connected()
    deg = g.degree()
    assert (deg >= 2).all()


def test_delaunay_cocircular_grid_is_deterministic():
    pts = np.array([[i, j] for i in range(4) for j in range(4)], float)
    t1 = delaunay_triangles(pts)
    t2 = delaunay_triangles(pts)
    assert t1 == t2
    assert len(t1) == 18  # 9 unit cells split in two


def test_delaunay_degenerate_point_count():
    params = PoissonParams(0.02, Rect.square((0, 0), 5), padding=1.0)
    with pytest.raises((DegeneratePointSetError, ValueError)):
        for seed in range(5):
            generate_poisson_delaunay(params, seed)


# ---------------------------------------------------------- red-box field

def test_red_boxes_empty_points():
    field = coarse_grain_red_boxes(
        np.empty((0, 2)), s=5.0, extent=Rect.square((0, 0), 10)
    )
    assert field.red.size > 0
    assert not field.red.any()


def test_red_boxes_fully_occupied_cell_is_red():
    s = 10.0
    centers = []
    for i in range(20):
        for j in range(20):
            centers.append((-s + (i + 0.5) * s / 10, -s + (j + 0.5) * s / 10))
    field = coarse_grain_red_boxes(np.array(centers), s=s, extent=Rect.square((0, 0), s / 2))
    i0, j0 = field.origin
    assert field.red[-i0, -j0]
    assert field.a_red[-i0, -j0]  # A = inf


def test_red_boxes_a_red_subset_of_red():
    gen = np.random.Generator(np.random.PCG64(3))
    pts = gen.uniform(-60, 60, (14000, 2))
    for A in (0.05, 0.1, 0.5):
        field = coarse_grain_red_boxes(pts, s=10.0, A=A)
        assert not (field.a_red & ~field.red).any()


def test_red_boxes_frequency_matches_poisson_void_oracle():
    # seeded intensity-1 sample at s=20 vs a per-sub-box Poisson-void
    # oracle run over 1e4 resampled cells
    from rswlab import rng as rnglib

    s, lam, half = 20.0, 1.0, 210.0
    gen = rnglib.generator(99, 0)
    area = (2 * half) ** 2
    n = gen.poisson(lam * area)
    pts = np.column_stack([gen.uniform(-half, half, n), gen.uniform(-half, half, n)])
    field = coarse_grain_red_boxes(pts, s=s, extent=Rect.square((0, 0), half - s))
    oracle_gen = rnglib.generator(100, 0)
    sub_mean = lam * (s / 10) ** 2
    counts = oracle_gen.poisson(sub_mean, size=(10_000, 400))
    oracle_freq = float((counts.min(axis=1) >= 1).mean())
    assert abs(field.red_density - oracle_freq) <= 0.02


def test_red_boxes_far_cells_decorrelated():
    from rswlab import rng as rnglib

    gen = rnglib.generator(5, 0)
    half = 300.0
    n = gen.poisson(1.0 * (2 * half) ** 2)
    pts = np.column_stack([gen.uniform(-half, half, n), gen.uniform(-half, half, n)])
    field = coarse_grain_red_boxes(pts, s=6.0, extent=Rect.square((0, 0), half - 6))
    assert abs(field.far_correlation) < 0.05


# ------------------------------------------------------------- serialize

def test_roundtrip_single_vertex():
    g = EmbeddedGraph(np.array([[0.25, -1.5]]), np.empty((0, 2), np.int64))
    assert parse_graph(serialize_graph(g)).structurally_equal(g)


def test_roundtrip_grid_bit_exact(grid5):
    data = serialize_graph(grid5)
    g2 = parse_graph(data)
    assert g2.structurally_equal(grid5)
    assert serialize_graph(g2) == data


def test_roundtrip_delaunay_thousand_vertices():
    g = generate_poisson_delaunay(
        PoissonParams(1.0, Rect.square((0, 0), 17), padding=3.0), seed=21
    )
    assert g.n_vertices > 1000
    assert parse_graph(serialize_graph(g)).structurally_equal(g)


@pytest.mark.parametrize(
    "payload, location",
    [
        (b"{", "line 1"),
        (b'{"vertices": 3, "edges": []}', "vertices"),
        (b'{"vertices": [], "edges": [[0, 1]]}', "edges[0]"),
        (b'{"vertices": [{"id": 0, "x": 0, "y": 0}], "edges": [[0, 0]]}', "edges[0]"),
        (b'{"vertices": [{"id": 0, "x": "a", "y": 0}], "edges": []}', "vertices[0]"),
    ],
)
def test_parse_errors_carry_location(payload, location):
    import re

    with pytest.raises(GraphFormatError, match=re.escape(location)):
        parse_graph(payload)


# ------------------------------------------------------------- rect type

def test_rect_invariants():
    with pytest.raises(ValueError):
        Rect(0, 0, -1, 1)
    r = Rect(1, 2, 3, 4)
    assert r.bounds == (-2, 4, -2, 6)
    assert r.contains(4, 6)
    assert not r.contains(4.1, 0)


def test_graph_construction_rejects_bad_edges():
    coords = np.zeros((3, 2))
    with pytest.raises(ValueError):
        EmbeddedGraph(coords, [(0, 0)])
    with pytest.raises(ValueError):
        EmbeddedGraph(coords, [(0, 1), (1, 0)])
    with pytest.raises(ValueError):
        EmbeddedGraph(coords, [(0, 5)])
