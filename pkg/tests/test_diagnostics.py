import heapq
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rswlab.graphs import (
    PercolationParams,
    PoissonParams,
    Rect,
    coarse_grain_red_boxes,
    generate_percolation_cluster,
    generate_poisson_delaunay,
    generate_square_lattice,
)
from rswlab.diagnostics import (
    DisconnectedSetError,
    EnumerationModeError,
    HypothesisNotMetError,
    adjacency_masks,
    ball_of_size,
    boundary_report,
    connected_subset_masks,
    diameter_checks,
    graph_ball,
    hole_analysis,
    hole_report_csv,
    inclusion_check,
    iso_report_csv,
    isoperimetric_profile,
    lemma_sweep,
    poincare_constant,
    poincare_quotient,
    red_path_bound,
)
from rswlab import rng as rnglib

from conftest import path_graph


# ------------------------------------------------------------------ balls

def test_ball_radius_zero(grid5):
    b = graph_ball(grid5, 0, 0)
    assert list(b.vertices) == [0]
    assert b.distance(0) == 0


def test_ball_radius_one_center(grid5):
    c = grid5.nearest_vertex(0, 0)
    b = graph_ball(grid5, c, 1)
    assert b.size == 5


def _dijkstra_unit(g, src):
    dist = {src: 0}
    pq = [(0, src)]
    while pq:
        d, v = heapq.heappop(pq)
        if d > dist.get(v, math.inf):
            continue
        for w in g.neighbors(v):
            w = int(w)
            if d + 1 < dist.get(w, math.inf):
                dist[w] = d + 1
                heapq.heappush(pq, (d + 1, w))
    return dist


def test_ball_matches_dijkstra_oracle(delaunay_small):
    g = delaunay_small
    center = g.origin_vertex()
    b = graph_ball(g, center, 3)
    oracle = _dijkstra_unit(g, center)
    expect = sorted(v for v, d in oracle.items() if d <= 3)
    assert list(b.vertices) == expect
    for v, d in zip(b.vertices, b.distances):
        assert oracle[int(v)] == d


@settings(max_examples=20, deadline=None)
@given(r=st.integers(min_value=0, max_value=5))
def test_ball_monotone(r):
    g = generate_square_lattice(Rect.square((0, 0), 4), 1.0)
    c = g.nearest_vertex(0, 0)
    small = set(graph_ball(g, c, r).vertices)
    big = set(graph_ball(g, c, r + 1).vertices)
    assert small <= big


# -------------------------------------------------------------- inclusion

def test_inclusion_lattice_constant_two():
    g = generate_square_lattice(Rect.square((0, 0), 12), 1.0)
    rep = inclusion_check(g, n=8, c_euc=2.0)
    assert rep.holds
    assert rep.found and rep.fitted_c == pytest.approx(2.0)


def test_inclusion_disconnected_double():
    import numpy as np
    from rswlab.graphs import EmbeddedGraph

    coords = np.array([[0.0, 0.0], [1.0, 0.0], [5.0, 0.0], [6.0, 0.0]])
    g = EmbeddedGraph(coords, [(0, 1), (2, 3)])
    rep = inclusion_check(g, n=5.5, c_euc=2.0, cap=64)
    assert not rep.holds
    assert not rep.found


def test_inclusion_percolation_ensemble():
    # failure fraction of the (inflated) fitted constant should be near 0
    fitted = []
    for seed in range(10):
        g = generate_percolation_cluster(PercolationParams(0.85, 16), seed=seed)
        rep = inclusion_check(g, n=10, c_euc=2.0)
        assert rep.found
        fitted.append(rep.fitted_c)
    c_star = 1.5 * max(fitted)
    failures = 0
    for seed in range(10, 35):
        g = generate_percolation_cluster(PercolationParams(0.85, 16), seed=seed)
        if not inclusion_check(g, n=10, c_euc=c_star).holds:
            failures += 1
    assert failures <= 2


# --------------------------------------------------------------- boundary

def _triangle_graph():
    from rswlab.graphs import EmbeddedGraph

    coords = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.9]])
    return EmbeddedGraph(coords, [(0, 1), (1, 2), (0, 2)])


def test_boundary_single_triangle():
    g = _triangle_graph()
    rep = boundary_report(g, np.arange(3), np.arange(3))
    assert rep.size == 3 and rep.n_edges == 3 and rep.perimeter == 3
    assert rep.euler_identity_holds   # 3 == 3*3 - 3 - 3


def test_boundary_two_triangles_sharing_edge():
    from rswlab.graphs import EmbeddedGraph

    coords = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.9], [1.5, 0.9]])
    g = EmbeddedGraph(coords, [(0, 1), (1, 2), (0, 2), (1, 3), (2, 3)])
    rep = boundary_report(g, np.arange(4), np.arange(4))
    assert rep.size == 4 and rep.n_edges == 5 and rep.perimeter == 4
    assert rep.euler_identity_holds   # 5 == 3*4 - 4 - 3


def test_boundary_tree_case():
    g = path_graph(4)
    rep = boundary_report(g, np.arange(4), np.arange(4))
    # trees: |P| = 2|E| and the identity still holds
    assert rep.perimeter == 2 * rep.n_edges
    assert rep.euler_identity_holds


def test_boundary_disconnected_rejected(grid5):
    with pytest.raises(DisconnectedSetError):
        boundary_report(grid5, np.arange(25), np.array([0, 24]))


def test_seventh_bound_on_delaunay_ball(delaunay_small):
    g = delaunay_small
    ball = ball_of_size(g, g.origin_vertex(), 30)
    rep = lemma_sweep(g, ball, 8)
    assert rep.n_subsets > 1000
    assert rep.seventh_violations == []
    assert rep.euler_violations == []


def test_sweep_agrees_with_boundary_report(delaunay_small):
    # dual route: kernel classification vs the slow exact path on a sample
    g = delaunay_small
    ball = ball_of_size(g, g.origin_vertex(), 14)
    masks, _ = adjacency_masks(g, ball.vertices)
    sorted_verts = np.sort(ball.vertices)
    count = 0
    for S in connected_subset_masks(masks, 5):
        count += 1
        if count % 17:
            continue
        A = np.array([int(sorted_verts[i]) for i in range(len(masks)) if (S >> i) & 1])
        rep = boundary_report(g, ball.vertices, A)
        assert rep.seventh_bound_holds
        if rep.simply_connected:
            assert rep.euler_identity_holds in (True, None)


# ------------------------------------------------------------ iso profile

def test_iso_single_interior_vertex(grid5):
    c = grid5.nearest_vertex(0, 0)
    ball = graph_ball(grid5, c, 2)
    rep = isoperimetric_profile(grid5, ball, max_size=1, keep_rows=True)
    row = next(r for r in rep.rows if r.size == 1)
    assert row.ratio == pytest.approx(1.0)


def _brute_iso(g, ball, max_size):
    """Independent powerset + BFS enumeration of the profile."""
    verts = [int(v) for v in ball.vertices]
    vs = set(verts)
    deg = {v: sum(1 for w in g.neighbors(v) if int(w) in vs) for v in verts}
    half = sum(deg.values()) / 2
    best = math.inf
    best_set = None
    for k in range(1, max_size + 1):
        for comb in itertools.combinations(verts, k):
            A = set(comb)
            # connectivity of A
            stack = [next(iter(A))]
            seen = {stack[0]}
            while stack:
                v = stack.pop()
                for w in g.neighbors(v):
                    w = int(w)
                    if w in A and w not in seen:
                        seen.add(w)
                        stack.append(w)
            if seen != A:
                continue
            comp = vs - A
            if comp:
                stack = [next(iter(comp))]
                seen_c = {stack[0]}
                while stack:
                    v = stack.pop()
                    for w in g.neighbors(v):
                        w = int(w)
                        if w in comp and w not in seen_c:
                            seen_c.add(w)
                            stack.append(w)
                if seen_c != comp:
                    continue
            vol = sum(deg[v] for v in A)
            if vol == 0 or vol > half:
                continue
            bnd = sum(
                1
                for v in A
                for w in g.neighbors(v)
                if int(w) in vs and int(w) not in A
            )
            if bnd / vol < best:
                best = bnd / vol
                best_set = tuple(sorted(A))
    return best, best_set


def test_iso_profile_matches_brute_force(grid3):
    ball = graph_ball(grid3, grid3.nearest_vertex(0, 0), 4)
    rep = isoperimetric_profile(grid3, ball, max_size=4)
    oracle_best, oracle_set = _brute_iso(grid3, ball, 4)
    assert rep.iso_constant == pytest.approx(oracle_best)
    assert rep.minimizer == oracle_set
    assert rep.largest_c_i > 0


def test_iso_profile_mode_error(grid5):
    ball = graph_ball(grid5, 0, 8)
    with pytest.raises(EnumerationModeError):
        isoperimetric_profile(grid5, ball, max_size=20)


def test_iso_anneal_upper_bounds_exhaustive(grid3):
    ball = graph_ball(grid3, grid3.nearest_vertex(0, 0), 4)
    exact = isoperimetric_profile(grid3, ball, max_size=4)
    heur = isoperimetric_profile(
        grid3, ball, max_size=4, mode="anneal",
        rng=rnglib.generator(1, 0), anneal_steps=4000,
    )
    assert heur.mode == "anneal"
    assert heur.iso_constant >= exact.iso_constant - 1e-12


def test_iso_csv_header(grid3):
    ball = graph_ball(grid3, grid3.nearest_vertex(0, 0), 4)
    rep = isoperimetric_profile(grid3, ball, max_size=3, keep_rows=True)
    csv = iso_report_csv(rep)
    assert csv.splitlines()[0] == "size,vol_E,boundary_E,boundary_V,boundary_int,ratio"
    assert len(csv.splitlines()) == rep.n_enumerated + 1


# --------------------------------------------------------------- Poincare

def test_poincare_two_vertex_graph():
    # closed-form 2x2 generalized eigenproblem: eigenvalues {0, 2}
    g = path_graph(2)
    ball = graph_ball(g, 0, 1)
    rep = poincare_constant(g, ball)
    assert rep.lambda2 == pytest.approx(2.0, abs=1e-12)
    assert rep.kappa == pytest.approx(0.5, abs=1e-12)


def test_poincare_constant_function_trivial():
    g = path_graph(5)
    ball = graph_ball(g, 2, 2)
    var, energy = poincare_quotient(g, ball, {v: 3.0 for v in range(5)})
    assert var == pytest.approx(0.0)
    assert energy == pytest.approx(0.0)


def test_poincare_path_quadratic_growth():
    # closed-form oracle: lambda_2 of the walk Laplacian on a path is
    # 1 - cos(pi/(n-1)), so kappa(P16)/kappa(P8) = 4.5322...
    k8 = poincare_constant(path_graph(8), graph_ball(path_graph(8), 0, 7)).kappa
    k16 = poincare_constant(path_graph(16), graph_ball(path_graph(16), 0, 15)).kappa
    assert k8 == pytest.approx(1.0 / (1.0 - math.cos(math.pi / 7)), rel=1e-9)
    assert k16 == pytest.approx(1.0 / (1.0 - math.cos(math.pi / 15)), rel=1e-9)
    assert 3.5 <= k16 / k8 <= 4.6   # quadratic growth; true ratio 4.532


def test_poincare_disconnected_rejected():
    from rswlab.graphs import EmbeddedGraph
    from rswlab.diagnostics import BallIndex

    coords = np.array([[0.0, 0.0], [1.0, 0.0], [5.0, 0.0], [6.0, 0.0]])
    g = EmbeddedGraph(coords, [(0, 1), (2, 3)])
    fake = BallIndex(0, 9, np.arange(4), np.zeros(4, dtype=np.int64))
    with pytest.raises(DisconnectedSetError):
        poincare_constant(g, fake)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=9, max_size=9))
def test_poincare_kappa_dominates_random_functions(vals):
    g = generate_square_lattice(Rect.square((0, 0), 1), 1.0)
    ball = graph_ball(g, g.nearest_vertex(0, 0), 4)
    rep = poincare_constant(g, ball)
    var, energy = poincare_quotient(g, ball, {v: vals[v] for v in range(9)})
    assert var <= rep.kappa * energy + 1e-9


# ------------------------------------------------------------------ holes

def _field_from_grid(red):
    from rswlab.graphs import CoarseField

    red = np.asarray(red, dtype=bool)
    return CoarseField(
        s=1.0, A=math.inf, origin=(0, 0), red=red, a_red=red.copy(),
        red_density=float(red.mean()), far_correlation=0.0,
    )


def test_holes_all_red():
    field = _field_from_grid(np.ones((9, 9)))
    box = Rect(4.0, 4.0, 4.0, 4.0)
    for k in (1, 2, 5):
        rep = hole_analysis(field, box, k=k, C=10.0)
        assert rep.hole_sizes == []
        assert rep.event_holds


def test_holes_single_closed_cell():
    red = np.ones((9, 9), dtype=bool)
    red[4, 4] = False
    rep = hole_analysis(_field_from_grid(red), Rect(4, 4, 4, 4), k=2)
    assert rep.hole_sizes == [1]
    assert rep.max_hole == 1


def _flood_fill_oracle(closed):
    """Independent 8-connectivity flood fill returning hole sizes."""
    closed = np.asarray(closed, dtype=bool)
    seen = np.zeros_like(closed)
    sizes = []
    for i in range(closed.shape[0]):
        for j in range(closed.shape[1]):
            if closed[i, j] and not seen[i, j]:
                size = 0
                stack = [(i, j)]
                seen[i, j] = True
                while stack:
                    a, b = stack.pop()
                    size += 1
                    for da in (-1, 0, 1):
                        for db in (-1, 0, 1):
                            x, y = a + da, b + db
                            if (
                                0 <= x < closed.shape[0]
                                and 0 <= y < closed.shape[1]
                                and closed[x, y]
                                and not seen[x, y]
                            ):
                                seen[x, y] = True
                                stack.append((x, y))
                sizes.append(size)
    return sorted(sizes, reverse=True)


def test_holes_match_flood_fill_oracle():
    gen = rnglib.generator(17, 0)
    red = gen.random((64, 64)) < 0.99
    field = _field_from_grid(red)
    rep = hole_analysis(field, Rect(31.5, 31.5, 31.5, 31.5), k=8)
    assert rep.hole_sizes == _flood_fill_oracle(~red)
    assert rep.max_hole == (max(_flood_fill_oracle(~red)) if rep.hole_sizes else 0)


def test_hole_csv_header():
    field = _field_from_grid(np.ones((5, 5)))
    rep = hole_analysis(field, Rect(2, 2, 2, 2), k=1)
    assert hole_report_csv(rep).splitlines()[0] == (
        "size,vol_E,boundary_E,boundary_V,boundary_int,ratio"
    )


# --------------------------------------------------------------- diameter

def test_diameter_singleton(grid5):
    rep = diameter_checks(grid5, np.array([7]))
    assert rep.graph_diameter == 0
    assert rep.euclidean_diameter == 0.0


def test_diameter_straight_path():
    g = path_graph(5)
    rep = diameter_checks(g, np.arange(5))
    assert rep.euclidean_diameter == pytest.approx(4.0)
    assert rep.graph_diameter == 4


def test_containment_on_random_subsets(delaunay_small):
    # grow 200 random connected subsets; when the hypothesis is met the
    # containment A in B(v, 2k) must hold
    g = delaunay_small
    ball = ball_of_size(g, g.origin_vertex(), 40)
    gen = rnglib.generator(23, 0)
    members = [int(v) for v in ball.vertices]
    member_set = set(members)
    n_met = 0
    for _ in range(200):
        size = int(gen.integers(2, 15))
        A = {members[int(gen.integers(len(members)))]}
        while len(A) < size:
            v = members[int(gen.integers(len(members)))] if not A else None
            frontier = [
                int(w)
                for u in A
                for w in g.neighbors(u)
                if int(w) in member_set and int(w) not in A
            ]
            if not frontier:
                break
            A.add(frontier[int(gen.integers(len(frontier)))])
        rep = diameter_checks(g, np.array(sorted(A)), ambient_ball=ball)
        if rep.containment_hypothesis_met:
            n_met += 1
            assert rep.containment_holds
    assert n_met > 20


# ----------------------------------------------------------- red path

def _jittered_grid_graph_and_field():
    gen = rnglib.generator(31, 0)
    pts = []
    for i in range(-12, 25):
        for j in range(-12, 13):
            pts.append((i + 0.02 * gen.random(), j + 0.02 * gen.random()))
    pts = np.array(pts)
    from rswlab.graphs import EmbeddedGraph, delaunay_triangles

    tris = delaunay_triangles(pts)
    edges = set()
    for a, b, c in tris:
        edges |= {(min(a, b), max(a, b)), (min(b, c), max(b, c)), (min(a, c), max(a, c))}
    g = EmbeddedGraph(pts, sorted(edges))
    field = coarse_grain_red_boxes(pts, s=10.0, A=2.0)
    return g, field


def test_red_path_cap_value_and_path():
    g, field = _jittered_grid_graph_and_field()
    rep = red_path_bound(field, g, (0, 0), (1, 0))
    assert rep.cap == 800 * 2.0 * 100  # 160000
    assert rep.path is not None
    assert rep.within_cap
    # path stays inside the union rectangle
    for v in rep.path:
        x, y = g.position(v)
        assert -10.01 <= x <= 20.01 and -10.01 <= y <= 10.01


def test_red_path_refusals():
    g, field = _jittered_grid_graph_and_field()
    with pytest.raises(HypothesisNotMetError):
        red_path_bound(field, g, (0, 0), (2, 0))   # not adjacent
    with pytest.raises(HypothesisNotMetError):
        red_path_bound(field, g, (40, 0), (41, 0))  # outside field
