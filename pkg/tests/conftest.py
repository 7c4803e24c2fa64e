import numpy as np
import pytest

from rswlab.graphs import (
    PoissonParams,
    Rect,
    generate_poisson_delaunay,
    generate_square_lattice,
)


@pytest.fixture(scope="session")
def grid3():
    """3x3 unit grid centered at the origin."""
    return generate_square_lattice(Rect.square((0, 0), 1), 1.0)


@pytest.fixture(scope="session")
def grid5():
    """5x5 unit grid centered at the origin."""
    return generate_square_lattice(Rect.square((0, 0), 2), 1.0)


@pytest.fixture(scope="session")
def delaunay_small():
    """Seeded ~400-vertex Poisson-Delaunay patch on a 20x20 box."""
    return generate_poisson_delaunay(
        PoissonParams(1.0, Rect.square((0, 0), 10), padding=3.0), seed=7
    )


def path_graph(n):
    """Unit-spaced path on the x-axis with n vertices."""
    from rswlab.graphs import EmbeddedGraph

    coords = np.column_stack([np.arange(n, dtype=float), np.zeros(n)])
    edges = np.column_stack([np.arange(n - 1), np.arange(1, n)])
    return EmbeddedGraph(coords, edges)
