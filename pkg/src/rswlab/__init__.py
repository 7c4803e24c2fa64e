"""Simulation laboratory for random walks, spanning trees and dimer heights
on random planar graphs.

Subpackages by concern:

- :mod:`rswlab.graphs`       random planar environments and coarse red-box fields
- :mod:`rswlab.diagnostics`  deterministic geometry: balls, boundaries, isoperimetry
- :mod:`rswlab.walks`        random-walk simulation and exact hitting solvers
- :mod:`rswlab.rsw`          scale machinery: per-point radii, tail curves, fits
- :mod:`rswlab.ust`          loop-erased walks, Wilson trees, multiscale couplings
- :mod:`rswlab.dimers`       Temperleyan graphs, winding heights, moment reports
- :mod:`rswlab.manifest`     reproducible experiment orchestration
"""

__version__ = "0.1.0"

from rswlab.graphs import (
    EmbeddedGraph,
    Rect,
    PercolationParams,
    PoissonParams,
    generate_percolation_cluster,
    generate_poisson_delaunay,
    generate_square_lattice,
)

__all__ = [
    "EmbeddedGraph",
    "Rect",
    "PercolationParams",
    "PoissonParams",
    "generate_percolation_cluster",
    "generate_poisson_delaunay",
    "generate_square_lattice",
    "__version__",
]
