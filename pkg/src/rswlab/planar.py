"""Planar embedding utilities: rotation systems, face tracing, duals.

Faces are traced with the interior on the left, so interior faces come out
counterclockwise (positive signed area) and the outer face clockwise.  All
of this is combinatorial given the straight-line embedding; it underpins
both the Euler-identity diagnostics and the Temperleyan construction.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from rswlab.graphs import EmbeddedGraph


def rotation_system(g: EmbeddedGraph, subset: np.ndarray | None = None):
    """Per-vertex neighbor lists sorted counterclockwise by angle.

    With ``subset`` (a boolean mask over vertices), neighbors outside the
    subset are dropped, giving the rotation system of the induced subgraph.
    """
    rot = []
    for v in range(g.n_vertices):
        nbrs = g.neighbors(v)
        if subset is not None:
            if not subset[v]:
                rot.append(np.empty(0, dtype=np.int64))
                continue
            nbrs = nbrs[subset[nbrs]]
        if len(nbrs) == 0:
            rot.append(np.empty(0, dtype=np.int64))
            continue
        ang = np.arctan2(g.ys[nbrs] - g.ys[v], g.xs[nbrs] - g.xs[v])
        rot.append(nbrs[np.argsort(ang, kind="stable")])
    return rot


def trace_faces(
    g: EmbeddedGraph, rot: Sequence[np.ndarray] | None = None
) -> tuple[list[list[tuple[int, int]]], int]:
    """All faces of the embedding as directed-edge walks.

    Returns ``(faces, outer_index)`` where each face is a list of directed
    half-edges and ``outer_index`` selects the unbounded face (the walk
    with the most negative signed area).
    """
    if rot is None:
        rot = rotation_system(g)
    pos = [
        {int(w): k for k, w in enumerate(r)} for r in rot
    ]
    visited: set[tuple[int, int]] = set()
    faces: list[list[tuple[int, int]]] = []
    areas: list[float] = []
    for v0 in range(g.n_vertices):
        for w0 in rot[v0]:
            he = (v0, int(w0))
            if he in visited:
                continue
            face = []
            area2 = 0.0
            u, v = he
            while (u, v) not in visited:
                visited.add((u, v))
                face.append((u, v))
                area2 += g.xs[u] * g.ys[v] - g.xs[v] * g.ys[u]
                k = pos[v][u]
                r = rot[v]
                u, v = v, int(r[(k - 1) % len(r)])
            faces.append(face)
            areas.append(area2 / 2.0)
    if not faces:
        return [], -1
    outer = int(np.argmin(areas))
    return faces, outer


def face_vertices(face: list[tuple[int, int]]) -> list[int]:
    """Vertex walk of a face (origins of its half-edges)."""
    return [u for u, _ in face]


def face_centroid(g: EmbeddedGraph, face: list[tuple[int, int]]) -> tuple[float, float]:
    vs = face_vertices(face)
    return (float(np.mean(g.xs[vs])), float(np.mean(g.ys[vs])))


def face_area(g: EmbeddedGraph, face: list[tuple[int, int]]) -> float:
    area2 = 0.0
    for u, v in face:
        area2 += g.xs[u] * g.ys[v] - g.xs[v] * g.ys[u]
    return area2 / 2.0


class PinchedBoundaryError(ValueError):
    """Outer face walk revisits a vertex; carries the pinch vertex id."""

    def __init__(self, vertex: int):
        super().__init__(f"boundary cycle is not simple; pinch at vertex {vertex}")
        self.vertex = vertex


def boundary_cycle(g: EmbeddedGraph) -> list[int]:
    """Outer face walk as a simple counterclockwise vertex cycle.

    Raises :class:`PinchedBoundaryError` if the outer walk repeats a vertex.
    """
    faces, outer = trace_faces(g)
    if outer < 0:
        raise ValueError("graph has no faces (no edges)")
    walk = face_vertices(faces[outer])
    seen = set()
    for v in walk:
        if v in seen:
            raise PinchedBoundaryError(v)
        seen.add(v)
    # outer walk is clockwise (interior on the left of traced half-edges);
    # report it counterclockwise
    return walk[::-1]


def turn_angle(ax: float, ay: float, bx: float, by: float) -> float:
    """Signed turning angle from heading (ax, ay) to heading (bx, by)."""
    cross = ax * by - ay * bx
    dot = ax * bx + ay * by
    return math.atan2(cross, dot)
