"""Numba kernel for exhaustive connected-subset sweeps on small balls.

Enumerates every connected subset (up to a size cap) of a <=63-vertex
subgraph and checks, per subset:

- the Euler identity |E| = 3|A| - |P| - 3 whenever every bounded face of
  the induced plane subgraph is a triangle (|P| from an in-kernel face
  trace; tree-like subsets shortcut through |P| = 2|E|),
- the boundary bound  boundary_E / vol_E >= boundary_int / (7 |A|)
  in exact integer arithmetic,
- the containment A inside B(v, 2k) for every interior-boundary vertex v
  (k = |boundary_int|), on subsets meeting its hypotheses (vertex boundary
  connected and touching the ball boundary).

The kernel only *flags* suspected violations; callers re-verify each flag
with the slow exact path before treating it as real.
"""

from __future__ import annotations

import numpy as np
from numba import njit

MAX_FLAGS = 64


@njit(cache=True, inline="always")
def _popcount(x):
    x = x - ((x >> 1) & 0x5555555555555555)
    x = (x & 0x3333333333333333) + ((x >> 2) & 0x3333333333333333)
    x = (x + (x >> 4)) & 0x0F0F0F0F0F0F0F0F
    return (x * 0x0101010101010101) >> 56


@njit(cache=True, inline="always")
def _lowbit_index(u):
    return _popcount(u - 1)


@njit(cache=True)
def _trace_ok(S, rot_flat, rot_ptr, pos_uv, cross, visited, stamp, nverts):
    """Face-trace the subgraph induced by S.

    Returns (simply_connected, perimeter, n_edges): perimeter is the outer
    walk length, simply_connected means every bounded face has length 3.
    """
    n_edges = 0
    outer_len = -1
    outer_area = 1e300
    simply = True
    for u in range(nverts):
        if not (S >> u) & 1:
            continue
        for k in range(rot_ptr[u], rot_ptr[u + 1]):
            v = rot_flat[k]
            if not (S >> v) & 1:
                continue
            n_edges += 1
            if visited[u * nverts + v] == stamp:
                continue
            # walk the face containing half-edge (u, v)
            length = 0
            area2 = 0.0
            cu, cv = u, v
            while visited[cu * nverts + cv] != stamp:
                visited[cu * nverts + cv] = stamp
                length += 1
                area2 += cross[cu, cv]
                # next half-edge: predecessor of cu in rotation at cv
                p = pos_uv[cu, cv]
                lo = rot_ptr[cv]
                hi = rot_ptr[cv + 1]
                deg = hi - lo
                j = p
                nxt = -1
                for _ in range(deg):
                    j -= 1
                    if j < 0:
                        j += deg
                    w = rot_flat[lo + j]
                    if (S >> w) & 1:
                        nxt = w
                        break
                cu, cv = cv, nxt
            if area2 < outer_area:
                # previous champion was in fact a bounded face
                if outer_len > 0 and outer_len != 3:
                    simply = False
                outer_area = area2
                outer_len = length
            elif length != 3:
                simply = False
    return simply, outer_len, n_edges // 2


@njit(cache=True)
def subset_sweep(
    neigh,        # int64[nverts] adjacency bitmasks (ball-local)
    ext_bdry,     # bool[nverts]: vertex has a neighbor outside the ball
    rot_flat,     # int64[:] concatenated CCW rotation lists
    rot_ptr,      # int64[nverts+1]
    pos_uv,       # int16[nverts, nverts]: position of u in rotation of v
    cross,        # float64[nverts, nverts]: x_u y_v - x_v y_u
    max_size,
):
    """Sweep all connected subsets of size <= max_size.

    Returns (counts, flags) where counts =
      [n_subsets, n_simply_connected, n_euler_checked, n_containment_checked]
    and flags is a (MAX_FLAGS, 2) int64 array of (category, mask) suspected
    violations; category 0 = Euler, 1 = seventh bound, 2 = containment.
    """
    nverts = len(neigh)
    deg = np.zeros(nverts, dtype=np.int64)
    for i in range(nverts):
        deg[i] = _popcount(neigh[i])
    visited = np.zeros(nverts * nverts, dtype=np.int64)
    stamp = 0
    counts = np.zeros(4, dtype=np.int64)
    flags = np.zeros((MAX_FLAGS, 2), dtype=np.int64)
    n_flags = 0
    # explicit stack of (S, ext, forb); emit happens on push of include-branch
    cap = 4 * nverts * max_size + 16
    st_S = np.zeros(cap, dtype=np.int64)
    st_ext = np.zeros(cap, dtype=np.int64)
    st_forb = np.zeros(cap, dtype=np.int64)

    for v0 in range(nverts):
        above = ~np.int64(0) << np.int64(v0 + 1)
        sp = 0
        st_S[0] = np.int64(1) << v0
        st_ext[0] = neigh[v0] & above
        st_forb[0] = 0
        emit = st_S[0]
        # process the emitted subset, then run the stack loop
        while True:
            S = emit
            counts[0] += 1
            # ---- incremental metrics
            size = _popcount(S)
            vol = 0
            bnd = 0
            bint = 0
            edges2 = 0
            T = S
            while T:
                u = T & (-T)
                T ^= u
                ui = _lowbit_index(u)
                vol += deg[ui]
                inS = _popcount(neigh[ui] & S)
                edges2 += inS
                out = deg[ui] - inS
                bnd += out
                if out > 0:
                    bint += 1
            n_edges = edges2 // 2
            # ---- seventh bound: 7 * size * bnd >= bint * vol (exact ints)
            if 7 * size * bnd < bint * vol:
                if n_flags < MAX_FLAGS:
                    flags[n_flags, 0] = 1
                    flags[n_flags, 1] = S
                    n_flags += 1
            # ---- Euler identity
            n_bounded = n_edges - size + 1
            if n_bounded == 0:
                counts[1] += 1
                counts[2] += 1
                if n_edges != size - 1:
                    if n_flags < MAX_FLAGS:
                        flags[n_flags, 0] = 0
                        flags[n_flags, 1] = S
                        n_flags += 1
            elif n_bounded > 0:
                stamp += 1
                simply, perim, ne = _trace_ok(
                    S, rot_flat, rot_ptr, pos_uv, cross, visited, stamp, nverts
                )
                if simply:
                    counts[1] += 1
                    counts[2] += 1
                    if ne != 3 * size - perim - 3:
                        if n_flags < MAX_FLAGS:
                            flags[n_flags, 0] = 0
                            flags[n_flags, 1] = S
                            n_flags += 1
            # ---- containment (boundary geometry lemma)
            # hypothesis: vertex boundary nonempty, connected, touches ball bdry
            bdryV = np.int64(0)
            bdryI = np.int64(0)
            touches = False
            T = S
            while T:
                u = T & (-T)
                T ^= u
                ui = _lowbit_index(u)
                outm = neigh[ui] & ~S
                if outm != 0 or ext_bdry[ui]:
                    bdryV |= u
                    if ext_bdry[ui]:
                        touches = True
                if outm != 0:
                    bdryI |= u
            if touches and bdryI != 0 and bdryV != 0:
                # connectivity of the vertex boundary inside the ball subgraph
                start = bdryV & (-bdryV)
                seen = start
                frontier = start
                while frontier:
                    nxt = np.int64(0)
                    T = frontier
                    while T:
                        u = T & (-T)
                        T ^= u
                        nxt |= neigh[_lowbit_index(u)]
                    nxt &= bdryV & ~seen
                    seen |= nxt
                    frontier = nxt
                if seen == bdryV:
                    counts[3] += 1
                    kk = 2 * _popcount(bdryI)
                    # BFS from each interior-boundary vertex inside the ball
                    T = bdryI
                    ok = True
                    while T and ok:
                        u = T & (-T)
                        T ^= u
                        src = _lowbit_index(u)
                        reached = np.int64(1) << src
                        frontier = reached
                        d = 0
                        while frontier and d < kk:
                            d += 1
                            nxt = np.int64(0)
                            F = frontier
                            while F:
                                w = F & (-F)
                                F ^= w
                                nxt |= neigh[_lowbit_index(w)]
                            nxt &= ~reached
                            reached |= nxt
                            frontier = nxt
                        if (S & ~reached) != 0:
                            ok = False
                    if not ok:
                        if n_flags < MAX_FLAGS:
                            flags[n_flags, 0] = 2
                            flags[n_flags, 1] = S
                            n_flags += 1
            # ---- advance the enumeration stack
            advanced = False
            while sp >= 0 and not advanced:
                S = st_S[sp]
                ext = st_ext[sp]
                forb = st_forb[sp]
                if ext == 0 or _popcount(S) >= max_size:
                    sp -= 1
                    continue
                u = ext & (-ext)
                ui = _lowbit_index(u)
                # exclude branch replaces the current frame
                st_ext[sp] = ext ^ u
                st_forb[sp] = forb | u
                # include branch is pushed and emitted
                sp += 1
                st_S[sp] = S | u
                st_ext[sp] = (ext ^ u) | (neigh[ui] & above & ~S & ~forb)
                st_forb[sp] = forb
                emit = S | u
                advanced = True
            if not advanced:
                break
    return counts, flags[:n_flags].copy()
