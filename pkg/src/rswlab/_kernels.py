"""Compiled hot loops for random-walk simulation.

Trial-level randomness uses xoshiro256** seeded through a splitmix64 chain
keyed by (kernel seed, trial index): trials are independent streams, so
batched results do not depend on thread scheduling.  Graph-structure walks
that need a full trajectory (loop-erased walks, traces) take a numpy
Generator instead and run single-threaded.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def _splitmix64(state):
    state = state + _GOLDEN
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31)), state


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit(cache=True, inline="always")
def _trial_state(base_seed, trial):
    s = base_seed ^ (np.uint64(trial) * _GOLDEN)
    a, s = _splitmix64(s)
    b, s = _splitmix64(s)
    c, s = _splitmix64(s)
    d, s = _splitmix64(s)
    return a, b, c, d


@njit(cache=True, inline="always")
def _xo_next(s0, s1, s2, s3):
    result = _rotl(s1 * np.uint64(5), 7) * np.uint64(9)
    t = s1 << np.uint64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, 45)
    return result, s0, s1, s2, s3


@njit(cache=True, inline="always")
def _uniform(s0, s1, s2, s3):
    r, s0, s1, s2, s3 = _xo_next(s0, s1, s2, s3)
    return (r >> np.uint64(11)) * _INV53, s0, s1, s2, s3


@njit(cache=True, parallel=True)
def crossing_batch(indptr, indices, labels, starts, per_start, cap, base_seed):
    """Absorption outcomes of simple-random-walk trials from each start.

    labels: 0 free, 1 target (success), 2 kill (failure).  Returns
    (successes, failures, capped) per start; trials that hit the step cap
    are reported separately, never silently folded into either outcome.
    """
    nstarts = len(starts)
    total = nstarts * per_start
    outcome = np.zeros(total, dtype=np.uint8)
    for w in prange(total):
        s0, s1, s2, s3 = _trial_state(base_seed, w)
        v = starts[w // per_start]
        res = np.uint8(2)
        steps = 0
        while steps < cap:
            lo = indptr[v]
            deg = indptr[v + 1] - lo
            u, s0, s1, s2, s3 = _uniform(s0, s1, s2, s3)
            v = indices[lo + np.int64(u * deg)]
            lab = labels[v]
            if lab == 1:
                res = np.uint8(1)
                break
            if lab == 2:
                res = np.uint8(0)
                break
            steps += 1
        outcome[w] = res
    succ = np.zeros(nstarts, dtype=np.int64)
    fail = np.zeros(nstarts, dtype=np.int64)
    capped = np.zeros(nstarts, dtype=np.int64)
    for w in range(total):
        si = w // per_start
        if outcome[w] == 1:
            succ[si] += 1
        elif outcome[w] == 0:
            fail[si] += 1
        else:
            capped[si] += 1
    return succ, fail, capped


@njit(cache=True, parallel=True)
def heat_kernel_batch(indptr, indices, alive_mask, x, times, trials, base_seed):
    """Positions of a continuous-time unit-rate walk at query times.

    The walk is killed on stepping outside ``alive_mask``.  Returns an
    (trials, len(times)) int64 array of vertex ids, -1 when already killed.
    ``times`` must be sorted ascending.
    """
    nt = len(times)
    out = np.full((trials, nt), -1, dtype=np.int64)
    for w in prange(trials):
        s0, s1, s2, s3 = _trial_state(base_seed, w)
        v = x
        t = 0.0
        k = 0
        while k < nt:
            u, s0, s1, s2, s3 = _uniform(s0, s1, s2, s3)
            if u <= 0.0:
                u = _INV53
            dt = -np.log(u)
            t_next = t + dt
            while k < nt and times[k] < t_next:
                out[w, k] = v
                k += 1
            if k >= nt:
                break
            t = t_next
            lo = indptr[v]
            deg = indptr[v + 1] - lo
            u, s0, s1, s2, s3 = _uniform(s0, s1, s2, s3)
            v2 = indices[lo + np.int64(u * deg)]
            if not alive_mask[v2]:
                break
            v = v2
    return out


@njit(cache=True, parallel=True)
def lattice_crossing_batch(
    start_ix, start_iy, rect_lo_x, rect_hi_x, rect_lo_y, rect_hi_y,
    b2_lo_x, b2_hi_x, b2_lo_y, b2_hi_y, per_start, cap, base_seed,
):
    """Crossing outcomes on a full square lattice, in index coordinates.

    Distribution-identical to :func:`crossing_batch` on an interior-complete
    grid; all membership tests are integer comparisons (closed ranges).
    """
    nstarts = len(start_ix)
    total = nstarts * per_start
    outcome = np.zeros(total, dtype=np.uint8)
    for w in prange(total):
        s0, s1, s2, s3 = _trial_state(base_seed, w)
        si = w // per_start
        ix = np.int64(start_ix[si])
        iy = np.int64(start_iy[si])
        res = np.uint8(2)
        steps = 0
        while steps < cap:
            r, s0, s1, s2, s3 = _xo_next(s0, s1, s2, s3)
            d = np.int64(r >> np.uint64(62))
            # branchless step: axis = d >> 1, sign = 1 - 2*(d & 1)
            sgn = np.int64(1) - np.int64(2) * (d & np.int64(1))
            ax = d >> np.int64(1)
            ix += sgn * (np.int64(1) - ax)
            iy += sgn * ax
            if b2_lo_x <= ix <= b2_hi_x and b2_lo_y <= iy <= b2_hi_y:
                res = np.uint8(1)
                break
            if ix < rect_lo_x or ix > rect_hi_x or iy < rect_lo_y or iy > rect_hi_y:
                res = np.uint8(0)
                break
            steps += 1
        outcome[w] = res
    succ = np.zeros(nstarts, dtype=np.int64)
    fail = np.zeros(nstarts, dtype=np.int64)
    capped = np.zeros(nstarts, dtype=np.int64)
    for w in range(total):
        si = w // per_start
        if outcome[w] == 1:
            succ[si] += 1
        elif outcome[w] == 0:
            fail[si] += 1
        else:
            capped[si] += 1
    return succ, fail, capped


@njit(cache=True)
def lerw_path(indptr, indices, absorb, start, cap, rng):
    """Loop-erased random walk from start to the absorbing set.

    Loops are erased online (chronologically), so memory stays O(V).
    Returns (path, status): status 0 = ok (path ends on an absorbing
    vertex), 1 = step cap exceeded.
    """
    n = len(indptr) - 1
    pos = np.full(n, -1, dtype=np.int64)
    path = np.empty(n + 1, dtype=np.int64)
    path[0] = start
    pos[start] = 0
    top = 0
    steps = 0
    v = start
    while steps < cap:
        lo = indptr[v]
        deg = indptr[v + 1] - lo
        w = indices[lo + np.int64(rng.random() * deg)]
        steps += 1
        if absorb[w]:
            path[top + 1] = w
            return path[: top + 2].copy(), 0
        p = pos[w]
        if p >= 0:
            # chronological erasure: pop back to the previous visit
            for i in range(p + 1, top + 1):
                pos[path[i]] = -1
            top = p
        else:
            top += 1
            path[top] = w
            pos[w] = top
        v = w
    return path[:1].copy(), 1


@njit(cache=True)
def walk_steps_trace(indptr, indices, stop_mask, region_ok, start, cap, rng):
    """Simple-random-walk trace until a stop vertex or region exit.

    Returns (trace, reason): reason 0 = hit stop vertex, 1 = stepped out
    of the region, 2 = cap reached.  The trace includes the final vertex.
    """
    buf = np.empty(cap + 1, dtype=np.int64)
    buf[0] = start
    if stop_mask[start]:
        return buf[:1].copy(), 0
    if not region_ok[start]:
        return buf[:1].copy(), 1
    v = start
    k = 0
    while k < cap:
        lo = indptr[v]
        deg = indptr[v + 1] - lo
        v = indices[lo + np.int64(rng.random() * deg)]
        k += 1
        buf[k] = v
        if stop_mask[v]:
            return buf[: k + 1].copy(), 0
        if not region_ok[v]:
            return buf[: k + 1].copy(), 1
    return buf[: k + 1].copy(), 2
