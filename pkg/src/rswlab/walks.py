"""Random-walk machinery: crossing estimators, exact hitting solvers,
annulus circuits, heat-kernel estimation, and the escape experiment.

The Monte Carlo estimators and the discrete-harmonic solver form a
deliberate dual route: every stochastic estimate here can be checked
against an exact sparse linear solve on small instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import cg, spsolve

from rswlab import rng as rnglib
from rswlab._kernels import (
    crossing_batch,
    heat_kernel_batch,
    lattice_crossing_batch,
    walk_steps_trace,
)
from rswlab.graphs import EmbeddedGraph, Rect

DIRECT_SOLVE_CAP = 2000


class SingularSystemError(RuntimeError):
    """A free component touches neither the target nor the kill set."""


# ------------------------------------------------------------- Wilson CI

def wilson_ci(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a Bernoulli proportion."""
    if trials == 0:
        return (0.0, 1.0)
    from scipy.stats import norm

    z = float(norm.ppf(0.5 + level / 2.0))
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    return (max(0.0, center - half), min(1.0, center + half))


# ------------------------------------------------------------ walk trace

@dataclass
class WalkTrace:
    start: int
    vertices: np.ndarray
    stop_reason: str          # "hit-target" | "exited-region" | "cap"
    tau: int | None           # index of the first exit step, if any

    @property
    def steps(self) -> int:
        return len(self.vertices) - 1

    def tobytes(self) -> bytes:
        return self.vertices.astype(np.int64).tobytes()


def run_walk(
    g: EmbeddedGraph,
    start: int,
    seed: int,
    step_cap: int,
    target: np.ndarray | set | None = None,
    region: Rect | None = None,
) -> WalkTrace:
    """Simple random walk with uniform-neighbor steps.

    Stops on hitting a target vertex or on the first step landing outside
    ``region``; hitting the step cap is reported explicitly in the stop
    reason, never silently truncated.  Deterministic given (g, start, seed).
    """
    if not (0 <= start < g.n_vertices):
        raise ValueError("start vertex not in graph")
    if step_cap <= 0:
        raise ValueError("step_cap must be positive")
    stop_mask = np.zeros(g.n_vertices, dtype=np.bool_)
    if target is not None:
        stop_mask[np.asarray(list(target) if isinstance(target, set) else target,
                             dtype=np.int64)] = True
    if region is None:
        region_ok = np.ones(g.n_vertices, dtype=np.bool_)
    else:
        region_ok = np.asarray(region.contains(g.xs, g.ys), dtype=np.bool_)
    gen = rnglib.generator(seed, 0)
    trace, reason = walk_steps_trace(
        g.indptr, g.indices, stop_mask, region_ok, start, step_cap, gen
    )
    reason_str = ("hit-target", "exited-region", "cap")[reason]
    tau = len(trace) - 1 if reason == 1 else None
    return WalkTrace(start=start, vertices=trace, stop_reason=reason_str, tau=tau)


# --------------------------------------------------------- crossing spec

@dataclass(frozen=True)
class CrossingSpec:
    """Rectangle-crossing geometry: cross the long direction between two
    landing squares.

    The canonical aspect is the 3:1 rectangle of half-length 3m and
    half-width m with landing squares of side m centered on the axis at
    distance 2m from the center; :meth:`hard` builds exactly that.  The
    general form (used by annulus strips) keeps the same landing-square
    rule: squares of side ``half_wid`` centered at ``±(half_len -
    half_wid)``.
    """

    z: tuple[float, float]
    half_len: float
    half_wid: float
    orientation: str = "h"    # "h" crosses along x, "v" along y

    def __post_init__(self):
        if self.half_len <= 1.5 * self.half_wid:
            raise ValueError("half_len must exceed 1.5 * half_wid (disjoint squares)")
        if self.orientation not in ("h", "v"):
            raise ValueError("orientation must be 'h' or 'v'")

    @classmethod
    def hard(cls, z: tuple[float, float], m: float, orientation: str = "h") -> "CrossingSpec":
        """3:1 rectangle of half-width m centered at z."""
        return cls(z=(float(z[0]), float(z[1])), half_len=3.0 * m, half_wid=m,
                   orientation=orientation)

    @property
    def m(self) -> float:
        return self.half_wid

    def _axes(self) -> tuple[float, float]:
        return (1.0, 0.0) if self.orientation == "h" else (0.0, 1.0)

    @property
    def rect(self) -> Rect:
        if self.orientation == "h":
            return Rect(self.z[0], self.z[1], self.half_len, self.half_wid)
        return Rect(self.z[0], self.z[1], self.half_wid, self.half_len)

    def _square(self, sign: float) -> Rect:
        ax, ay = self._axes()
        off = sign * (self.half_len - self.half_wid)
        return Rect.square(
            (self.z[0] + ax * off, self.z[1] + ay * off), self.half_wid / 2.0
        )

    @property
    def b1(self) -> Rect:
        return self._square(-1.0)

    @property
    def b2(self) -> Rect:
        return self._square(+1.0)

    def translated(self, dx: float, dy: float) -> "CrossingSpec":
        return CrossingSpec(
            (self.z[0] + dx, self.z[1] + dy), self.half_len, self.half_wid,
            self.orientation,
        )

    def rotated90(self) -> "CrossingSpec":
        """Spec for the graph rotated by +90 degrees about the origin."""
        return CrossingSpec(
            (-self.z[1], self.z[0]), self.half_len, self.half_wid,
            "v" if self.orientation == "h" else "h",
        )


def _crossing_labels(g: EmbeddedGraph, spec: CrossingSpec) -> np.ndarray:
    """0 free, 1 in the target square, 2 outside the rectangle."""
    labels = np.zeros(g.n_vertices, dtype=np.int8)
    inside = spec.rect.contains(g.xs, g.ys)
    labels[~inside] = 2
    in_b2 = spec.b2.contains(g.xs, g.ys)
    labels[in_b2 & inside] = 1
    return labels


@dataclass
class CrossingEstimate:
    spec: CrossingSpec
    starts: np.ndarray
    trials: int
    successes: np.ndarray
    capped: np.ndarray
    ci_level: float
    status: str               # "ok" | "vacuous-start" | "vacuous-target"

    @property
    def p_hat(self) -> np.ndarray:
        return self.successes / max(self.trials, 1)

    def intervals(self) -> np.ndarray:
        return np.array(
            [wilson_ci(int(s), self.trials, self.ci_level) for s in self.successes]
        )

    @property
    def min_p(self) -> float:
        return float(self.p_hat.min()) if len(self.starts) else math.nan

    def verdict(self, c: float) -> "CrossingVerdict":
        if self.status != "ok":
            return CrossingVerdict(None, False, self.status)
        ci = self.intervals()
        crossable = bool(np.all(self.p_hat >= c))
        # uncertain when some start's interval straddles the threshold
        uncertain = bool(np.any((ci[:, 0] < c) & (ci[:, 1] > c)))
        return CrossingVerdict(crossable, uncertain, "ok")


@dataclass(frozen=True)
class CrossingVerdict:
    crossable: bool | None    # None when vacuous
    uncertain: bool
    status: str


def estimate_crossing(
    g: EmbeddedGraph,
    spec: CrossingSpec,
    trials: int,
    seed: int,
    step_cap: int = 10_000_000,
    ci_level: float = 0.95,
) -> CrossingEstimate:
    """Monte Carlo crossing probabilities from every start vertex.

    For each vertex in the left landing square, runs ``trials`` walks and
    counts those entering the right landing square before stepping outside
    the rectangle.  The crossability verdict against a threshold takes the
    minimum over starts.
    """
    starts = g.vertices_in(spec.b1)
    if len(starts) == 0:
        return CrossingEstimate(spec, starts, trials, np.zeros(0, np.int64),
                                np.zeros(0, np.int64), ci_level, "vacuous-start")
    if len(g.vertices_in(spec.b2)) == 0:
        return CrossingEstimate(spec, starts, trials, np.zeros(len(starts), np.int64),
                                np.zeros(len(starts), np.int64), ci_level,
                                "vacuous-target")
    base_seed = np.uint64(rnglib.kernel_seed(seed, 0))
    lattice = _lattice_index_geometry(g, spec)
    if lattice is not None:
        sx, sy, bounds = lattice
        succ, fail, capped = lattice_crossing_batch(
            sx[starts], sy[starts], *bounds, trials, step_cap, base_seed
        )
    else:
        labels = _crossing_labels(g, spec)
        succ, fail, capped = crossing_batch(
            g.indptr, g.indices, labels, starts.astype(np.int64), trials, step_cap,
            base_seed,
        )
    return CrossingEstimate(spec, starts, trials, succ, capped, ci_level, "ok")


def _lattice_index_geometry(g: EmbeddedGraph, spec: CrossingSpec):
    """Integer-index geometry for the coordinate fast path, when valid.

    Valid only when the graph is a full lattice whose grid strictly
    contains the crossing rectangle (every in-rectangle vertex then has
    all four neighbors), so the coordinate walk is distribution-identical
    to the graph walk.
    """
    if g.meta.get("env") != "lattice":
        return None
    h = float(g.meta["mesh"])
    nx, ny = g.meta["nx"], g.meta["ny"]
    x0, y0 = float(g.xs[0]), float(g.ys[0])

    def span(lo, hi, origin, count):
        i0 = int(math.ceil((lo - origin) / h - 1e-9))
        i1 = int(math.floor((hi - origin) / h + 1e-9))
        return i0, i1

    r = spec.rect
    rx = span(r.bounds[0], r.bounds[1], x0, nx)
    ry = span(r.bounds[2], r.bounds[3], y0, ny)
    if rx[0] < 1 or ry[0] < 1 or rx[1] > nx - 2 or ry[1] > ny - 2:
        return None
    b2 = spec.b2
    bx = span(b2.bounds[0], b2.bounds[1], x0, nx)
    by = span(b2.bounds[2], b2.bounds[3], y0, ny)
    sx = np.rint((g.xs - x0) / h).astype(np.int64)
    sy = np.rint((g.ys - y0) / h).astype(np.int64)
    bounds = (rx[0], rx[1], ry[0], ry[1], bx[0], bx[1], by[0], by[1])
    return sx, sy, bounds


@dataclass
class ExactCrossing:
    spec: CrossingSpec
    starts: np.ndarray
    values: np.ndarray        # exact crossing probability per start
    residual: float
    status: str

    @property
    def min_p(self) -> float:
        return float(self.values.min()) if len(self.starts) else math.nan

    def verdict(self, c: float) -> CrossingVerdict:
        if self.status != "ok":
            return CrossingVerdict(None, False, self.status)
        return CrossingVerdict(bool(np.all(self.values >= c)), False, "ok")


def exact_crossing(g: EmbeddedGraph, spec: CrossingSpec) -> ExactCrossing:
    """Exact crossing probabilities via the discrete Dirichlet solver.

    Vertices outside the rectangle act as killing boundary (value 0), the
    target square as value 1; start values are read off the solution.
    """
    starts = g.vertices_in(spec.b1)
    if len(starts) == 0:
        return ExactCrossing(spec, starts, np.zeros(0), 0.0, "vacuous-start")
    labels = _crossing_labels(g, spec)
    target = np.nonzero(labels == 1)[0]
    if len(target) == 0:
        return ExactCrossing(spec, starts, np.zeros(len(starts)), 0.0, "vacuous-target")
    kill = np.nonzero(labels == 2)[0]
    sol = solve_hitting_exact(g, target, kill, restrict=np.nonzero(labels != 2)[0])
    return ExactCrossing(spec, starts, sol.h[starts], sol.residual, "ok")


# ------------------------------------------------------- hitting solver

@dataclass
class HittingSolution:
    h: np.ndarray             # per-vertex probability, 1 on target, 0 on kill
    residual: float           # max harmonicity defect over free vertices
    free: np.ndarray


def solve_hitting_exact(
    g: EmbeddedGraph,
    target: np.ndarray,
    kill: np.ndarray,
    restrict: np.ndarray | None = None,
) -> HittingSolution:
    """Discrete Dirichlet problem: h = 1 on target, 0 on kill, and equal to
    the neighbor average elsewhere.

    ``restrict`` limits the free unknowns to a vertex subset (used by the
    crossing oracle so that far-away vertices outside the rectangle do not
    enter the system); transition probabilities always use full degrees.
    """
    target = np.asarray(target, dtype=np.int64)
    kill = np.asarray(kill, dtype=np.int64)
    if len(np.intersect1d(target, kill)):
        raise ValueError("target and kill sets must be disjoint")
    h = np.zeros(g.n_vertices)
    h[target] = 1.0
    fixed = np.zeros(g.n_vertices, dtype=bool)
    fixed[target] = True
    fixed[kill] = True
    if restrict is None:
        free = np.nonzero(~fixed)[0]
    else:
        rmask = np.zeros(g.n_vertices, dtype=bool)
        rmask[np.asarray(restrict, dtype=np.int64)] = True
        free = np.nonzero(rmask & ~fixed)[0]
    if len(free) == 0:
        return HittingSolution(h, 0.0, free)

    # reachability: every free vertex must see the absorbing set
    col = {int(v): i for i, v in enumerate(free)}
    seen = np.zeros(g.n_vertices, dtype=bool)
    frontier = list(target) + list(kill)
    for v in frontier:
        seen[v] = True
    while frontier:
        nxt = []
        for v in frontier:
            for w in g.neighbors(v):
                w = int(w)
                if w in col and not seen[w]:
                    seen[w] = True
                    nxt.append(w)
        frontier = nxt
    orphans = free[~seen[free]]
    if len(orphans):
        raise SingularSystemError(
            f"free component not touching target or kill; {len(orphans)} vertices, "
            f"e.g. {orphans[:5].tolist()}"
        )

    rows, cols, vals = [], [], []
    b = np.zeros(len(free))
    for i, v in enumerate(free):
        nb = g.neighbors(v)
        rows.append(i)
        cols.append(i)
        vals.append(float(len(nb)))
        for w in nb:
            w = int(w)
            j = col.get(w)
            if j is not None:
                rows.append(i)
                cols.append(j)
                vals.append(-1.0)
            else:
                b[i] += h[w]   # 1 for target neighbors, 0 for killed/outside
    L = csr_matrix((vals, (rows, cols)), shape=(len(free), len(free)))
    if len(free) <= DIRECT_SOLVE_CAP:
        x = spsolve(L.tocsc(), b)
    else:
        x, info = cg(L, b, rtol=1e-13, atol=0.0, maxiter=10 * len(free))
        if info != 0:
            x = spsolve(L.tocsc(), b)
    h[free] = np.clip(x, 0.0, 1.0)

    # harmonicity defect
    residual = 0.0
    for v in free:
        nb = g.neighbors(v)
        residual = max(residual, abs(h[v] - h[nb].mean()))
    if residual >= 1e-10:
        raise RuntimeError(f"hitting solve residual {residual:.3e} exceeds 1e-10")
    return HittingSolution(h, residual, free)


# ------------------------------------------------------------- annulus

def annulus_strips(z: tuple[float, float], m: float, n: float) -> list[CrossingSpec]:
    """Four crossing rectangles tiling the square annulus between the
    half-widths m and n: top and bottom strips plus left and right
    rotations, each of half-length n and half-width (n - m)/2."""
    if not n > m > 0:
        raise ValueError("need n > m > 0")
    b = (n - m) / 2.0
    mid = (n + m) / 2.0
    zx, zy = z
    return [
        CrossingSpec((zx, zy - mid), n, b, "h"),
        CrossingSpec((zx, zy + mid), n, b, "h"),
        CrossingSpec((zx - mid, zy), n, b, "v"),
        CrossingSpec((zx + mid, zy), n, b, "v"),
    ]


@dataclass
class AnnulusResult:
    strips: list[CrossingSpec]
    verdicts: list[CrossingVerdict]

    @property
    def all_vacuous(self) -> bool:
        return all(v.crossable is None for v in self.verdicts)

    @property
    def any_vacuous(self) -> bool:
        return any(v.crossable is None for v in self.verdicts)

    @property
    def crossable(self) -> bool | None:
        """Conjunction of strip verdicts; None while any strip is vacuous."""
        if self.any_vacuous:
            return None
        return all(v.crossable for v in self.verdicts)

    @property
    def uncertain(self) -> bool:
        return any(v.uncertain for v in self.verdicts)


def annulus_crossable(
    g: EmbeddedGraph,
    z: tuple[float, float],
    m: float,
    n: float,
    c: float,
    trials: int,
    seed: int,
    method: str = "mc",
) -> AnnulusResult:
    """Conjunction of the four strip crossings around the annulus.

    With all four strips crossable at level c, a walk can make a full turn
    in the annulus with probability at least c**4.
    """
    strips = annulus_strips(z, m, n)
    verdicts = []
    for k, spec in enumerate(strips):
        if method == "exact":
            verdicts.append(exact_crossing(g, spec).verdict(c))
        else:
            est = estimate_crossing(g, spec, trials, rnglib.derive_seed(seed, k))
            verdicts.append(est.verdict(c))
    return AnnulusResult(strips, verdicts)


# ----------------------------------------------------------- heat kernel

@dataclass
class HeatKernelEstimate:
    x: int
    y: int
    times: np.ndarray
    q_hat: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    t_q: np.ndarray               # t * q_hat(t) diagnostics
    window: tuple[float, float] | None
    window_min_tq: float | None   # min of t*q over query times in the window


def estimate_heat_kernel(
    g: EmbeddedGraph,
    rect: Rect,
    x: int,
    y: int,
    times,
    trials: int,
    seed: int,
    window: tuple[float, float] | None = None,
    ci_level: float = 0.95,
) -> HeatKernelEstimate:
    """Killed continuous-time heat kernel estimate q_t(x, y).

    Simulates unit-rate continuous-time walks killed on exiting ``rect``
    and reports the fraction alive and sitting at ``y`` at each query time,
    plus the t*q diagnostic over an optional time window.
    """
    times = np.asarray(sorted(float(t) for t in times))
    if not (rect.contains(g.xs[x], g.ys[x]) and rect.contains(g.xs[y], g.ys[y])):
        raise ValueError("x and y must lie in the rectangle")
    alive = np.asarray(rect.contains(g.xs, g.ys), dtype=np.bool_)
    positive = times > 0
    q = np.zeros(len(times))
    if positive.any():
        pos = heat_kernel_batch(
            g.indptr, g.indices, alive, x, times[positive], trials,
            np.uint64(rnglib.kernel_seed(seed, 0)),
        )
        q[positive] = (pos == y).mean(axis=0)
    q[~positive] = 1.0 if x == y else 0.0
    ci = np.array([wilson_ci(int(round(p * trials)), trials, ci_level) for p in q])
    t_q = times * q
    wmin = None
    if window is not None:
        sel = (times >= window[0]) & (times <= window[1])
        wmin = float(t_q[sel].min()) if sel.any() else math.nan
    return HeatKernelEstimate(x, y, times, q, ci[:, 0], ci[:, 1], t_q, window, wmin)


# -------------------------------------------------------------- escape

@dataclass
class EscapeCase:
    v: int
    K: np.ndarray
    d_k: float                # Euclidean distance from v to K
    d_boundary: float         # Euclidean distance from v to the domain edge
    estimate: float
    ci: tuple[float, float]

    @property
    def ratio(self) -> float:
        return self.d_k / self.d_boundary


@dataclass
class EscapeReport:
    cases: list[EscapeCase]
    exponent: float | None    # fitted power of estimate ~ c * ratio**exponent


def beurling_experiment(
    g: EmbeddedGraph,
    D: Rect,
    cases: list[tuple[int, np.ndarray]],
    trials: int,
    seed: int,
    step_cap: int = 10_000_000,
) -> EscapeReport:
    """Escape-before-hitting estimates with a power-law fit.

    Each case is (v, K): estimate the probability that the walk from v
    exits the square of half-width d(v, boundary of D) around v before
    hitting the connected set K.  Across cases the exponent of
    estimate ~ c * (d(v,K)/d(v,dD))**exponent is fitted by least squares
    on the cases with informative estimates.
    """
    out = []
    for k, (v, K) in enumerate(cases):
        K = np.asarray(K, dtype=np.int64)
        if v in set(int(u) for u in K):
            raise ValueError("v must not belong to K")
        vx, vy = g.position(v)
        d_bdry = D.boundary_distance(vx, vy)
        if d_bdry <= 0:
            raise ValueError("v must lie strictly inside D")
        box = Rect.square((vx, vy), d_bdry)
        labels = np.zeros(g.n_vertices, dtype=np.int8)
        labels[~np.asarray(box.contains(g.xs, g.ys), dtype=bool)] = 1    # escape
        labels[K] = 2                                                     # hit K
        succ, fail, capped = crossing_batch(
            g.indptr, g.indices, labels, np.array([v], dtype=np.int64),
            trials, step_cap, np.uint64(rnglib.kernel_seed(seed, k)),
        )
        d_k = float(np.sqrt((g.xs[K] - vx) ** 2 + (g.ys[K] - vy) ** 2).min())
        out.append(
            EscapeCase(
                v=v, K=K, d_k=d_k, d_boundary=d_bdry,
                estimate=float(succ[0]) / trials,
                ci=wilson_ci(int(succ[0]), trials),
            )
        )
    informative = [c for c in out if 0.0 < c.estimate < 1.0 and 0 < c.ratio < 1]
    exponent = None
    if len(informative) >= 2:
        lx = np.log([c.ratio for c in informative])
        ly = np.log([c.estimate for c in informative])
        exponent = float(np.polyfit(lx, ly, 1)[0])
    return EscapeReport(out, exponent)


# ------------------------------------------------------------- exports

CROSSING_CSV_HEADER = "env,seed,z_x,z_y,m,start_id,trials,successes,p_hat,ci_low,ci_high"


def crossing_csv_rows(est: CrossingEstimate, env: str, seed: int) -> list[str]:
    rows = []
    ci = est.intervals() if len(est.starts) else np.zeros((0, 2))
    for i, s in enumerate(est.starts):
        rows.append(
            f"{env},{seed},{est.spec.z[0]:.10g},{est.spec.z[1]:.10g},"
            f"{est.spec.m:.10g},{int(s)},{est.trials},{int(est.successes[i])},"
            f"{est.p_hat[i]:.10g},{ci[i, 0]:.10g},{ci[i, 1]:.10g}"
        )
    return rows


def hitting_csv(sol: HittingSolution) -> str:
    lines = ["vertex_id,h"]
    for v in range(len(sol.h)):
        lines.append(f"{v},{sol.h[v]:.12g}")
    return "\n".join(lines) + "\n"
