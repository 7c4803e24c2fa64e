"""Scale machinery for crossing statistics: per-point failure radii on a
dyadic ladder, the cutoff-scale formula, tail curves over environment
ensembles, and stretched-exponential fitting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from rswlab import rng as rnglib
from rswlab.graphs import EmbeddedGraph, Rect
from rswlab.walks import (
    AnnulusResult,
    CrossingSpec,
    annulus_crossable,
    estimate_crossing,
    exact_crossing,
    wilson_ci,
)


class UnderdeterminedFitError(ValueError):
    """Too few informative rows to fit the tail curve."""


def compute_R0(delta: float, eps: float, C: float, alpha: float) -> float:
    """Cutoff radius  delta * [ln(C / (eps * delta^2))]**(1/alpha).

    Requires the log argument to exceed 1 and alpha in (0, 1].
    """
    if delta <= 0 or eps <= 0 or C <= 0:
        raise ValueError("delta, eps, C must be positive")
    if not (0 < alpha <= 1):
        raise ValueError("alpha must lie in (0, 1]")
    arg = C / (eps * delta * delta)
    if arg <= 1.0:
        raise ValueError(f"log argument {arg:.6g} <= 1: cutoff undefined")
    return delta * math.log(arg) ** (1.0 / alpha)


# ----------------------------------------------------- per-point radius

@dataclass
class ScaleVerdict:
    scale: float              # inner radius 2^i delta
    crossable: bool | None    # None = some strip vacuous
    uncertain: bool
    annulus: AnnulusResult


@dataclass
class RadiusVerdict:
    z: tuple[float, float]
    delta: float
    c_mu: float
    R: float                  # point estimate (conservative: includes vacuous)
    R_low: float              # largest certainly-failing scale
    R_high: float             # largest failing-or-uncertain scale
    all_vacuous: bool
    scales: list[ScaleVerdict] = field(default_factory=list)


def compute_R_of_z(
    g: EmbeddedGraph,
    delta: float,
    z: tuple[float, float],
    c_mu: float,
    trials: int = 2000,
    seed: int = 0,
    method: str = "exact",
    domain_half: float = 10.0,
) -> RadiusVerdict:
    """Largest dyadic scale whose annulus fails the crossing test at z.

    Walks the ladder of annuli between radii 2^i delta and 2^(i+1) delta
    while the outer annulus fits inside the domain box.  A vacuous annulus
    (empty strip) counts as not crossable; Monte Carlo verdicts whose
    confidence interval straddles the threshold are propagated as an
    uncertainty interval [R_low, R_high] around the point value.
    """
    scales = []
    i = 0
    while 2.0 ** (i + 1) * delta <= domain_half:
        m = 2.0**i * delta
        res = annulus_crossable(
            g, z, m, 2 * m, c_mu, trials, rnglib.derive_seed(seed, i), method=method
        )
        scales.append(ScaleVerdict(m, res.crossable, res.uncertain, res))
        i += 1
    if not scales:
        raise ValueError("no dyadic annulus fits in the domain")
    R = 0.0
    R_low = 0.0
    R_high = 0.0
    for sv in scales:
        failed = sv.crossable is None or not sv.crossable
        if failed:
            R = max(R, sv.scale)
            R_high = max(R_high, sv.scale)
            if not sv.uncertain:
                R_low = max(R_low, sv.scale)
        elif sv.uncertain:
            R_high = max(R_high, sv.scale)
    return RadiusVerdict(
        z=z,
        delta=delta,
        c_mu=c_mu,
        R=R,
        R_low=R_low,
        R_high=R_high,
        all_vacuous=all(sv.crossable is None for sv in scales),
        scales=scales,
    )


@dataclass
class RswRadii:
    delta: float
    c_mu: float
    points: list[tuple[float, float]]
    verdicts: list[RadiusVerdict]
    coverage: float           # evaluated grid points / full delta-grid points

    @property
    def r_max(self) -> float:
        return max((v.R for v in self.verdicts), default=0.0)


def rsw_radii(
    g: EmbeddedGraph,
    delta: float,
    c_mu: float,
    points: Sequence[tuple[float, float]],
    trials: int = 2000,
    seed: int = 0,
    method: str = "exact",
    domain_half: float = 10.0,
) -> RswRadii:
    """Evaluate the failure radius on a subgrid of points.

    The full delta-grid of the domain is intractable at small mesh; the
    coverage field records which fraction of it was actually evaluated.
    """
    verdicts = []
    for k, z in enumerate(points):
        verdicts.append(
            compute_R_of_z(
                g, delta, z, c_mu, trials, rnglib.derive_seed(seed, k),
                method=method, domain_half=domain_half,
            )
        )
    full = (2.0 * domain_half / delta + 1) ** 2
    return RswRadii(delta, c_mu, list(points), verdicts, len(points) / full)


# ------------------------------------------------------------ tail curve

@dataclass
class CurveRow:
    n: float
    n_seeds: int
    n_fail: int
    fail_frac: float
    ci_low: float
    ci_high: float


def crossing_curve(
    make_env: Callable[[float, int], EmbeddedGraph],
    n_ladder: Sequence[float],
    c: float,
    env_seeds: int,
    seed: int,
    trials: int = 2000,
    method: str = "exact",
) -> list[CurveRow]:
    """Failure fraction of the hard-direction crossing across a scale ladder.

    For each n, draws ``env_seeds`` environments and counts those whose
    3n-by-n rectangle fails to be c-crossable; vacuous verdicts count as
    failures.
    """
    ladder = list(n_ladder)
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("n ladder must be strictly increasing")
    rows = []
    for ni, n in enumerate(ladder):
        fails = 0
        for es in range(env_seeds):
            env_seed = rnglib.derive_seed(seed, ni * env_seeds + es)
            g = make_env(n, env_seed)
            spec = CrossingSpec.hard((0.0, 0.0), float(n))
            if method == "exact":
                verdict = exact_crossing(g, spec).verdict(c)
            else:
                verdict = estimate_crossing(
                    g, spec, trials, rnglib.derive_seed(env_seed, 1)
                ).verdict(c)
            if verdict.crossable is not True:
                fails += 1
        lo, hi = wilson_ci(fails, env_seeds)
        rows.append(CurveRow(float(n), env_seeds, fails, fails / env_seeds, lo, hi))
    return rows


@dataclass
class TailFit:
    alpha: float
    c: float
    d: float
    residual: float
    n_rows_used: int


def fit_stretched_exponential(rows: Sequence[CurveRow] | Sequence[tuple]) -> TailFit:
    """Least-squares fit of fail_frac ~ d * exp(-c * n**alpha).

    Linearizes as ln(-ln(P/d)) = ln c + alpha ln n and profiles d over a
    grid above the largest observed fraction.  Uses only rows with
    fractions strictly inside (0, 1); fewer than 3 such rows is an error.
    """
    pts = []
    for r in rows:
        if isinstance(r, CurveRow):
            n, p = r.n, r.fail_frac
        else:
            n, p = float(r[0]), float(r[1])
        if 0.0 < p < 1.0:
            pts.append((n, p))
    if len(pts) < 3:
        raise UnderdeterminedFitError(
            f"need >= 3 rows with failure fraction in (0,1), got {len(pts)}"
        )
    ns = np.array([p[0] for p in pts])
    ps = np.array([p[1] for p in pts])
    pmax = ps.max()
    best = None
    for d in np.unique(np.concatenate([np.geomspace(pmax * 1.02, 1.0, 40), [1.0]])):
        y = np.log(-np.log(ps / d))
        x = np.log(ns)
        A = np.column_stack([x, np.ones_like(x)])
        coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
        ssr = float(res[0]) if len(res) else float(((A @ coef - y) ** 2).sum())
        if best is None or ssr < best[0]:
            best = (ssr, coef[0], math.exp(coef[1]), float(d))
    ssr, alpha, c, d = best
    return TailFit(alpha=alpha, c=c, d=d, residual=ssr, n_rows_used=len(pts))


def curve_csv(rows: Sequence[CurveRow]) -> str:
    lines = ["n,env_seeds,n_fail,fail_frac,ci_low,ci_high"]
    for r in rows:
        lines.append(
            f"{r.n:.10g},{r.n_seeds},{r.n_fail},{r.fail_frac:.10g},"
            f"{r.ci_low:.10g},{r.ci_high:.10g}"
        )
    return "\n".join(lines) + "\n"
