"""Search for metrics ``P(x) = P0 exp(gamma v(x))`` certifying a small dimension.

The smallest fractional part ``s`` is located by bisection; at each trial
``s`` a derivative-free inner search looks for ``(P0, gamma)`` with a
negative worst-case forward functional on the grid.  Several seed chains
run their own bisection and the smallest certified ``s`` wins.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import InputError
from .flow import DynamicalSystem
from .linalg import FractionalDimension, check_spd
from .metric import exponential_metric
from .region import Region
from .systems import Potential

PENALTY = 1e6
MIN_EIG = 1e-8


@dataclass(frozen=True)
class MetricFamily:
    """Parameter vector ``[lower-triangular L (log diagonal), g]``.

    ``P0 = L L^T`` rescaled to trace ``n`` and ``gamma = |g|``.
    """

    n: int
    params: np.ndarray
    potential: Potential

    def __post_init__(self):
        p = np.asarray(self.params, dtype=float).copy()
        if p.shape != (self.n * (self.n + 1) // 2 + 1,):
            raise InputError("parameter vector has the wrong length")
        p.setflags(write=False)
        object.__setattr__(self, "params", p)

    @staticmethod
    def size(n: int) -> int:
        return n * (n + 1) // 2 + 1

    @property
    def L(self) -> np.ndarray:
        n = self.n
        L = np.zeros((n, n))
        L[np.tril_indices(n)] = self.params[:-1]
        d = np.diag_indices(n)
        L[d] = np.exp(L[d])
        return L

    @property
    def P0(self) -> np.ndarray:
        L = self.L
        P = L @ L.T
        return P * (self.n / np.trace(P))

    @property
    def gamma(self) -> float:
        return abs(float(self.params[-1]))

    @classmethod
    def from_metric(cls, P0, gamma: float, potential: Potential) -> "MetricFamily":
        P0 = check_spd(P0)
        n = P0.shape[0]
        L = np.linalg.cholesky(P0 * (n / np.trace(P0)))
        vals = L[np.tril_indices(n)].copy()
        diag_pos = [i * (i + 1) // 2 + i for i in range(n)]
        vals[diag_pos] = np.log(vals[diag_pos])
        return cls(n, np.r_[vals, float(gamma)], potential)

    def field(self):
        return exponential_metric(self.P0, self.gamma, self.potential)


class FeasibilityProblem:
    """Grid data cached for repeated evaluation of the worst forward functional.

    For ``P = P0 exp(gamma v)`` the roots are the eigenvalues of
    ``B + B^T`` with ``B = L^T A L^{-T}`` shifted by ``gamma vdot``.
    """

    def __init__(self, sys: DynamicalSystem, region: Region, potential: Potential):
        self.sys = sys
        self.region = region
        self.potential = potential
        self.points = region.points()
        self.A = sys.jac_batch(self.points)
        self.vdot = np.asarray(potential.vdot(self.points), dtype=float)

    def roots(self, family: MetricFamily, idx=None) -> np.ndarray:
        A, vdot = (self.A, self.vdot) if idx is None else (self.A[idx], self.vdot[idx])
        L = np.linalg.cholesky(family.P0)
        Linv = np.linalg.inv(L)
        B = L.T @ A @ Linv.T
        eta = np.linalg.eigvalsh(B + np.swapaxes(B, -1, -2))[:, ::-1]
        return eta + family.gamma * vdot[:, None]

    def xi(self, family: MetricFamily, dim: FractionalDimension, idx=None) -> np.ndarray:
        return self.roots(family, idx) @ dim.weights()

    def worst_xi(self, family: MetricFamily, dim: FractionalDimension, idx=None) -> float:
        return float(self.xi(family, dim, idx).max())

    def objective(self, params, dim: FractionalDimension, idx=None) -> float:
        fam = MetricFamily(self.sys.n, params, self.potential)
        try:
            P0 = fam.P0
            if not np.all(np.isfinite(P0)):
                return math.inf
            lo = np.linalg.eigvalsh(P0)[0]
            val = self.worst_xi(fam, dim, idx)
        except (np.linalg.LinAlgError, FloatingPointError, ValueError):
            return math.inf
        return val + PENALTY * max(0.0, MIN_EIG - lo)


def feasibility(sys: DynamicalSystem, family: MetricFamily, region: Region,
                dim: FractionalDimension) -> float:
    """Worst forward functional over the grid; negative means feasible."""
    if dim.n != sys.n or family.n != sys.n:
        raise InputError("dimension mismatch")
    try:
        return FeasibilityProblem(sys, region, family.potential).worst_xi(family, dim)
    except np.linalg.LinAlgError:
        return math.inf


@dataclass(frozen=True)
class SynthesisOptions:
    restarts: int = 10
    seeds: Optional[Sequence[int]] = None
    max_eval: int = 1500
    s_tol: float = 1e-4
    margin: float = 1e-9
    simplex_step: float = 0.25
    init_scale: float = 0.5
    init: tuple = ()
    active_stride: int = 10
    exchange_rounds: int = 8
    exchange_batch: int = 16

    def __post_init__(self):
        if self.restarts < 1 or self.max_eval < 1:
            raise InputError("restarts and max_eval must be positive")
        if not 0 < self.s_tol < 1:
            raise InputError("s_tol must lie in (0, 1)")

    def seed_list(self):
        return list(range(self.restarts)) if self.seeds is None else [int(s) for s in self.seeds]


@dataclass(frozen=True)
class SynthesisResult:
    d0: int
    s_star: Optional[float]
    family: Optional[MetricFamily]
    worst_xi: float
    restarts: int
    seeds: tuple
    trace: tuple = ()
    chains: tuple = ()
    grid_meta: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.s_star is not None

    def to_dict(self) -> dict:
        return {
            "d0": self.d0,
            "sStar": self.s_star,
            "P0": None if self.family is None else [float(v) for v in self.family.P0.reshape(-1)],
            "gamma": None if self.family is None else self.family.gamma,
            "worstXi": self.worst_xi,
            "gridMeta": self.grid_meta,
            "seeds": list(self.seeds),
            "chains": [dict(c) for c in self.chains],
            "status": "feasible" if self.feasible else "infeasible-at-d0",
        }


class _Found(Exception):
    def __init__(self, params, value):
        self.params = params
        self.value = value


def _nelder_mead(problem: FeasibilityProblem, dim, start, opts: SynthesisOptions, idx):
    """Nelder-Mead on the active points, stopping as soon as the value turns negative."""
    best = [np.asarray(start, dtype=float), math.inf]

    def f(p):
        val = problem.objective(p, dim, idx)
        if val < best[1]:
            best[0], best[1] = np.array(p, dtype=float), val
        if val < -opts.margin:
            raise _Found(np.array(p, dtype=float), val)
        return val

    m = len(start)
    simplex = np.vstack([start, start + opts.simplex_step * np.eye(m)])
    try:
        minimize(f, start, method="Nelder-Mead",
                 options=dict(maxfev=opts.max_eval, initial_simplex=simplex,
                              xatol=1e-10, fatol=1e-13))
    except _Found as hit:
        return hit.params, hit.value, True
    return best[0], best[1], False


def _inner(problem: FeasibilityProblem, dim, start, opts: SynthesisOptions, active: set):
    """Exchange loop: optimize on the active points, verify on the full grid.

    Violating grid points are added to ``active`` (in place) until the
    candidate certifies on the whole grid or the round budget is spent.
    """
    p = np.asarray(start, dtype=float)
    for _ in range(opts.exchange_rounds):
        idx = np.fromiter(sorted(active), dtype=int)
        p, val, hit = _nelder_mead(problem, dim, p, opts, idx)
        if not hit:
            return p, val
        xi = problem.xi(MetricFamily(problem.sys.n, p, problem.potential), dim)
        worst = float(xi.max())
        if worst < -opts.margin:
            return p, worst
        viol = np.flatnonzero(xi >= -opts.margin)
        viol = viol[np.argsort(-xi[viol])][:opts.exchange_batch]
        active.update(int(i) for i in viol)
    return p, float(problem.objective(p, dim))


def _initial_params(n, seed, opts: SynthesisOptions, potential):
    rng = np.random.default_rng(seed)
    m = MetricFamily.size(n)
    p = rng.normal(0.0, opts.init_scale, m)
    p[-1] = abs(rng.normal(0.0, opts.init_scale))
    return p


def _initial_active(problem: FeasibilityProblem, opts: SynthesisOptions) -> set:
    return set(range(0, len(problem.points), max(1, int(opts.active_stride))))


def bisect_chain(problem: FeasibilityProblem, d0: int, start, opts: SynthesisOptions, label=""):
    """Bisection on ``s`` from one starting point; returns a chain summary."""
    n = problem.sys.n
    trace = []
    active = _initial_active(problem, opts)
    p = np.asarray(start, dtype=float)
    p1, v1 = _inner(problem, FractionalDimension(min(d0 + 1, n), n), p, opts, active)
    trace.append((1.0, v1, v1 < -opts.margin))
    if not v1 < -opts.margin:
        return dict(label=label, s_star=None, worst_xi=v1, params=p1, trace=trace)
    lo, hi, p, val = 0.0, 1.0, p1, v1
    while hi - lo > opts.s_tol:
        mid = 0.5 * (lo + hi)
        q, v = _inner(problem, FractionalDimension(d0 + mid, n), p, opts, active)
        ok = v < -opts.margin
        trace.append((mid, v, ok))
        if ok:
            hi, p, val = mid, q, v
        else:
            lo = mid
    return dict(label=label, s_star=hi, worst_xi=val, params=p, trace=trace,
                active=len(active))


def minimize_fractional_s(sys: DynamicalSystem, d0: int, region: Region, potential: Potential,
                          opts: SynthesisOptions = SynthesisOptions(),
                          workers: int = None) -> SynthesisResult:
    """Smallest certified ``s`` with ``d = d0 + s`` over the metric family.

    Chains are independent; with ``workers > 1`` they run in a thread pool
    and the result does not depend on the completion order.
    """
    n = sys.n
    if not 1 <= d0 < n:
        raise InputError("d0 must satisfy 1 <= d0 < n")
    problem = FeasibilityProblem(sys, region, potential)
    starts = []
    for k, (P0, g) in enumerate(opts.init):
        starts.append((f"init{k}", MetricFamily.from_metric(P0, g, potential).params))
    seeds = opts.seed_list()
    for seed in seeds:
        starts.append((f"seed{seed}", _initial_params(n, seed, opts, potential)))
    from .exponents import worker_count

    workers = worker_count() if workers is None else max(1, int(workers))
    run = lambda item: bisect_chain(problem, d0, item[1], opts, item[0])
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            chains = list(ex.map(run, starts))
    else:
        chains = [run(item) for item in starts]
    feasible = [c for c in chains if c["s_star"] is not None]
    summaries = tuple(dict(label=c["label"], sStar=c["s_star"], worstXi=float(c["worst_xi"]),
                           activePoints=c.get("active"))
                      for c in chains)
    meta = dict(region.meta(), points=int(len(problem.points)), activeStride=int(opts.active_stride))
    if not feasible:
        worst = min(float(c["worst_xi"]) for c in chains)
        return SynthesisResult(d0, None, None, worst, len(starts), tuple(seeds),
                               chains=summaries, grid_meta=meta)
    best = min(feasible, key=lambda c: (c["s_star"], c["worst_xi"]))
    fam = MetricFamily(n, best["params"], potential)
    worst = problem.worst_xi(fam, FractionalDimension(d0 + best["s_star"], n))
    trace = tuple((float(s), float(v), bool(ok)) for s, v, ok in best["trace"])
    return SynthesisResult(d0, float(best["s_star"]), fam, worst, len(starts), tuple(seeds),
                           trace=trace, chains=summaries, grid_meta=meta)


@dataclass(frozen=True)
class FixedDimensionResult:
    dim: FractionalDimension
    feasible: bool
    worst_xi: float
    family: MetricFamily
    attempts: int


def search_fixed_dimension(sys: DynamicalSystem, dim: FractionalDimension, region: Region,
                           potential: Potential, opts: SynthesisOptions = SynthesisOptions()
                           ) -> FixedDimensionResult:
    """Look for any family member with a negative worst functional at ``dim``."""
    problem = FeasibilityProblem(sys, region, potential)
    starts = [MetricFamily.from_metric(P0, g, potential).params for P0, g in opts.init]
    starts += [_initial_params(sys.n, s, opts, potential) for s in opts.seed_list()]
    best_p, best_v = None, math.inf
    for k, p in enumerate(starts, start=1):
        q, v = _inner(problem, dim, p, opts, _initial_active(problem, opts))
        if v < best_v:
            best_p, best_v = q, v
        if v < -opts.margin:
            return FixedDimensionResult(dim, True, v, MetricFamily(sys.n, q, potential), k)
    return FixedDimensionResult(dim, False, best_v, MetricFamily(sys.n, best_p, potential), len(starts))
