"""Finite-time Lyapunov exponents and the first (exponent-based) criterion.

Exponents come from the exact singular values of the renormalized
fundamental matrix.  Once ``cond(X)`` passes ``COND_LIMIT`` the small
singular values drown in rounding, so the partial products
``s_1 ... s_k`` are read off the spectral norms of the multiplicative
compounds, which are integrated alongside ``X`` by their own linear flows.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .certificate import (DEFAULT_MARGIN, ContractionCertificate, INCONCLUSIVE,
                          verdict_from_bound)
from .errors import InputError
from .flow import CERTIFY, DynamicalSystem, IntegratorOptions, integrate, variational_flow
from .linalg import FractionalDimension
from .region import Region

COND_LIMIT = 1e12
MONOTONE_TOL = 1e-3


def worker_count(default: int = 1) -> int:
    """Worker cap from ``CONTRACTA_THREADS`` (at least 1)."""
    try:
        return max(1, int(os.environ.get("CONTRACTA_THREADS", default)))
    except ValueError:
        return default


def _log_sv(state, n: int):
    """Log singular values of the true fundamental matrix and a compound flag."""
    if state.cond() <= COND_LIMIT or not state.compounds:
        return state.log_singular_values(), False
    partial = np.array([state.log_compound_norm(k) for k in range(n + 1)])
    return np.diff(partial), True


def _compound_orders(n: int):
    return tuple(range(2, n + 1))


def exponent_path(sys: DynamicalSystem, x0, horizons, opts: IntegratorOptions = CERTIFY):
    """Exponents ``(H, n)`` at each horizon, plus per-horizon compound flags."""
    horizons = np.asarray(horizons, dtype=float)
    if np.any(horizons <= 0):
        raise InputError("horizons must be positive")
    order = np.argsort(horizons)
    hs = horizons[order]
    _, states = variational_flow(sys, x0, float(hs[-1]), opts, checkpoints=list(hs),
                                 compounds=_compound_orders(sys.n))
    lam = np.empty((len(hs), sys.n))
    used = np.zeros(len(hs), dtype=bool)
    for j, (h, st) in enumerate(zip(hs, states)):
        ls, flag = _log_sv(st, sys.n)
        lam[j] = ls / h
        used[j] = flag
    inv = np.empty_like(order)
    inv[order] = np.arange(len(order))
    return lam[inv], used[inv]


def finite_time_exponents(sys: DynamicalSystem, x0, t: float,
                          opts: IntegratorOptions = CERTIFY) -> np.ndarray:
    """Descending ``Lambda_i(t, x0) = ln(alpha_i) / t``."""
    if not t > 0:
        raise InputError("t must be positive")
    lam, _ = exponent_path(sys, x0, [t], opts)
    return lam[0]


def sigma_from_exponents(lam, dim: FractionalDimension):
    w = dim.weights()
    return np.asarray(lam) @ w


def sigma_d(sys: DynamicalSystem, x0, t: float, dim: FractionalDimension,
            opts: IntegratorOptions = CERTIFY) -> float:
    """``Sigma_d(t, x0) = (1/t) ln omega_d(X(t, x0))``."""
    if dim.n != sys.n:
        raise InputError("dimension mismatch")
    return float(sigma_from_exponents(finite_time_exponents(sys, x0, t, opts), dim))


@dataclass(frozen=True)
class ExponentReport:
    """Grid-by-horizon table of exponents and Sigma_d.

    ``lambdas`` has shape ``(N, H, n)`` and ``sigma`` shape ``(N, H)`` for
    ``N`` grid points and ``H`` horizons.
    """

    dim: FractionalDimension
    points: np.ndarray
    horizons: np.ndarray
    lambdas: np.ndarray
    sigma: np.ndarray
    compound_used: np.ndarray
    grid_meta: dict = field(default_factory=dict)
    flags: tuple = ()

    @property
    def per_horizon(self) -> np.ndarray:
        return self.sigma.max(axis=0)

    @property
    def argmax_points(self) -> np.ndarray:
        return self.points[self.sigma.argmax(axis=0)]

    @property
    def bold_sigma(self) -> float:
        return float(self.per_horizon.min())

    def records(self):
        """Yield ``(x, t, Lambda, Sigma_d)`` rows."""
        for i, x in enumerate(self.points):
            for j, t in enumerate(self.horizons):
                yield x, float(t), self.lambdas[i, j], float(self.sigma[i, j])

    def to_dict(self) -> dict:
        return {
            "d": self.dim.d,
            "horizons": [float(t) for t in self.horizons],
            "perHorizon": [float(v) for v in self.per_horizon],
            "argmax": [[float(v) for v in p] for p in self.argmax_points],
            "boldSigmaEstimate": self.bold_sigma,
            "grid": self.grid_meta,
            "flags": list(self.flags),
        }


def default_horizons(t_max: float):
    """Geometric schedule ``1, 2, 4, ...`` closed by ``t_max``."""
    if not t_max > 0:
        raise InputError("t_max must be positive")
    hs, t = [], 1.0
    while t < t_max:
        hs.append(t)
        t *= 2
    hs.append(float(t_max))
    return hs


def _escapes(sys, region: Region, pts, t, opts):
    bad = []
    for p in pts:
        try:
            y = integrate(sys, p, t, opts).final
        except Exception:
            bad.append(p)
            continue
        if not region.contains(y):
            bad.append(p)
    return bad


def estimate_bold_sigma_d(sys: DynamicalSystem, region: Region, dim: FractionalDimension,
                          horizons, opts: IntegratorOptions = CERTIFY,
                          check_invariance: bool = False, workers: int = None) -> ExponentReport:
    """Estimate ``inf_t max_x Sigma_d(t, x)`` on a grid and a horizon list."""
    if dim.n != sys.n or region.n != sys.n:
        raise InputError("dimension mismatch")
    hs = np.asarray(horizons, dtype=float)
    if hs.ndim != 1 or len(hs) == 0 or np.any(hs <= 0) or np.any(np.diff(hs) <= 0):
        raise InputError("horizons must be positive and strictly increasing")
    pts = region.points()
    workers = worker_count() if workers is None else max(1, int(workers))

    def job(p):
        return exponent_path(sys, p, hs, opts)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(job, pts))
    else:
        results = [job(p) for p in pts]
    lam = np.stack([r[0] for r in results])
    used = np.stack([r[1] for r in results])
    sig = lam @ dim.weights()

    flags = []
    per = sig.max(axis=0)
    for j in range(1, len(hs)):
        if per[j] > per[j - 1] + MONOTONE_TOL:
            flags.append(f"non-monotone per-horizon maximum between t={hs[j-1]:g} and t={hs[j]:g}")
    if used.any():
        flags.append(f"compound flows used for {int(used.sum())} of {used.size} records (cond > {COND_LIMIT:g})")
    if check_invariance:
        bad = _escapes(sys, region, pts, float(hs[0]), opts)
        if bad:
            flags.append(f"{len(bad)} grid points leave the region within t={hs[0]:g}")
    meta = dict(region.meta(), points=int(len(pts)), horizons=[float(t) for t in hs])
    return ExponentReport(dim=dim, points=pts, horizons=hs, lambdas=lam, sigma=sig,
                          compound_used=used, grid_meta=meta, flags=tuple(flags))


def first_method_verdict(report: ExponentReport, margin: float = DEFAULT_MARGIN) -> ContractionCertificate:
    """Sign test on the estimated bold Sigma_d."""
    if report.sigma.size == 0:
        raise InputError("empty report")
    est = report.bold_sigma
    verdict = verdict_from_bound(est, margin)
    notes = ("evidence up to grid density and integration error, not a proof",) + report.flags
    return ContractionCertificate(method="first", dim=report.dim, bound=est, verdict=verdict,
                                  decay_rate=est, grid_meta=report.grid_meta, margin=margin,
                                  notes=notes)
