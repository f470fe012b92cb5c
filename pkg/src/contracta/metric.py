"""Second criterion: generalized eigenvalue roots in a state-dependent metric.

For a metric ``P(x)`` with orbital derivative ``Pdot(x)`` the roots at ``x``
solve ``det(A^T P + P A + Pdot - lambda P) = 0`` with ``A = Df(x)``.  Their
fractional partial sum ``Xi_d`` bounds the local d-volume growth rate of
the flow measured in the metric; a negative grid maximum ``Lambda``
certifies contraction with decay rate ``Lambda / 2``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_sylvester

from .certificate import (DEFAULT_MARGIN, INVALID_METRIC, ContractionCertificate,
                          verdict_from_bound)
from .errors import InputError, NumericalError
from .flow import CERTIFY, DynamicalSystem, IntegratorOptions, integrate, variational_flow
from .linalg import (FractionalDimension, check_spd, fractional_sum, fractional_sum_reverse,
                     log_omega_d, spd_inv_sqrt, spd_sqrt)
from .region import Region


@dataclass(frozen=True)
class MetricField:
    """State-dependent SPD metric.

    ``Pdot`` is the analytic orbital derivative; when it is ``None`` the
    derivative is taken by central differences along the flow.
    ``vectorized`` declares that ``P`` and ``Pdot`` accept stacks ``(N, n)``.
    """

    P: Callable
    Pdot: Optional[Callable] = None
    description: str = ""
    vectorized: bool = False

    def P_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.vectorized:
            return np.asarray(self.P(X), dtype=float)
        return np.stack([np.asarray(self.P(x), dtype=float) for x in X])

    def Pdot_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.vectorized:
            return np.asarray(self.Pdot(X), dtype=float)
        return np.stack([np.asarray(self.Pdot(x), dtype=float) for x in X])


def constant_metric(P0, description: str = "constant metric") -> MetricField:
    P0 = check_spd(P0).copy()
    n = P0.shape[0]

    def P(x):
        x = np.asarray(x)
        return np.broadcast_to(P0, x.shape[:-1] + (n, n)).copy()

    def Pdot(x):
        x = np.asarray(x)
        return np.zeros(x.shape[:-1] + (n, n))

    return MetricField(P, Pdot, description, vectorized=True)


def exponential_metric(P0, gamma: float, potential, description: str = "") -> MetricField:
    """``P(x) = P0 exp(gamma v(x))`` with ``Pdot = gamma vdot(x) P(x)``.

    ``potential`` needs vectorized ``v`` and ``vdot`` callables.
    """
    P0 = check_spd(P0).copy()
    gamma = float(gamma)

    def P(x):
        w = np.exp(gamma * np.asarray(potential.v(x), dtype=float))
        return w[..., None, None] * P0

    def Pdot(x):
        x = np.asarray(x, dtype=float)
        return (gamma * np.asarray(potential.vdot(x), dtype=float))[..., None, None] * P(x)

    desc = description or f"P0 exp({gamma:g} * {getattr(potential, 'name', 'v')})"
    return MetricField(P, Pdot, desc, vectorized=True)


@dataclass(frozen=True)
class CriterionRoots:
    """Descending roots ``lambda_1 >= ... >= lambda_n`` at one state."""

    lambdas: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        object.__setattr__(self, "lambdas", np.sort(lam)[::-1])

    def __len__(self):
        return len(self.lambdas)


def _sym(M):
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def criterion_roots(A, P, Pdot) -> CriterionRoots:
    """Roots of ``det(A^T P + P A + Pdot - lambda P)`` by Cholesky reduction."""
    A = np.asarray(A, dtype=float)
    P = check_spd(P)
    Pdot = np.asarray(Pdot, dtype=float)
    if A.shape != P.shape or Pdot.shape != P.shape:
        raise InputError("A, P and Pdot must have equal square shapes")
    L = np.linalg.cholesky(P)
    M = A.T @ P + P @ A + _sym(Pdot)
    Y = np.linalg.solve(L, M)
    B = np.linalg.solve(L, Y.T)
    return CriterionRoots(np.linalg.eigvalsh(_sym(B)))


def criterion_roots_sqrt(A, P, Pdot) -> CriterionRoots:
    """Independent route: eigenvalues of ``F + F^T``, ``F = S A S^-1 + Sdot S^-1``.

    ``S`` is the SPD square root of ``P`` and ``Sdot`` solves
    ``Sdot S + S Sdot = Pdot``.  Used as a test oracle.
    """
    A = np.asarray(A, dtype=float)
    S = spd_sqrt(P)
    Sinv = np.linalg.inv(S)
    Sdot = solve_sylvester(S, S, _sym(np.asarray(Pdot, dtype=float)))
    F = S @ A @ Sinv + Sdot @ Sinv
    return CriterionRoots(np.linalg.eigvalsh(F + F.T))


def criterion_roots_batch(A, P, Pdot):
    """Batched roots, shape ``(N, n)`` descending, and a mask of non-PD metrics."""
    A = np.asarray(A, dtype=float)
    P = _sym(np.asarray(P, dtype=float))
    Pdot = _sym(np.asarray(Pdot, dtype=float))
    N, n = A.shape[0], A.shape[-1]
    roots = np.full((N, n), np.nan)
    bad = np.zeros(N, dtype=bool)
    try:
        L = np.linalg.cholesky(P)
        ok = np.ones(N, dtype=bool)
    except np.linalg.LinAlgError:
        ok = np.array([_chol_ok(p) for p in P])
        L = np.zeros_like(P)
        L[ok] = np.linalg.cholesky(P[ok])
    bad = ~ok
    if ok.any():
        Lk, Ak, Pk = L[ok], A[ok], P[ok]
        M = np.swapaxes(Ak, -1, -2) @ Pk + Pk @ Ak + Pdot[ok]
        Y = np.linalg.solve(Lk, M)
        B = np.linalg.solve(Lk, np.swapaxes(Y, -1, -2))
        roots[ok] = np.linalg.eigvalsh(_sym(B))[:, ::-1]
    return roots, bad


def _chol_ok(p) -> bool:
    if not np.all(np.isfinite(p)):
        return False
    try:
        np.linalg.cholesky(p)
        return True
    except np.linalg.LinAlgError:
        return False


def xi_d(roots, dim: FractionalDimension):
    """Forward and reverse fractional sums of descending roots."""
    lam = roots.lambdas if isinstance(roots, CriterionRoots) else np.sort(np.asarray(roots, dtype=float))[::-1]
    if lam.shape[-1] != dim.n:
        raise InputError("root count does not match the dimension")
    return fractional_sum(lam, dim), fractional_sum_reverse(lam, dim)


def _flow_step(sys, x, f):
    return 1e-5 * (1.0 + np.abs(x).max()) / (1.0 + np.abs(f).max())


def orbital_derivative(field_: MetricField, sys: DynamicalSystem, x,
                       opts: IntegratorOptions = CERTIFY) -> np.ndarray:
    """``d/dt P(phi^t x)`` at ``t = 0``: analytic when available, else by the flow."""
    x = np.asarray(x, dtype=float)
    if field_.Pdot is not None:
        return _sym(np.asarray(field_.Pdot(x), dtype=float))
    h = _flow_step(sys, x, sys.rhs(x))
    try:
        xp = integrate(sys, x, h, opts).final
        xm = integrate(sys, x, -h, opts).final
    except NumericalError as exc:
        raise NumericalError(f"orbital derivative failed: {exc}") from exc
    D = (np.asarray(field_.P(xp)) - np.asarray(field_.P(xm))) / (2 * h)
    return _sym(D)


@dataclass(frozen=True)
class RootTable:
    """Per-point roots and functionals from a second-method sweep."""

    points: np.ndarray
    roots: np.ndarray
    xi_forward: np.ndarray
    xi_reverse: np.ndarray
    invalid: np.ndarray


def root_table(sys: DynamicalSystem, field_: MetricField, points, dim: FractionalDimension,
               opts: IntegratorOptions = CERTIFY, workers: int = 1) -> RootTable:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    A = sys.jac_batch(pts)
    P = field_.P_batch(pts)
    if field_.Pdot is not None:
        Pd = field_.Pdot_batch(pts)
    elif workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            Pd = np.stack(list(ex.map(lambda x: orbital_derivative(field_, sys, x, opts), pts)))
    else:
        Pd = np.stack([orbital_derivative(field_, sys, x, opts) for x in pts])
    roots, bad = criterion_roots_batch(A, P, Pd)
    w = dim.weights()
    fwd = roots @ w
    rev = roots[:, ::-1] @ w
    return RootTable(pts, roots, fwd, rev, bad)


def certify_second_method(sys: DynamicalSystem, field_: MetricField, region: Region,
                          dim: FractionalDimension, margin: float = DEFAULT_MARGIN,
                          opts: IntegratorOptions = CERTIFY, workers: int = None,
                          return_table: bool = False):
    """Grid maximum ``Lambda`` of the forward functional and minimum of the reverse one."""
    from .exponents import worker_count

    if dim.n != sys.n or region.n != sys.n:
        raise InputError("dimension mismatch")
    workers = worker_count() if workers is None else workers
    table = root_table(sys, field_, region.points(), dim, opts, workers)
    meta = dict(region.meta(), points=int(len(table.points)), metric=field_.description)
    if table.invalid.any():
        i = int(np.argmax(table.invalid))
        cert = ContractionCertificate(
            method="second", dim=dim, bound=math.nan, verdict=INVALID_METRIC,
            grid_meta=meta, margin=margin, offending_point=table.points[i],
            notes=(f"metric is not positive definite at {int(table.invalid.sum())} grid points",))
    else:
        i = int(np.argmax(table.xi_forward))
        lam = float(table.xi_forward[i])
        lam_minus = float(table.xi_reverse.min())
        meta["argmax"] = [float(v) for v in table.points[i]]
        cert = ContractionCertificate(
            method="second", dim=dim, bound=lam, verdict=verdict_from_bound(lam, margin),
            reverse_bound=lam_minus, decay_rate=lam / 2.0, grid_meta=meta, margin=margin,
            notes=("grid evaluation; states between grid points are not covered",))
    return (cert, table) if return_table else cert


@dataclass(frozen=True)
class ExpansionReport:
    """Metric-weighted d-volume expansion over a grid at horizon ``t``.

    ``log_omega`` holds ``ln omega_d(Y_x(t))`` per grid point;
    ``omega_max`` is the expansion factor of the time-``t`` map.
    """

    t: float
    dim: FractionalDimension
    points: np.ndarray
    log_omega: np.ndarray
    Lambda: Optional[float] = None

    @property
    def omega_max(self) -> float:
        return float(np.exp(self.log_omega.max()))

    @property
    def log_bound(self) -> Optional[float]:
        return None if self.Lambda is None else 0.5 * self.Lambda * self.t

    @property
    def gap(self) -> Optional[float]:
        """``ln bound - max ln omega``; nonnegative when the bound holds."""
        return None if self.Lambda is None else self.log_bound - float(self.log_omega.max())

    @property
    def holds(self) -> Optional[bool]:
        if self.Lambda is None:
            return None
        return bool(self.log_omega.max() <= self.log_bound + math.log1p(1e-6))


def weighted_log_omega(sys: DynamicalSystem, field_: MetricField, x, dim: FractionalDimension,
                       t: float, opts: IntegratorOptions = CERTIFY) -> float:
    """``ln omega_d(S(phi^t x) X(t, x) S(x)^-1)`` with the log scale kept separate."""
    st = variational_flow(sys, x, t, opts)
    S1 = spd_sqrt(field_.P(st.x))
    S0i = spd_inv_sqrt(field_.P(np.asarray(x, dtype=float)))
    Y = S1 @ st.X @ S0i
    sv = np.linalg.svd(Y, compute_uv=False)
    return log_omega_d(sv, dim) + dim.d * st.log_scale


def weighted_flow_expansion(sys: DynamicalSystem, field_: MetricField, region, dim: FractionalDimension,
                            t: float, Lambda: float = None, opts: IntegratorOptions = CERTIFY,
                            workers: int = None) -> ExpansionReport:
    """Evaluate ``omega_d(Y_x(t))`` over a region (or an explicit point array)."""
    from .exponents import worker_count

    if not t > 0:
        raise InputError("t must be positive")
    pts = region.points() if isinstance(region, Region) else np.atleast_2d(np.asarray(region, dtype=float))
    workers = worker_count() if workers is None else workers
    job = lambda x: weighted_log_omega(sys, field_, x, dim, t, opts)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            vals = np.array(list(ex.map(job, pts)))
    else:
        vals = np.array([job(x) for x in pts])
    return ExpansionReport(float(t), dim, pts, vals, None if Lambda is None else float(Lambda))
