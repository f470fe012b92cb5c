"""Orbital stability of periodic solutions.

Floquet multipliers and the Andronov-Witt test, the explicit periodic
metric built from the monodromy matrix, and the real-Schur similarity that
pushes singular values toward eigenvalue moduli.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import schur

from .errors import InputError, NumericalError
from .flow import (DynamicalSystem, IntegratorOptions, PeriodicOrbit, find_periodic_orbit,
                   integrate, monodromy, variational_flow)
from .linalg import spd_log, sym_expm
from .metric import MetricField, criterion_roots
from .region import Region

ORBIT_OPTS = IntegratorOptions(atol=1e-12, rtol=1e-12)

ORBITALLY_STABLE = "ORBITALLY-STABLE"
NOT_ORBITALLY_STABLE = "NOT-ORBITALLY-STABLE"
INCONCLUSIVE_CRITICAL = "INCONCLUSIVE-CRITICAL"


@dataclass(frozen=True)
class FloquetReport:
    """Multipliers sorted by descending modulus and the Andronov-Witt flag."""

    M: np.ndarray
    multipliers: np.ndarray
    trivial_residual: float
    andronov_witt: bool
    critical: bool
    T: float = math.nan
    x0: Optional[np.ndarray] = None

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.multipliers)


def floquet_multipliers(M, T: float = math.nan, x0=None, tol_aw: float = 1e-9,
                        tol_critical: float = 1e-6) -> FloquetReport:
    """Eigenvalues of the monodromy matrix and the test ``|rho_2| < 1 - tol_aw``."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or not np.all(np.isfinite(M)):
        raise InputError("M must be a finite square matrix")
    if abs(np.linalg.det(M)) == 0.0 or np.linalg.cond(M) > 1e15:
        raise InputError("monodromy matrix is singular")
    rho = np.linalg.eigvals(M)
    rho = rho[np.lexsort((-rho.imag, -np.abs(rho)))]
    mod = np.abs(rho)
    trivial = float(np.abs(rho - 1.0).min())
    second = mod[1] if len(mod) > 1 else 0.0
    return FloquetReport(M=M, multipliers=rho, trivial_residual=trivial,
                         andronov_witt=bool(second < 1.0 - tol_aw),
                         critical=bool(abs(second - 1.0) <= tol_critical),
                         T=float(T), x0=None if x0 is None else np.asarray(x0, dtype=float))


def _schur_blocks(T):
    n = T.shape[0]
    blocks, i = [], 0
    while i < n:
        if i + 1 < n and T[i + 1, i] != 0.0:
            blocks.append((i, 2))
            i += 2
        else:
            blocks.append((i, 1))
            i += 1
    return blocks


def precondition_similarity(G, kappa: float):
    """``Q`` with ``Q G Q^-1`` close to normal; returns ``(Q, deviation)``.

    ``G = Z T Z^T`` is the real Schur form.  Each 2x2 block is balanced to a
    scaled rotation and the block-diagonal scaling ``diag(kappa^i)`` damps the
    strictly upper part of ``T`` as ``kappa -> 0``.  ``deviation`` is the max
    gap between the sorted singular values of ``Q G Q^-1`` and the sorted
    eigenvalue moduli.
    """
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1] or not np.all(np.isfinite(G)):
        raise InputError("G must be a finite square matrix")
    if not 0 < kappa <= 1:
        raise InputError("kappa must lie in (0, 1]")
    T, Z = schur(G, output="real")
    if not (np.all(np.isfinite(T)) and np.all(np.isfinite(Z))):
        raise InputError("real Schur decomposition failed")
    n = G.shape[0]
    nvec = np.ones(n)
    dvec = np.ones(n)
    for power, (i, size) in enumerate(_schur_blocks(T), start=1):
        dvec[i:i + size] = kappa ** power
        if size == 2:
            beta, gamma = T[i, i + 1], T[i + 1, i]
            nvec[i + 1] = math.sqrt(abs(gamma / beta))
    Q = (1.0 / (dvec * nvec))[:, None] * Z.T
    H = Q @ G @ np.linalg.inv(Q)
    sv = np.linalg.svd(H, compute_uv=False)
    mods = np.sort(np.abs(np.linalg.eigvals(G)))[::-1]
    return Q, float(np.abs(sv - mods).max())


@dataclass
class PeriodicMetric:
    """Periodic metric ``P(t) = W^T exp(Xi t) W`` with ``W = Q X(t)^-1``.

    ``Xi = T^-1 Ln(Mh^T Mh)`` for the working-frame monodromy
    ``Mh = Q M Q^-1``.  In the working frame the metric
    ``Ph(t) = Q^-T P(t) Q^-1`` equals the identity at ``t = 0`` and ``t = T``.
    Along the orbit the criterion roots equal the eigenvalues of ``Xi``.

    ``P`` is continuous but in general not differentiable at ``t = 0 mod T``;
    ``evaluate`` returns the right derivative there.
    """

    sys: DynamicalSystem
    x0: np.ndarray
    T: float
    Q: np.ndarray
    Xi: np.ndarray
    times: np.ndarray
    states: np.ndarray
    Xs: np.ndarray
    opts: IntegratorOptions = ORBIT_OPTS

    @property
    def root_constants(self) -> np.ndarray:
        return np.sort(np.linalg.eigvalsh(self.Xi))[::-1]

    @property
    def M(self) -> np.ndarray:
        return self.Xs[-1]

    def _lookup(self, t: float):
        """State and fundamental matrix at phase ``t`` (mod T)."""
        tau = float(t) % self.T
        h = self.T / (len(self.times) - 1)
        k = int(round(tau / h))
        if abs(k * h - tau) <= 1e-12 * self.T:
            k = min(k, len(self.times) - 1)
            return self.states[k], self.Xs[k], tau
        k = int(math.floor(tau / h))
        st = variational_flow(self.sys, self.states[k], tau - self.times[k], self.opts)
        return st.x, st.matrix() @ self.Xs[k], tau

    def state(self, t: float) -> np.ndarray:
        return self._lookup(t)[0]

    def evaluate(self, t: float):
        """``(x(t), P(t), Pdot(t))`` with the analytic time derivative."""
        x, X, tau = self._lookup(t)
        W = self.Q @ np.linalg.inv(X)
        E = sym_expm(self.Xi * tau)
        P = W.T @ E @ W
        A = self.sys.jac(x)
        Pdot = -A.T @ P - P @ A + W.T @ (self.Xi @ E) @ W
        return x, 0.5 * (P + P.T), 0.5 * (Pdot + Pdot.T)

    def P(self, t: float) -> np.ndarray:
        return self.evaluate(t)[1]

    def P_hat(self, t: float) -> np.ndarray:
        Qi = np.linalg.inv(self.Q)
        return Qi.T @ self.P(t) @ Qi

    def numeric_Pdot(self, t: float, h: float = 1e-5) -> np.ndarray:
        D = (self.P(t + h) - self.P(t - h)) / (2 * h)
        return 0.5 * (D + D.T)

    def roots(self, t: float) -> np.ndarray:
        x, P, Pdot = self.evaluate(t)
        return criterion_roots(self.sys.jac(x), P, Pdot).lambdas

    def identity_residual(self) -> float:
        n = len(self.x0)
        return max(float(np.abs(self.P_hat(0.0) - np.eye(n)).max()),
                   float(np.abs(self._P_hat_end() - np.eye(n)).max()))

    def _P_hat_end(self) -> np.ndarray:
        # the end point of the lattice, not wrapped to phase 0
        X = self.Xs[-1]
        Qi = np.linalg.inv(self.Q)
        W = self.Q @ np.linalg.inv(X)
        P = W.T @ sym_expm(self.Xi * self.T) @ W
        return Qi.T @ P @ Qi


def construct_periodic_metric(sys: DynamicalSystem, x0, T: float, Q=None, lattice: int = 512,
                              opts: IntegratorOptions = ORBIT_OPTS) -> PeriodicMetric:
    """Build the periodic metric along the orbit through ``x0`` with period ``T``."""
    x0 = np.asarray(x0, dtype=float)
    if not T > 0:
        raise InputError("T must be positive")
    if lattice < 2:
        raise InputError("lattice needs at least two samples")
    times = np.linspace(0.0, T, lattice + 1)
    _, states = variational_flow(sys, x0, T, opts, checkpoints=list(times[1:]))
    xs = np.vstack([x0] + [s.x for s in states])
    Xs = np.stack([np.eye(sys.n)] + [s.matrix() for s in states])
    if np.abs(xs[-1] - x0).max() > 1e-6 * (1 + np.abs(x0).max()):
        raise InputError("x0 does not lie on a T-periodic orbit")
    Q = np.eye(sys.n) if Q is None else np.asarray(Q, dtype=float)
    Mh = Q @ Xs[-1] @ np.linalg.inv(Q)
    G = Mh.T @ Mh
    ev = np.linalg.eigvalsh(0.5 * (G + G.T))
    if not np.all(np.isfinite(G)) or ev[0] <= 0 or ev[-1] / ev[0] > 1e28:
        raise NumericalError("M^T M is too ill-conditioned; apply precondition_similarity first")
    Xi = spd_log(0.5 * (G + G.T)) / T
    return PeriodicMetric(sys, x0, float(T), Q, 0.5 * (Xi + Xi.T), times, xs, Xs, opts)


def auto_precondition(M, kappa0: float = 0.5, kappa_min: float = 1e-8):
    """Halve ``kappa`` until ``s_1 s_2`` of ``Q M Q^-1`` drops below one.

    Returns ``(Q, kappa)``; ``Q`` is the identity (``kappa = None``) when
    no preconditioning is needed or possible.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    sv = np.linalg.svd(M, compute_uv=False)
    mods = np.sort(np.abs(np.linalg.eigvals(M)))[::-1]
    if n < 2 or sv[0] * sv[1] < 1 or not mods[0] * mods[1] < 1:
        return np.eye(n), None
    kappa = kappa0
    Q = np.eye(n)
    while kappa >= kappa_min:
        Q, _ = precondition_similarity(M, kappa)
        s = np.linalg.svd(Q @ M @ np.linalg.inv(Q), compute_uv=False)
        if s[0] * s[1] < 1:
            return Q, kappa
        kappa /= 2
    return Q, kappa * 2


@dataclass
class OrbitalReport:
    orbit: Optional[PeriodicOrbit]
    floquet: FloquetReport
    metric: Optional[PeriodicMetric]
    kappa: Optional[float]
    lambda12_max: Optional[float]
    root_spread: Optional[float]
    pdot_mismatch: Optional[float]
    flag_i: bool
    flag_ii: Optional[bool]
    verdict: str
    notes: list = field(default_factory=list)

    @property
    def agreement(self) -> Optional[bool]:
        return None if self.flag_ii is None else self.flag_i == self.flag_ii

    def to_dict(self) -> dict:
        fr = self.floquet
        return {
            "x0": [float(v) for v in (fr.x0 if fr.x0 is not None else [])],
            "T": fr.T,
            "multipliers": [{"re": float(r.real), "im": float(r.imag), "modulus": float(abs(r))}
                            for r in fr.multipliers],
            "trivialResidual": fr.trivial_residual,
            "andronovWitt": fr.andronov_witt,
            "XiEigenvalues": None if self.metric is None else [float(v) for v in self.metric.root_constants],
            "lambda12Max": self.lambda12_max,
            "kappa": self.kappa,
            "rootSpread": self.root_spread,
            "pdotMismatch": self.pdot_mismatch,
            "flags": {"i": self.flag_i, "ii": self.flag_ii, "agreement": self.agreement},
            "verdict": self.verdict,
            "notes": list(self.notes),
        }


def orbital_stability_report(sys: DynamicalSystem, x_guess, T_guess: float, kappa="auto",
                             tol_aw: float = 1e-9, lattice: int = 512, samples: int = 64,
                             opts: IntegratorOptions = ORBIT_OPTS) -> OrbitalReport:
    """Andronov-Witt test and the metric test along a located periodic orbit."""
    orbit = find_periodic_orbit(sys, x_guess, T_guess, opts)
    M = monodromy(sys, orbit.x0, orbit.T, opts)
    fr = floquet_multipliers(M, orbit.T, orbit.x0, tol_aw=tol_aw)
    if fr.critical:
        return OrbitalReport(orbit, fr, None, None, None, None, None, False, None,
                             INCONCLUSIVE_CRITICAL, ["second multiplier on the unit circle"])
    if not fr.andronov_witt:
        return OrbitalReport(orbit, fr, None, None, None, None, None, False, None,
                             NOT_ORBITALLY_STABLE, ["a nontrivial multiplier lies outside the unit disc"])
    notes = []
    if kappa == "auto":
        Q, used = auto_precondition(M)
    elif kappa is None:
        Q, used = np.eye(sys.n), None
    else:
        Q, _ = precondition_similarity(M, float(kappa))
        used = float(kappa)
    if used is not None:
        notes.append(f"preconditioned with kappa={used:g}; P(0) = Q^T Q in original coordinates")
    pm = construct_periodic_metric(sys, orbit.x0, orbit.T, Q, lattice, opts)
    ts = pm.times[:-1][:: max(1, lattice // samples)]
    roots = np.array([pm.roots(t) for t in ts])
    lam12 = roots[:, 0] + roots[:, 1]
    spread = float(roots.std(axis=0).max())
    # P is only continuous across t = 0 mod T, so the check avoids the seam
    mism = max(float(np.abs(pm.evaluate(t)[2] - pm.numeric_Pdot(t)).max()
                     / (1 + np.abs(pm.evaluate(t)[2]).max())) for t in ts[1:5])
    ii = bool(lam12.max() < 0)
    verdict = ORBITALLY_STABLE if ii else INCONCLUSIVE_CRITICAL
    if not ii:
        notes.append("Andronov-Witt holds but the constructed metric gives lambda1 + lambda2 >= 0")
    return OrbitalReport(orbit, fr, pm, used, float(lam12.max()), spread, mism, True, ii, verdict, notes)


def andronov_witt_boundary(flag: Callable[[float], bool], lo: float, hi: float,
                           tol: float = 1e-3) -> float:
    """Bisect a parameter where ``flag`` (Andronov-Witt holds) switches value."""
    f_lo, f_hi = bool(flag(lo)), bool(flag(hi))
    if f_lo == f_hi:
        raise InputError("the flag does not change over the bracket")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if bool(flag(mid)) == f_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def normal_frame(v) -> np.ndarray:
    """Orthonormal basis ``(n-1, n)`` of the hyperplane orthogonal to ``v``."""
    v = np.asarray(v, dtype=float)
    Qm, _ = np.linalg.qr(np.column_stack([v, np.eye(len(v))]))
    return Qm[:, 1:len(v)].T


def tube_points(pm: PeriodicMetric, radius: float, n_phase: int = 16, n_ring: int = 8) -> np.ndarray:
    """Orbit samples plus rings of ``radius`` in the planes normal to the flow."""
    pts = []
    n = len(pm.x0)
    # phases sit midway between the n_phase marks so none lies on the seam t = 0
    for t in (np.arange(n_phase) + 0.5) * pm.T / n_phase:
        x = pm.state(t)
        pts.append(x)
        if radius <= 0:
            continue
        B = normal_frame(pm.sys.rhs(x))
        if n == 3:
            for psi in np.linspace(0.0, 2 * math.pi, n_ring, endpoint=False):
                pts.append(x + radius * (math.cos(psi) * B[0] + math.sin(psi) * B[1]))
        else:
            for b in B:
                pts.extend([x + radius * b, x - radius * b])
    return np.array(pts)


def tube_region(pm: PeriodicMetric, radius: float, n_phase: int = 16, n_ring: int = 8) -> Region:
    samples = pm.states[:-1]

    def near(p):
        return float(np.min(np.linalg.norm(samples - p, axis=1))) <= radius * 1.05 + pm.T / len(samples) * 1e-3

    return Region.from_points(tube_points(pm, radius, n_phase, n_ring),
                              label=f"tube of radius {radius:g} around the periodic orbit",
                              indicator=near)


def orbit_phase(pm: PeriodicMetric, x, iterations: int = 6) -> float:
    """Phase of the orbit point closest to ``x`` (lattice start, Newton polish)."""
    x = np.asarray(x, dtype=float)
    k = int(np.argmin(np.linalg.norm(pm.states[:-1] - x, axis=1)))
    theta = float(pm.times[k])
    y = pm.states[k]
    for _ in range(iterations):
        f = pm.sys.rhs(y)
        g = float((y - x) @ f)
        dg = float(f @ f + (y - x) @ (pm.sys.jac(y) @ f))
        if dg <= 0:
            break
        step = -g / dg
        step = max(-0.5 * pm.T / len(pm.times), min(0.5 * pm.T / len(pm.times), step))
        theta += step
        y = pm.state(theta)
        if abs(step) < 1e-13 * pm.T:
            break
    return theta % pm.T


def tube_metric(pm: PeriodicMetric) -> MetricField:
    """Extend the orbit metric to a neighbourhood through the nearest orbit point.

    The orbital derivative is left to the flow-based difference quotient.
    """
    return MetricField(P=lambda x: pm.P(orbit_phase(pm, x)), Pdot=None,
                       description="periodic metric extended by nearest-orbit phase")
