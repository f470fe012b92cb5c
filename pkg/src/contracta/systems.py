"""Benchmark systems with their closed-form side data.

* dissipative rigid body driven by a constant torque about the middle axis,
* the Rössler-type system ``x' = -y - z, y' = x, z' = -b z + a (y - y^2)``,
* the Langford system with its explicit 2*pi-periodic orbit.

Each constructor returns a bundle object holding the
:class:`~contracta.flow.DynamicalSystem` and the analytic quantities used
as oracles elsewhere.  ``provenance`` names the source formula of each item.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalError
from .flow import DynamicalSystem
from .linalg import Ellipsoid
from .region import Region


@dataclass(frozen=True)
class Potential:
    """Scalar field ``v`` with its orbital derivative ``vdot`` (both vectorized)."""

    v: callable
    vdot: callable
    name: str = ""


# --------------------------------------------------------------------------
# Rigid body

@dataclass(frozen=True)
class RigidBodyParams:
    J1: float = 1.0
    J2: float = 2.0
    J3: float = 3.0
    delta: float = 1.0
    tau: float = 0.0

    def __post_init__(self):
        if not (0 < self.J1 < self.J2 < self.J3):
            raise InputError("moments of inertia must satisfy 0 < J1 < J2 < J3")
        if not self.delta > 0:
            raise InputError("friction coefficient must be positive")


@dataclass(frozen=True)
class RigidBody:
    params: RigidBodyParams
    system: DynamicalSystem
    rho: float
    tau_bound: float
    u: float
    equilibrium: np.ndarray
    equilibrium_eigs: np.ndarray
    P0: np.ndarray
    energy: Potential
    beta_star: float
    provenance: dict = field(default_factory=dict)

    def chi_roots(self, omega2: float) -> np.ndarray:
        """Roots of ``det(A^T P0 + P0 A - chi P0)`` at a state with middle component ``omega2``."""
        d = self.params.delta
        r = 2.0 * abs(omega2) * self.rho
        return np.array([-2 * d + r, -2 * d, -2 * d - r])

    def trapping_level(self, beta=None) -> float:
        """Energy level ``beta / delta`` of the absorbing ellipsoid ``W <= level``."""
        beta = 1.05 * self.beta_star if beta is None else float(beta)
        if self.beta_star > 0 and beta <= self.beta_star:
            raise InputError("beta must exceed beta_star")
        return beta / self.params.delta

    def trapping_ellipsoid(self, beta=None) -> Ellipsoid:
        p = self.params
        level = self.trapping_level(beta)
        if level <= 0:
            raise InputError("trapping level must be positive (use beta > 0 when tau = 0)")
        J = np.array([p.J1, p.J2, p.J3])
        return Ellipsoid(np.zeros(3), np.diag(2.0 * level / J))

    def trapping_region(self, counts=(15, 15, 15), beta=None) -> Region:
        p = self.params
        level = self.trapping_level(beta)
        J = np.array([p.J1, p.J2, p.J3])
        half = np.sqrt(2.0 * level / J)
        W = self.energy.v
        return Region(tuple(-half), tuple(half), counts,
                      indicator=lambda x: W(x) <= level * (1 + 1e-12),
                      label=f"rigid-body trapping ellipsoid W <= {level:.6g}",
                      extra=(tuple(self.equilibrium),))


def rigid_body_system(p: RigidBodyParams = RigidBodyParams()) -> RigidBody:
    J1, J2, J3, d, tau = p.J1, p.J2, p.J3, p.delta, p.tau
    c1, c2, c3 = (J2 - J3) / J1, (J3 - J1) / J2, (J1 - J2) / J3

    def f(w):
        w = np.asarray(w, dtype=float)
        if w.ndim == 1:
            w1, w2, w3 = w
            return np.array([c1 * w2 * w3 - d * w1, c2 * w1 * w3 - d * w2 + tau / J2,
                             c3 * w1 * w2 - d * w3])
        w1, w2, w3 = w[..., 0], w[..., 1], w[..., 2]
        return np.stack([c1 * w2 * w3 - d * w1,
                         c2 * w1 * w3 - d * w2 + tau / J2,
                         c3 * w1 * w2 - d * w3], axis=-1)

    def jac(w):
        w = np.asarray(w, dtype=float)
        if w.ndim == 1:
            w1, w2, w3 = w
            return np.array([[-d, c1 * w3, c1 * w2], [c2 * w3, -d, c2 * w1], [c3 * w2, c3 * w1, -d]])
        w1, w2, w3 = w[..., 0], w[..., 1], w[..., 2]
        m = np.full_like(w1, -d)
        return np.stack([np.stack([m, c1 * w3, c1 * w2], -1),
                         np.stack([c2 * w3, m, c2 * w1], -1),
                         np.stack([c3 * w2, c3 * w1, m], -1)], -2)

    def W(w):
        w = np.asarray(w, dtype=float)
        return 0.5 * (J1 * w[..., 0] ** 2 + J2 * w[..., 1] ** 2 + J3 * w[..., 2] ** 2)

    def Wdot(w):
        w = np.asarray(w, dtype=float)
        return (-d * (J1 * w[..., 0] ** 2 + J2 * w[..., 1] ** 2 + J3 * w[..., 2] ** 2)
                + tau * w[..., 1])

    rho = math.sqrt((J3 - J2) * (J2 - J1) / (J1 * J3))
    bound = 2.0 * d * d * J2 / rho
    u = abs(tau) / bound
    eq = np.array([0.0, tau / (J2 * d), 0.0])
    eigs = np.array([d * (2 * u - 1), -d, -d * (1 + 2 * u)])
    P0 = np.diag([1.0, J2 / J1 * (J3 - J2) / (J3 - J1), J3 / J1 * (J3 - J2) / (J2 - J1)])
    system = DynamicalSystem(3, f, jac, name=f"rigid-body(J={J1},{J2},{J3}, delta={d}, tau={tau})",
                             vectorized=True)
    return RigidBody(
        params=p, system=system, rho=rho, tau_bound=bound, u=u, equilibrium=eq,
        equilibrium_eigs=eigs, P0=P0, energy=Potential(W, Wdot, "kinetic energy W"),
        beta_star=tau * tau / (2 * d * J2),
        provenance={
            "system": "Euler rotation equations with friction and torque (Jun_sys)",
            "jacobian": "jac.rhs",
            "tau_bound": "result_tau: 2 delta^2 J2 sqrt(J1 J3 / ((J3-J2)(J2-J1)))",
            "energy_rate": "dotmm",
            "trapping_set": "ellip.ss with level beta/delta",
            "equilibrium_eigs": "necessity part of the rigid-body theorem",
            "chi_roots": "-2 delta +- 2 |omega2| rho, -2 delta",
        },
    )


# --------------------------------------------------------------------------
# Rössler

@dataclass(frozen=True)
class RosslerParams:
    a: float = 0.386
    b: float = 0.2

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise InputError("Rossler parameters must be positive")


@dataclass(frozen=True)
class Rossler:
    params: RosslerParams
    system: DynamicalSystem
    gamma: float
    sigma: float
    freq: float
    d_lower: float
    cubic_residual: float
    equilibria: tuple
    saddle_focus: bool
    potential: Potential
    provenance: dict = field(default_factory=dict)


def _real_cubic_root(a: float, b: float, tol: float = 1e-15, max_iter: int = 200) -> float:
    """Negative real root of ``l^3 + b l^2 + l + (a + b)`` by bracketed Newton."""
    p = lambda x: ((x + b) * x + 1.0) * x + (a + b)
    dp = lambda x: (3.0 * x + 2.0 * b) * x + 1.0
    hi = 0.0
    lo = -(1.0 + max(abs(b), 1.0, abs(a + b)))
    if not (p(lo) < 0 < p(hi)):
        raise NumericalError("failed to bracket the real root")
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fx = p(x)
        if fx == 0:
            return x
        if fx < 0:
            lo = x
        else:
            hi = x
        d = dp(x)
        step = x - fx / d if d != 0 else None
        x_new = step if (step is not None and lo < step < hi) else 0.5 * (lo + hi)
        if abs(x_new - x) <= tol * max(1.0, abs(x)):
            x = x_new
            break
        x = x_new
    if abs(p(x)) > 1e-12:
        raise NumericalError("cubic root finder did not converge")
    return x


def rossler_system(p=RosslerParams(), b: float = None) -> Rossler:
    """Rossler system from ``RosslerParams`` or from the pair ``(a, b)``."""
    if not isinstance(p, RosslerParams):
        p = RosslerParams(float(p)) if b is None else RosslerParams(float(p), float(b))
    a, b = p.a, p.b

    def f(v):
        v = np.asarray(v, dtype=float)
        if v.ndim == 1:
            x, y, z = v
            return np.array([-y - z, x, -b * z + a * (y - y * y)])
        x, y, z = v[..., 0], v[..., 1], v[..., 2]
        return np.stack([-y - z, x, -b * z + a * (y - y * y)], axis=-1)

    def jac(v):
        v = np.asarray(v, dtype=float)
        if v.ndim == 1:
            return np.array([[0.0, -1.0, -1.0], [1.0, 0.0, 0.0], [0.0, a - 2 * a * v[1], -b]])
        y = v[..., 1]
        zero, one = np.zeros_like(y), np.ones_like(y)
        return np.stack([np.stack([zero, -one, -one], -1),
                         np.stack([one, zero, zero], -1),
                         np.stack([zero, a - 2 * a * y, -b * one], -1)], -2)

    root = _real_cubic_root(a, b)
    gamma = -root
    sigma = (gamma - b) / 2.0
    # remaining quadratic: l^2 + (b + root) l + (a + b)/(-root) ... from synthetic division
    c1 = b + root
    c0 = 1.0 + root * c1
    disc = c1 * c1 - 4 * c0
    freq = math.sqrt(-disc) / 2.0 if disc < 0 else 0.0
    e = 1.0 + b / a
    residual = abs(((root + b) * root + 1.0) * root + (a + b))
    potential = Potential(
        v=lambda s: np.asarray(s, dtype=float)[..., 2] - b * np.asarray(s, dtype=float)[..., 0],
        vdot=lambda s: (a + b) * np.asarray(s, dtype=float)[..., 1] - a * np.asarray(s, dtype=float)[..., 1] ** 2,
        name="z - b x",
    )
    system = DynamicalSystem(3, f, jac, name=f"rossler(a={a}, b={b})", vectorized=True)
    return Rossler(
        params=p, system=system, gamma=gamma, sigma=sigma, freq=freq,
        d_lower=3.0 - b / gamma, cubic_residual=residual,
        equilibria=(np.zeros(3), np.array([0.0, e, -e])),
        saddle_focus=(gamma > 0 and sigma > 0 and disc < 0),
        potential=potential,
        provenance={
            "system": "rossler1",
            "characteristic_equation": "int.eq: l^3 + b l^2 + l + (a + b) = 0",
            "sigma": "Vieta: -gamma + 2 sigma = -b",
            "d_lower": "3 - b/gamma",
            "potential": "v = z - b x, vdot = (a+b) y - a y^2",
        },
    )


def rossler_reference_metric():
    """Published metric ``(P*, tau*, s*)`` for the classical parameters."""
    P = np.array([[0.50578332, -0.03189052, -0.15406100],
                  [-0.03189052, 0.36983503, 0.26733901],
                  [-0.15406100, 0.26733901, 0.52428427]])
    return P, 0.25, 0.60557


def rossler_region(step: float = 0.005, y_max: float = 20.0) -> Region:
    """Grid over ``y in [-y_max, y_max]``; the criterion roots do not depend on x or z."""
    count = int(round(2 * y_max / step)) + 1
    return Region((-1.0, -y_max, -1.0), (1.0, y_max, 1.0), (1, count, 1),
                  label=f"|y| <= {y_max}, step {step}")


# --------------------------------------------------------------------------
# Langford

@dataclass(frozen=True)
class LangfordParams:
    a: float = 0.6

    def __post_init__(self):
        if not (0.5 < self.a < 1.0):
            raise InputError("the explicit periodic orbit requires 1/2 < a < 1")


@dataclass(frozen=True)
class Langford:
    params: LangfordParams
    system: DynamicalSystem
    R: float
    T: float
    A2: np.ndarray
    A2_eigs: np.ndarray
    hurwitz: bool
    multiplier_moduli: np.ndarray
    provenance: dict = field(default_factory=dict)

    def orbit(self, t):
        t = np.asarray(t, dtype=float)
        a = self.params.a
        return np.stack([self.R * np.cos(t), self.R * np.sin(t),
                         np.full_like(t, 1.0 - a)], axis=-1)

    def orbit_velocity(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack([-self.R * np.sin(t), self.R * np.cos(t), np.zeros_like(t)], axis=-1)

    def tube_region(self, radius: float, counts=(9, 9, 3)) -> Region:
        """Box around the orbit filtered to points within ``radius`` of it."""
        R, zc = self.R, 1.0 - self.params.a

        def dist(p):
            return math.hypot(math.hypot(p[0], p[1]) - R, p[2] - zc)

        return Region((-R - radius, -R - radius, zc - radius), (R + radius, R + radius, zc + radius),
                      counts, indicator=lambda p: dist(p) <= radius,
                      label=f"tube of radius {radius} around the periodic orbit")


def langford_system(p: LangfordParams = LangfordParams()) -> Langford:
    a = p.a

    def f(v):
        v = np.asarray(v, dtype=float)
        if v.ndim == 1:
            x, y, z = v
            return np.array([(a - 1) * x - y + x * z, x + (a - 1) * y + y * z,
                             a * z - (x * x + y * y + z * z)])
        x, y, z = v[..., 0], v[..., 1], v[..., 2]
        return np.stack([(a - 1) * x - y + x * z,
                         x + (a - 1) * y + y * z,
                         a * z - (x * x + y * y + z * z)], axis=-1)

    def jac(v):
        v = np.asarray(v, dtype=float)
        if v.ndim == 1:
            x, y, z = v
            return np.array([[a - 1 + z, -1.0, x], [1.0, a - 1 + z, y], [-2 * x, -2 * y, a - 2 * z]])
        x, y, z = v[..., 0], v[..., 1], v[..., 2]
        one = np.ones_like(x)
        return np.stack([np.stack([a - 1 + z, -one, x], -1),
                         np.stack([one, a - 1 + z, y], -1),
                         np.stack([-2 * x, -2 * y, a - 2 * z], -1)], -2)

    R = math.sqrt((1 - a) * (2 * a - 1))
    A2 = np.array([[0.0, R], [-2 * R, 3 * a - 2]])
    eigs = np.roots([1.0, -(3 * a - 2), 2 * R * R]).astype(complex)
    eigs = eigs[np.argsort(-eigs.imag)]
    moduli = np.array([1.0] + sorted(np.abs(np.exp(2 * math.pi * eigs)), reverse=True))
    system = DynamicalSystem(3, f, jac, name=f"langford(a={a})", vectorized=True)
    return Langford(
        params=p, system=system, R=R, T=2 * math.pi, A2=A2, A2_eigs=eigs,
        hurwitz=a < 2.0 / 3.0, multiplier_moduli=moduli,
        provenance={
            "system": "lanford",
            "orbit": "eq:periodic_Lanford, R = sqrt((1-a)(2a-1))",
            "A2": "rotating-frame reduction [[0, R], [-2R, 3a-2]]",
            "multipliers": "{1, exp(2 pi lambda(A2))}",
        },
    )
