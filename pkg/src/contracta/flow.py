"""Trajectories, the variational (linearized) flow, shooting and monodromy.

The integrator is an embedded Dormand--Prince 5(4) pair with local
extrapolation, plus a classical fixed-step RK4 for cheap sweeps.  The
variational flow integrates ``x' = f(x), X' = Df(x) X`` and keeps the
magnitude of ``X`` in a separate log-scale accumulator so that long
horizons neither overflow nor underflow.  Optionally the additive-compound
flows ``Y_k' = Df(x)^[k] Y_k`` are carried along; their norms give exact
products of leading singular values even when ``X`` itself is too
ill-conditioned for a direct SVD.
"""
from __future__ import annotations

import contextlib
import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DivergenceError, InputError, NoConvergenceError
from .linalg import additive_operator, k_subsets

RENORM_HIGH = 1e100
RENORM_LOW = 1e-100


@dataclass(frozen=True)
class DynamicalSystem:
    """Autonomous system ``x' = f(x)`` on R^n.

    ``f`` and ``jacobian`` take a state of shape ``(n,)``.  If ``vectorized``
    is set they must also accept stacks of shape ``(..., n)`` (returning
    ``(..., n)`` and ``(..., n, n)``), which the grid routines exploit.
    Without an analytic Jacobian, central differences with step
    ``1e-6 * (1 + |x|_inf)`` are used.
    """

    n: int
    f: Callable
    jacobian: Optional[Callable] = None
    name: str = ""
    vectorized: bool = False

    def __post_init__(self):
        if int(self.n) < 1:
            raise InputError("state dimension must be positive")

    def rhs(self, x):
        return np.asarray(self.f(x), dtype=float)

    def jac(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(x), dtype=float)
        return self.numeric_jacobian(x)

    def numeric_jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        h = 1e-6 * (1.0 + np.abs(x).max())
        J = np.empty((self.n, self.n))
        for i in range(self.n):
            e = np.zeros(self.n)
            e[i] = h
            J[:, i] = (self.rhs(x + e) - self.rhs(x - e)) / (2.0 * h)
        return J

    def jac_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, self.n)
        if self.vectorized and self.jacobian is not None:
            return np.asarray(self.jacobian(X), dtype=float).reshape(-1, self.n, self.n)
        return np.stack([self.jac(x) for x in X]) if len(X) else np.zeros((0, self.n, self.n))

    def rhs_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, self.n)
        if self.vectorized:
            return np.asarray(self.f(X), dtype=float).reshape(-1, self.n)
        return np.stack([self.rhs(x) for x in X]) if len(X) else np.zeros((0, self.n))

    def jacobian_mismatch(self, samples) -> float:
        """Largest column discrepancy between ``jacobian`` and central differences."""
        worst = 0.0
        for x in np.atleast_2d(samples):
            worst = max(worst, np.abs(self.jac(x) - self.numeric_jacobian(x)).max())
        return worst


@dataclass(frozen=True)
class IntegratorOptions:
    method: str = "rk45"
    atol: float = 1e-10
    rtol: float = 1e-10
    max_step: float = math.inf
    min_step: float = 1e-13
    max_steps: int = 2_000_000
    step: float = 1e-2  # fixed step for rk4

    def __post_init__(self):
        if self.method not in ("rk45", "rk4"):
            raise InputError(f"unknown method {self.method!r}")
        if self.atol <= 0 or self.rtol <= 0:
            raise InputError("tolerances must be positive")
        if self.min_step > self.max_step:
            raise InputError("min_step exceeds max_step")
        if self.step <= 0:
            raise InputError("rk4 step must be positive")


CERTIFY = IntegratorOptions()
SWEEP = IntegratorOptions(atol=1e-8, rtol=1e-8)

# Dormand--Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_A_ROWS = [np.array(row + [0.0] * (7 - len(row))) for row in _A]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = _B5 - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                     -92097 / 339200, 187 / 2100, 1 / 40])


@dataclass
class _Solution:
    t: np.ndarray
    y: np.ndarray
    error_estimate: float
    n_steps: int
    extras: list = field(default_factory=list)


def _dp_step(rhs, y, h, k1):
    K = np.empty((7, y.size))
    K[0] = k1
    # overflow shows up as non-finite output, which the caller handles
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, 7):
            K[i] = rhs(y + h * (_A_ROWS[i][:i] @ K[:i]))
        y_new = y + h * (_B5 @ K)
        err = h * (_E @ K)
    return y_new, err, K[6]


def _rk4_step(rhs, y, h):
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * h * k1)
    k3 = rhs(y + 0.5 * h * k2)
    k4 = rhs(y + h * k3)
    return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _solve(rhs, y0, t_end, opts: IntegratorOptions, stops=(), record=False,
           scale_fn=None, post_step=None, on_stop=None):
    """Integrate from 0 to ``t_end`` (either sign), landing exactly on ``stops``.

    ``post_step(y)`` may return a modified state (renormalization) or None.
    ``on_stop(t, y)`` is called at every stop and at ``t_end``.
    """
    y = np.array(y0, dtype=float)
    direction = 1.0 if t_end >= 0 else -1.0
    targets = sorted({float(s) for s in stops if 0 < direction * s < direction * t_end} | {t_end},
                     key=lambda s: direction * s)
    ts, ys = ([0.0], [y.copy()]) if record else ([], [])
    t = 0.0
    err_total = 0.0
    n_steps = 0
    if t_end == 0:
        if on_stop is not None:
            on_stop(0.0, y)
        return _Solution(np.array(ts), np.array(ys), 0.0, 0)

    def default_scale(y_old, y_new):
        return opts.atol + opts.rtol * np.maximum(np.abs(y_old), np.abs(y_new))

    scale_fn = scale_fn or default_scale

    if opts.method == "rk4":
        for target in targets:
            span = target - t
            m = max(1, int(math.ceil(abs(span) / opts.step - 1e-12)))
            h = span / m
            for _ in range(m):
                y = _rk4_step(rhs, y, h)
                t += h
                n_steps += 1
                if not np.all(np.isfinite(y)):
                    raise DivergenceError("non-finite state", t, y)
                if post_step is not None:
                    mod = post_step(y)
                    if mod is not None:
                        y = mod
                if record:
                    ts.append(t)
                    ys.append(y.copy())
            t = target
            if on_stop is not None:
                on_stop(t, y)
        return _Solution(np.array(ts), np.array(ys), math.nan, n_steps)

    k1 = rhs(y)
    # initial step (Hairer & Wanner II.4)
    sc = scale_fn(y, y)
    d0 = np.sqrt(np.mean((y / sc) ** 2))
    d1 = np.sqrt(np.mean((k1 / sc) ** 2))
    h = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h = min(h, abs(t_end), opts.max_step)
    y1 = y + direction * h * k1
    d2 = np.sqrt(np.mean(((rhs(y1) - k1) / sc) ** 2)) / h
    h1 = max(1e-6, h * 1e-3) if max(d1, d2) <= 1e-15 else (0.01 / max(d1, d2)) ** 0.2
    h = min(100 * h, h1, opts.max_step, abs(t_end))

    for target in targets:
        while direction * (target - t) > 0:
            if n_steps >= opts.max_steps:
                raise DivergenceError("maximum number of steps exceeded", t, y)
            remaining = abs(target - t)
            clipped = h >= remaining
            h_try = min(h, remaining)
            y_new, err, k_last = _dp_step(rhs, y, direction * h_try, k1)
            if not np.all(np.isfinite(y_new)):
                h = 0.25 * h_try
                if h < opts.min_step:
                    raise DivergenceError("non-finite state and step underflow", t, y)
                continue
            e = np.sqrt(np.mean((err / scale_fn(y, y_new)) ** 2))
            if e <= 1.0:
                t = target if clipped else t + direction * h_try
                err_total += float(np.abs(err).max())
                n_steps += 1
                y = y_new
                k1 = k_last
                if post_step is not None:
                    mod = post_step(y)
                    if mod is not None:
                        y = mod
                        k1 = rhs(y)
                if record:
                    ts.append(t)
                    ys.append(y.copy())
                fac = 5.0 if e == 0 else min(5.0, max(0.2, 0.9 * e ** -0.2))
                h_next = h_try * fac
                # keep the pre-clip step size when we were only clipped to land on a stop
                h = min(max(h_next, h if clipped else 0.0), opts.max_step)
            else:
                h = h_try * max(0.2, 0.9 * e ** -0.2)
                if h < opts.min_step:
                    raise DivergenceError("step size underflow", t, y)
        if on_stop is not None:
            on_stop(t, y)
    return _Solution(np.array(ts), np.array(ys), err_total, n_steps)


@dataclass
class Trajectory:
    """Sampled states of one integration; ``error_estimate`` sums local errors."""

    t: np.ndarray
    x: np.ndarray
    error_estimate: float
    n_steps: int

    @property
    def final(self) -> np.ndarray:
        return self.x[-1]


def _check_x0(sys, x0):
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != sys.n:
        raise InputError(f"x0 has length {x0.size}, expected {sys.n}")
    if not np.all(np.isfinite(x0)):
        raise InputError("x0 has non-finite entries")
    return x0


def integrate(sys: DynamicalSystem, x0, t: float, opts: IntegratorOptions = CERTIFY,
              samples=None) -> Trajectory:
    """Integrate ``x' = f(x)`` from ``x0`` over ``[0, t]`` (``t < 0`` runs backwards).

    With ``samples`` (array of times) only those instants are returned, in
    addition to the end point; otherwise every accepted step is recorded.
    """
    x0 = _check_x0(sys, x0)
    t = float(t)
    if not math.isfinite(t):
        raise InputError("horizon must be finite")
    if samples is None:
        sol = _solve(sys.rhs, x0, t, opts, record=True)
        return Trajectory(sol.t, sol.y, sol.error_estimate, sol.n_steps)
    times, states = [0.0], [x0.copy()]
    samples = [float(s) for s in np.atleast_1d(samples)]

    def grab(tt, yy):
        times.append(tt)
        states.append(yy.copy())

    sol = _solve(sys.rhs, x0, t, opts, stops=samples, on_stop=grab)
    t_arr, x_arr = np.array(times), np.array(states)
    keep = np.concatenate([[True], np.diff(t_arr) != 0])
    return Trajectory(t_arr[keep], x_arr[keep], sol.error_estimate, sol.n_steps)


@dataclass
class VariationalState:
    """State of the variational flow at time ``t``.

    The true fundamental matrix is ``exp(log_scale) * X``.  ``compounds``
    maps ``k`` to ``(Y_k, log_scale_k)`` with ``exp(log_scale_k) * Y_k`` the
    k-th multiplicative compound of the true fundamental matrix.
    """

    t: float
    x: np.ndarray
    X: np.ndarray
    log_scale: float = 0.0
    compounds: dict = field(default_factory=dict)
    error_estimate: float = 0.0

    def matrix(self) -> np.ndarray:
        return math.exp(self.log_scale) * self.X

    def log_singular_values(self) -> np.ndarray:
        sv = np.linalg.svd(self.X, compute_uv=False)
        with np.errstate(divide="ignore"):
            return np.log(sv) + self.log_scale

    def cond(self) -> float:
        sv = np.linalg.svd(self.X, compute_uv=False)
        return math.inf if sv[-1] == 0 else float(sv[0] / sv[-1])

    def log_compound_norm(self, k: int) -> float:
        """``log(s_1 ... s_k)`` of the true fundamental matrix."""
        if k == 0:
            return 0.0
        if k == 1:
            return float(np.log(np.linalg.norm(self.X, 2)) + self.log_scale)
        if k not in self.compounds:
            raise InputError(f"compound {k} was not integrated")
        Y, ls = self.compounds[k]
        return float(np.log(np.linalg.norm(Y, 2)) + ls)


def variational_flow(sys: DynamicalSystem, x0, t: float, opts: IntegratorOptions = CERTIFY,
                     checkpoints=None, compounds=()):
    """Jointly integrate the state and its fundamental matrix up to ``t``.

    Returns the final :class:`VariationalState`, or ``(final, [states at
    checkpoints])`` when ``checkpoints`` is given.  ``compounds`` lists
    orders ``k >= 2`` whose compound flows should be integrated as well.
    """
    x0 = _check_x0(sys, x0)
    n = sys.n
    t = float(t)
    ks = sorted({int(k) for k in compounds if int(k) >= 2})
    for k in ks:
        if k > n:
            raise InputError(f"compound order {k} exceeds n={n}")
    sizes = [len(k_subsets(n, k)) for k in ks]
    ops = [additive_operator(n, k) for k in ks]
    blocks = [(n, n + n * n, n)]  # (start, stop, side)
    pos = n + n * n
    for m in sizes:
        blocks.append((pos, pos + m * m, m))
        pos += m * m
    y0 = np.zeros(pos)
    y0[:n] = x0
    for start, stop, m in blocks:
        y0[start:stop] = np.eye(m).reshape(-1)
    log_scales = [0.0] * len(blocks)

    def rhs(y):
        x = y[:n]
        A = sys.jac(x)
        out = np.empty_like(y)
        out[:n] = sys.rhs(x)
        s0, s1, _ = blocks[0]
        out[s0:s1] = (A @ y[s0:s1].reshape(n, n)).reshape(-1)
        flat = A.reshape(-1)
        for L, (start, stop, m) in zip(ops, blocks[1:]):
            out[start:stop] = ((L @ flat).reshape(m, m) @ y[start:stop].reshape(m, m)).reshape(-1)
        return out

    def scale_fn(y_old, y_new):
        sc = np.empty_like(y_old)
        big = np.maximum(np.abs(y_old), np.abs(y_new))
        sc[:n] = opts.atol + opts.rtol * big[:n]
        for start, stop, _ in blocks:
            mag = max(np.abs(y_new[start:stop]).max(), 1e-300)
            sc[start:stop] = opts.atol * mag + opts.rtol * big[start:stop]
        return sc

    def post_step(y):
        changed = False
        for i, (start, stop, _) in enumerate(blocks):
            mag = np.abs(y[start:stop]).max()
            if mag > RENORM_HIGH or (0 < mag < RENORM_LOW):
                y[start:stop] /= mag
                log_scales[i] += math.log(mag)
                changed = True
        return y if changed else None

    def make_state(tt, y, err=0.0):
        s0, s1, _ = blocks[0]
        comps = {k: (y[start:stop].reshape(m, m).copy(), log_scales[i + 1])
                 for i, (k, (start, stop, m)) in enumerate(zip(ks, blocks[1:]))}
        return VariationalState(tt, y[:n].copy(), y[s0:s1].reshape(n, n).copy(),
                                log_scales[0], comps, err)

    captured = []
    stops = [] if checkpoints is None else [float(c) for c in checkpoints]

    def on_stop(tt, y):
        captured.append(make_state(tt, y))

    sol = _solve(rhs, y0, t, opts, stops=stops, scale_fn=scale_fn,
                 post_step=post_step, on_stop=on_stop)
    final = captured[-1]
    final.error_estimate = sol.error_estimate
    if checkpoints is None:
        return final
    by_time = {round(s.t, 12): s for s in captured}
    at = []
    for c in checkpoints:
        c = float(c)
        if c == 0.0:
            at.append(make_state(0.0, y0))
        else:
            at.append(by_time.get(round(c, 12), final))
    return final, at


@dataclass
class PeriodicOrbit:
    x0: np.ndarray
    T: float
    residual: float
    iterations: int


def _first_return_time(sys, x, normal, T_guess, opts):
    """Time of the section return closest to ``T_guess`` (None if there is none)."""
    g = lambda y: float(normal @ (y - x))
    tr = integrate(sys, x, 1.6 * T_guess, opts)
    vals = np.array([g(y) for y in tr.x])
    hits = [i for i in range(1, len(vals)) if vals[i - 1] < 0.0 <= vals[i] and tr.t[i] > 0.2 * T_guess]
    if not hits:
        return None
    i = min(hits, key=lambda j: abs(tr.t[j] - T_guess))
    lo_t, lo_x, hi_dt = tr.t[i - 1], tr.x[i - 1], tr.t[i] - tr.t[i - 1]
    a, b = 0.0, hi_dt
    for _ in range(60):
        m = 0.5 * (a + b)
        if g(integrate(sys, lo_x, m, opts).final) < 0.0:
            a = m
        else:
            b = m
        if b - a < 1e-14 * max(1.0, T_guess):
            break
    return lo_t + 0.5 * (a + b)


def find_periodic_orbit(sys: DynamicalSystem, x_guess, T_guess: float,
                        opts: IntegratorOptions = IntegratorOptions(atol=1e-12, rtol=1e-12),
                        max_iter: int = 40, tol: float = 1e-9) -> PeriodicOrbit:
    """Newton shooting for a periodic orbit through the section at ``x_guess``.

    The section is the hyperplane through ``x_guess`` with normal
    ``f(x_guess)``.  The period guess is first replaced by the nearest
    return time to the section (if the trajectory comes back at all); each
    Newton step then solves the bordered system for the state correction
    and the period correction.  Iterates that collapse onto an equilibrium
    are rejected.
    """
    x = _check_x0(sys, x_guess).copy()
    T = float(T_guess)
    if not T > 0:
        raise InputError("T_guess must be positive")
    n = sys.n
    normal = sys.rhs(x)
    f_norm0 = float(np.linalg.norm(normal))
    if f_norm0 == 0:
        raise InputError("guess is an equilibrium; no section can be defined")
    anchor = x.copy()
    if n > 1:
        T_ret = _first_return_time(sys, x, normal, T, opts)
        if T_ret is not None:
            T = T_ret
    best = (math.inf, x.copy(), T)
    for it in range(max_iter):
        st = variational_flow(sys, x, T, opts)
        r = st.x - x
        res = float(np.linalg.norm(r))
        if res < best[0]:
            best = (res, x.copy(), T)
        if res <= tol * (1.0 + np.linalg.norm(x)):
            return PeriodicOrbit(x, T, res, it)
        M = st.matrix()
        J = np.zeros((n + 1, n + 1))
        J[:n, :n] = M - np.eye(n)
        J[:n, n] = sys.rhs(st.x)
        J[n, :n] = normal
        rhs = -np.concatenate([r, [normal @ (x - anchor)]])
        delta = np.linalg.lstsq(J, rhs, rcond=None)[0]
        dT = delta[n]
        if abs(dT) > 0.5 * T:
            delta *= 0.5 * T / abs(dT)
        x = x + delta[:n]
        T = T + delta[n]
        if not (T > 1e-3 * T_guess) or not np.all(np.isfinite(x)):
            break
        if np.linalg.norm(sys.rhs(x)) < 1e-3 * f_norm0:
            break
    raise NoConvergenceError("shooting did not converge", best=(best[1], best[2]),
                             residual=best[0])


def monodromy(sys: DynamicalSystem, x0, T: float,
              opts: IntegratorOptions = IntegratorOptions(atol=1e-12, rtol=1e-12),
              periodic_tol: float = 1e-6) -> np.ndarray:
    """Fundamental matrix over one period of an orbit through ``x0``."""
    x0 = _check_x0(sys, x0)
    st = variational_flow(sys, x0, T, opts)
    gap = np.linalg.norm(st.x - x0)
    if gap > periodic_tol * (1.0 + np.linalg.norm(x0)):
        raise InputError(f"x0 is not on a T-periodic orbit (residual {gap:.3g})")
    return st.matrix()


def write_trajectory_csv(path, data, digits: int = 17):
    """Write a trajectory or list of variational states as CSV.

    Header ``t,x1..xn`` or ``t,x1..xn,X11..Xnn,logScale``.
    """
    fmt = f"%.{digits}g"
    with contextlib.ExitStack() as stack:
        fh = path if hasattr(path, "write") else stack.enter_context(open(path, "w", newline=""))
        w = csv.writer(fh)
        if isinstance(data, Trajectory):
            n = data.x.shape[1]
            w.writerow(["t"] + [f"x{i + 1}" for i in range(n)])
            for tt, xx in zip(data.t, data.x):
                w.writerow([fmt % tt] + [fmt % v for v in xx])
        else:
            states = list(data)
            n = states[0].x.size
            w.writerow(["t"] + [f"x{i + 1}" for i in range(n)]
                       + [f"X{i + 1}{j + 1}" for i in range(n) for j in range(n)] + ["logScale"])
            for s in states:
                w.writerow([fmt % s.t] + [fmt % v for v in s.x]
                           + [fmt % v for v in s.X.reshape(-1)] + [fmt % s.log_scale])
