"""Dense small-matrix kernels.

Singular values, the fractional volume functional ``omega_d``, ellipsoid
profiles (plain and metric-weighted), SPD square roots and logarithms,
multiplicative/additive compound matrices and the spectral logarithmic norm.

Everything here is a pure function of its inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np

from .errors import InputError

SYM_RTOL = 1e-12


def _as_square(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError(f"{name} must be a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InputError(f"{name} has non-finite entries")
    return A


@dataclass(frozen=True)
class FractionalDimension:
    """A dimension ``d`` in (0, n] split as ``d = d0 + s`` with ``d0 = floor(d)``."""

    d: float
    n: int
    d0: int = field(init=False)
    s: float = field(init=False)

    def __post_init__(self):
        d, n = float(self.d), int(self.n)
        if n < 1:
            raise InputError(f"ambient dimension must be >= 1, got {n}")
        if not (0.0 < d <= n) or not math.isfinite(d):
            raise InputError(f"d must lie in (0, {n}], got {d}")
        d0 = int(math.floor(d))
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "d0", d0)
        object.__setattr__(self, "s", d - d0)

    def weights(self) -> np.ndarray:
        """Weights w with ``sum(w * v)`` the fractional top-d sum of a descending ``v``."""
        w = np.zeros(self.n)
        w[: self.d0] = 1.0
        if self.s > 0.0:
            w[self.d0] = self.s
        return w


def fractional_sum(values, dim: FractionalDimension) -> float:
    """``v1 + ... + v_d0 + s * v_{d0+1}`` for a descending sequence ``values``.

    The fractional term is skipped entirely when ``s == 0`` so that infinite
    entries past ``d0`` never produce ``0 * inf``.
    """
    v = np.asarray(values, dtype=float)
    if v.shape[-1] != dim.n:
        raise InputError(f"expected {dim.n} values, got {v.shape[-1]}")
    total = v[..., : dim.d0].sum(axis=-1)
    if dim.s > 0.0:
        total = total + dim.s * v[..., dim.d0]
    return total


def fractional_sum_reverse(values, dim: FractionalDimension) -> float:
    """``v_n + ... + v_{n-d0+1} + s * v_{n-d0}`` for a descending sequence."""
    v = np.asarray(values, dtype=float)
    return fractional_sum(v[..., ::-1], dim)


def singular_values(A) -> np.ndarray:
    """Singular values of a square matrix in descending order."""
    A = _as_square(A)
    return np.linalg.svd(A, compute_uv=False)


def log_omega_d(sv, dim: FractionalDimension) -> float:
    """``log omega_d`` from descending singular values (``-inf`` if rank-deficient)."""
    sv = np.asarray(sv, dtype=float)
    with np.errstate(divide="ignore"):
        return float(fractional_sum(np.log(sv), dim))


def omega_d(A, dim: FractionalDimension) -> float:
    """Fractional volume functional ``s1 ... s_d0 * s_{d0+1}**s`` of ``A``."""
    A = _as_square(A)
    if A.shape[0] != dim.n:
        raise InputError(f"matrix is {A.shape[0]}x{A.shape[0]} but dim.n = {dim.n}")
    sv = singular_values(A)
    val = float(np.prod(sv[: dim.d0]))
    if dim.s > 0.0:
        val *= sv[dim.d0] ** dim.s
    return val


# --------------------------------------------------------------------------
# SPD helpers

def check_spd(P, name="P") -> np.ndarray:
    """Validate symmetry (relative 1e-12) and positive definiteness; return P."""
    P = _as_square(P, name)
    scale = max(np.abs(P).max(), 1e-300)
    if np.abs(P - P.T).max() > SYM_RTOL * scale:
        raise InputError(f"{name} is not symmetric")
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        raise InputError(f"{name} is not positive definite") from None
    return P


def is_spd(P) -> bool:
    try:
        check_spd(P)
    except InputError:
        return False
    return True


def _spd_function(P, fn):
    P = check_spd(P)
    w, V = np.linalg.eigh(0.5 * (P + P.T))
    if w[0] <= 0.0:
        raise InputError("P is not positive definite")
    out = (V * fn(w)) @ V.T
    return 0.5 * (out + out.T)


def spd_sqrt(P) -> np.ndarray:
    """Symmetric positive definite square root via the eigendecomposition."""
    return _spd_function(P, np.sqrt)


def spd_inv_sqrt(P) -> np.ndarray:
    return _spd_function(P, lambda w: 1.0 / np.sqrt(w))


def spd_log(P) -> np.ndarray:
    """Principal logarithm of an SPD matrix."""
    return _spd_function(P, np.log)


def sym_expm(X) -> np.ndarray:
    """Matrix exponential of a symmetric matrix."""
    X = _as_square(X)
    w, V = np.linalg.eigh(0.5 * (X + X.T))
    out = (V * np.exp(w)) @ V.T
    return 0.5 * (out + out.T)


# --------------------------------------------------------------------------
# Ellipsoids

@dataclass(frozen=True)
class Ellipsoid:
    """``{x : (x - c)^T shape^{-1} (x - c) <= 1}`` with an SPD ``shape``.

    Semi-axes are the square roots of the eigenvalues of ``shape``.
    """

    center: np.ndarray
    shape: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(-1)
        S = check_spd(self.shape, "shape")
        if S.shape[0] != c.size:
            raise InputError("center and shape dimensions differ")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "shape", 0.5 * (S + S.T))

    @classmethod
    def ball(cls, n: int, radius: float = 1.0, center=None):
        c = np.zeros(n) if center is None else center
        return cls(c, radius**2 * np.eye(n))

    @classmethod
    def from_axes(cls, axes, rotation=None, center=None):
        axes = np.asarray(axes, dtype=float)
        n = axes.size
        R = np.eye(n) if rotation is None else np.asarray(rotation, dtype=float)
        c = np.zeros(n) if center is None else center
        return cls(c, (R * axes**2) @ R.T)

    @property
    def n(self) -> int:
        return self.center.size

    def semiaxes(self) -> np.ndarray:
        w = np.linalg.eigvalsh(self.shape)[::-1]
        return np.sqrt(np.clip(w, 0.0, None))

    def affine_image(self, A, shift=None) -> "Ellipsoid":
        """Image ``shift + A E`` (A must be nonsingular)."""
        A = _as_square(A)
        c = A @ self.center
        if shift is not None:
            c = c + np.asarray(shift, dtype=float)
        return Ellipsoid(c, A @ self.shape @ A.T)

    def scaled(self, c: float, shift=None) -> "Ellipsoid":
        """``shift + c E`` with the scaling taken about the origin."""
        center = c * self.center
        if shift is not None:
            center = center + np.asarray(shift, dtype=float)
        return Ellipsoid(center, c**2 * self.shape)


def ellipsoid_profile(E: Ellipsoid, dim: FractionalDimension, P=None):
    """Return ``(varpi_d, ecc, semiaxes)`` of ``E``, optionally in the metric ``P``.

    The weighted profile is the plain profile of the image ``sqrt(P) E``.
    """
    if dim.n != E.n:
        raise InputError("dimension mismatch between ellipsoid and dim")
    if P is not None:
        P = check_spd(P)
        if P.shape[0] != E.n:
            raise InputError("metric and ellipsoid dimensions differ")
        E = E.affine_image(spd_sqrt(P))
    axes = E.semiaxes()
    if axes[-1] <= 0.0:
        raise InputError("degenerate ellipsoid")
    varpi = float(np.prod(axes[: dim.d0]))
    if dim.s > 0.0:
        varpi *= axes[dim.d0] ** dim.s
    return varpi, float(axes[0] / axes[-1]), axes


# --------------------------------------------------------------------------
# Compound matrices

def _check_k(n, k):
    if not (1 <= int(k) <= n):
        raise InputError(f"k must lie in [1, {n}], got {k}")
    return int(k)


@lru_cache(maxsize=None)
def k_subsets(n: int, k: int):
    """Lexicographically ordered k-subsets of ``range(n)``."""
    return tuple(combinations(range(n), k))


def multiplicative_compound(A, k: int) -> np.ndarray:
    """k-th multiplicative compound: all k x k minors in lexicographic order."""
    A = _as_square(A)
    n = A.shape[0]
    k = _check_k(n, k)
    subs = np.array(k_subsets(n, k))
    blocks = A[subs[:, None, :, None], subs[None, :, None, :]]
    return np.linalg.det(blocks)


@lru_cache(maxsize=None)
def _additive_pattern(n: int, k: int):
    subs = k_subsets(n, k)
    index = {s: r for r, s in enumerate(subs)}
    diag_members = np.array(subs)
    rows, cols, ii, jj, sign = [], [], [], [], []
    for r, I in enumerate(subs):
        for pos_i, i in enumerate(I):
            rest = I[:pos_i] + I[pos_i + 1:]
            for j in range(n):
                if j in I:
                    continue
                J = tuple(sorted(rest + (j,)))
                pos_j = J.index(j)
                rows.append(r)
                cols.append(index[J])
                ii.append(i)
                jj.append(j)
                sign.append(-1.0 if (pos_i + pos_j) % 2 else 1.0)
    return (diag_members, np.array(rows, dtype=int), np.array(cols, dtype=int),
            np.array(ii, dtype=int), np.array(jj, dtype=int), np.array(sign))


def additive_compound(B, k: int) -> np.ndarray:
    """k-th additive compound ``d/de (I + e B)^(k)`` at ``e = 0`` in closed form.

    Accepts a stack ``(..., n, n)`` as well as a single matrix.
    """
    B = np.asarray(B, dtype=float)
    if B.ndim < 2 or B.shape[-1] != B.shape[-2]:
        raise InputError(f"B must be square, got shape {B.shape}")
    if not np.all(np.isfinite(B)):
        raise InputError("B has non-finite entries")
    n = B.shape[-1]
    k = _check_k(n, k)
    members, rows, cols, ii, jj, sign = _additive_pattern(n, k)
    m = members.shape[0]
    out = np.zeros(B.shape[:-2] + (m, m))
    diag = np.diagonal(B, axis1=-2, axis2=-1)
    out[..., np.arange(m), np.arange(m)] = diag[..., members].sum(axis=-1)
    if rows.size:
        out[..., rows, cols] = sign * B[..., ii, jj]
    return out


@lru_cache(maxsize=None)
def additive_operator(n: int, k: int) -> np.ndarray:
    """Matrix ``L`` with ``vec(B^[k]) = L @ vec(B)`` (row-major vec)."""
    members, rows, cols, ii, jj, sign = _additive_pattern(n, k)
    m = members.shape[0]
    L = np.zeros((m * m, n * n))
    for r, mem in enumerate(members):
        for i in mem:
            L[r * m + r, i * n + i] += 1.0
    L[rows * m + cols, ii * n + jj] = sign
    L.setflags(write=False)
    return L


def log_norm2(A) -> float:
    """Spectral logarithmic norm: top eigenvalue of the symmetric part."""
    A = _as_square(A)
    return float(np.linalg.eigvalsh(0.5 * (A + A.T))[-1])
