"""Sampling regions: a box lattice optionally filtered by an indicator."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class Region:
    """Regular lattice on ``[lo, hi]`` (per axis) filtered by ``indicator``.

    An axis with a count of 1 is sampled at its midpoint.  ``extra`` points
    are appended unfiltered (e.g. an equilibrium off the lattice).
    """

    lo: tuple
    hi: tuple
    counts: tuple
    indicator: Optional[Callable] = None
    label: str = ""
    extra: tuple = ()
    include_lattice: bool = True

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        counts = tuple(int(c) for c in np.atleast_1d(self.counts))
        if not (len(lo) == len(hi) == len(counts)):
            raise InputError("lo, hi and counts must have equal length")
        if any(not a < b for a, b in zip(lo, hi)):
            raise InputError("every axis needs lo < hi")
        if any(c < 1 for c in counts):
            raise InputError("grid counts must be positive")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "counts", counts)
        extra = tuple(tuple(float(v) for v in p) for p in self.extra)
        if any(len(p) != len(lo) for p in extra):
            raise InputError("extra points must match the region dimension")
        object.__setattr__(self, "extra", extra)

    @property
    def n(self) -> int:
        return len(self.lo)

    def axes(self):
        return [np.array([0.5 * (a + b)]) if c == 1 else np.linspace(a, b, c)
                for a, b, c in zip(self.lo, self.hi, self.counts)]

    def spacing(self) -> tuple:
        return tuple(0.0 if c == 1 else (b - a) / (c - 1)
                     for a, b, c in zip(self.lo, self.hi, self.counts))

    def lattice(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def points(self) -> np.ndarray:
        """Admissible lattice points, shape ``(N, n)``."""
        pts = self.lattice() if self.include_lattice else np.empty((0, self.n))
        if self.indicator is not None and len(pts):
            keep = np.array([bool(self.indicator(p)) for p in pts], dtype=bool)
            pts = pts[keep]
        if self.extra:
            pts = np.vstack([pts, np.array(self.extra)])
        if len(pts) == 0:
            raise InputError("no grid point passes the region indicator")
        return pts

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        inside = np.all(x >= np.array(self.lo) - 1e-12) and np.all(x <= np.array(self.hi) + 1e-12)
        if not inside:
            return False
        return True if self.indicator is None else bool(self.indicator(x))

    @classmethod
    def from_points(cls, points, label: str = "", indicator=None, pad: float = 1e-9) -> "Region":
        """Region made of explicit sample points; ``indicator`` only serves ``contains``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if len(pts) == 0:
            raise InputError("no sample points given")
        lo = pts.min(axis=0) - pad
        hi = pts.max(axis=0) + pad
        return cls(tuple(lo), tuple(hi), (1,) * pts.shape[1], indicator=indicator, label=label,
                   extra=tuple(map(tuple, pts)), include_lattice=False)

    def meta(self) -> dict:
        return {"label": self.label, "lo": list(self.lo), "hi": list(self.hi),
                "counts": list(self.counts), "spacing": list(self.spacing()),
                "filtered": self.indicator is not None,
                "extraPoints": len(self.extra), "lattice": self.include_lattice}
