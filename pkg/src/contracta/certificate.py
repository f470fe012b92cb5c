"""Contraction certificates shared by the exponent and metric criteria."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InputError
from .linalg import FractionalDimension

CONTRACTIVE = "CONTRACTIVE"
INCONCLUSIVE = "INCONCLUSIVE"
NOT_CONTRACTIVE = "NOT-CONTRACTIVE"
INVALID_METRIC = "INVALID-METRIC"

DEFAULT_MARGIN = 1e-6
TOOL_VERSION = "0.1.0"


def verdict_from_bound(bound: float, margin: float = DEFAULT_MARGIN) -> str:
    """Three-way sign decision with a dead band of half-width ``margin``."""
    if not np.isfinite(bound):
        return INCONCLUSIVE
    if bound < -margin:
        return CONTRACTIVE
    if bound > margin:
        return NOT_CONTRACTIVE
    return INCONCLUSIVE


@dataclass(frozen=True)
class ContractionCertificate:
    """Outcome of a contraction test.

    ``bound`` is the estimate of the bold Sigma_d (method ``"first"``) or the
    grid maximum Lambda of the forward functional (method ``"second"``).
    """

    method: str
    dim: FractionalDimension
    bound: float
    verdict: str
    reverse_bound: Optional[float] = None
    decay_rate: Optional[float] = None
    grid_meta: dict = field(default_factory=dict)
    margin: float = DEFAULT_MARGIN
    notes: tuple = ()
    offending_point: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.method not in ("first", "second"):
            raise InputError(f"unknown method {self.method!r}")
        if self.verdict == CONTRACTIVE and not self.bound < 0:
            raise InputError("a contractive verdict needs a negative bound")

    @property
    def reverse_decay_rate(self) -> Optional[float]:
        return None if self.reverse_bound is None else self.reverse_bound / 2.0

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "d": self.dim.d,
            "Lambda": self.bound,
            "LambdaMinus": self.reverse_bound,
            "decayRate": self.decay_rate,
            "verdict": self.verdict,
            "grid": self.grid_meta,
            "margins": {"verdict": self.margin},
            "toolVersion": TOOL_VERSION,
            "notes": list(self.notes),
        }
        if self.offending_point is not None:
            out["offendingPoint"] = [float(v) for v in self.offending_point]
        return out
