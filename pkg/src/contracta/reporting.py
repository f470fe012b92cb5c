"""Reports: canonical JSON, CSV tables and plot-ready companions."""
from __future__ import annotations

import contextlib
import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .flow import DynamicalSystem
from .linalg import FractionalDimension, additive_compound, log_norm2
from .metric import RootTable, certify_second_method, constant_metric
from .region import Region


@dataclass
class Report:
    """``config`` echoes the effective configuration; ``results`` is the task payload."""

    config: dict
    results: dict
    provenance: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"config": self.config, "results": self.results,
                "provenance": self.provenance, "warnings": list(self.warnings)}

    @classmethod
    def from_dict(cls, data: dict) -> "Report":
        return cls(data.get("config", {}), data.get("results", {}),
                   data.get("provenance", {}), list(data.get("warnings", [])))


def _plain(obj):
    """Convert numpy containers and scalars to JSON-ready Python values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return "%.17g" % obj if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = sorted(obj.items())
        return "{\n" + ",\n".join(pad + json.dumps(k) + ": " + _encode(v, indent, level + 1)
                                  for k, v in items) + "\n" + end + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """Canonical JSON: sorted keys, floats with 17 significant digits, NaN as null."""
    return _encode(_plain(obj), indent, 0) + "\n"


def write_report(report: Report, path, fmt: str = "json", table=None) -> list:
    """Write ``report`` as JSON, or its bulk table as CSV; returns written paths.

    With ``fmt="csv"`` the ``table`` argument (a list of rows with a header
    row first) is written to ``path`` and the JSON report next to it.
    """
    path = os.fspath(path)
    written = []
    if fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(dumps(report.to_dict()))
        written.append(path)
    elif fmt == "csv":
        if table is None:
            raise InputError("this task has no CSV table")
        write_csv(path, table)
        written.append(path)
        side = os.path.splitext(path)[0] + ".json"
        with open(side, "w", encoding="utf-8") as fh:
            fh.write(dumps(report.to_dict()))
        written.append(side)
    else:
        raise InputError(f"unknown format {fmt!r}")
    return written


def read_report(path) -> Report:
    with open(path, encoding="utf-8") as fh:
        return Report.from_dict(json.load(fh))


def _fmt(v):
    if isinstance(v, str):
        return v
    return "%.17g" % float(v)


def write_csv(path, rows) -> None:
    """Write ``rows`` (header first) to a path or an open text stream."""
    rows = list(rows)
    with contextlib.ExitStack() as stack:
        fh = path if hasattr(path, "write") else stack.enter_context(
            open(path, "w", newline="", encoding="utf-8"))
        w = csv.writer(fh)
        w.writerow(rows[0])
        for r in rows[1:]:
            w.writerow([_fmt(v) for v in r])


def certificate_rows(table: RootTable) -> list:
    n = table.points.shape[1]
    header = ([f"x{i+1}" for i in range(n)] + [f"lambda{i+1}" for i in range(n)]
              + ["xi_forward", "xi_reverse"])
    rows = [header]
    for x, lam, f, r in zip(table.points, table.roots, table.xi_forward, table.xi_reverse):
        rows.append(list(x) + list(lam) + [f, r])
    return rows


def exponent_rows(report) -> list:
    n = report.points.shape[1]
    header = [f"x{i+1}" for i in range(n)] + ["t"] + [f"Lambda{i+1}" for i in range(n)] + ["Sigma_d"]
    rows = [header]
    for x, t, lam, sig in report.records():
        rows.append(list(x) + [t] + list(lam) + [sig])
    return rows


def sigma_curve_rows(report) -> list:
    """Per-horizon grid maximum of Sigma_d (plot data)."""
    rows = [["t", "Sigma_d_max"]]
    rows += [[t, v] for t, v in zip(report.horizons, report.per_horizon)]
    return rows


def lambda_curve_rows(report) -> list:
    """Exponents versus t at the grid point maximizing Sigma_d at the last horizon."""
    n = report.points.shape[1]
    i = int(np.argmax(report.sigma[:, -1]))
    rows = [["t"] + [f"Lambda{k+1}" for k in range(n)]]
    rows += [[t] + list(report.lambdas[i, j]) for j, t in enumerate(report.horizons)]
    return rows


def orbit_root_rows(pm, samples: int = 64) -> list:
    """Criterion roots versus time along a periodic orbit (plot data)."""
    n = len(pm.x0)
    rows = [["t"] + [f"lambda{k+1}" for k in range(n)]]
    for t in np.linspace(0.0, pm.T, samples, endpoint=False):
        rows.append([t] + list(pm.roots(t)))
    return rows


def kcompound_check(sys: DynamicalSystem, k: int, region: Region, compare: bool = True) -> dict:
    """Grid supremum of the log-norm of the k-th additive compound of ``Df``.

    A negative value is the classical sufficient condition for
    k-contraction.  With ``compare`` the second criterion with ``P = I`` at
    ``d = k`` is reported too; it equals twice the log-norm supremum.
    """
    if not 1 <= k <= sys.n:
        raise InputError(f"k must lie in [1, {sys.n}]")
    pts = region.points()
    A = sys.jac_batch(pts)
    C = additive_compound(A, k)
    sym = 0.5 * (C + np.swapaxes(C, -1, -2))
    nu = np.linalg.eigvalsh(sym)[:, -1]
    i = int(np.argmax(nu))
    out = {"k": int(k), "supNu": float(nu[i]), "argmax": [float(v) for v in pts[i]],
           "condition": bool(nu[i] < 0), "points": int(len(pts)), "grid": region.meta()}
    if compare:
        cert = certify_second_method(sys, constant_metric(np.eye(sys.n)), region,
                                     FractionalDimension(k, sys.n))
        out["secondMethodLambda"] = cert.bound
        out["secondMethodVerdict"] = cert.verdict
    return out


def log_norm_point(sys: DynamicalSystem, x, k: int) -> float:
    return log_norm2(additive_compound(sys.jac(x), k))
