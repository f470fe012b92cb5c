"""Run configuration: schema validation and construction of the run objects."""
from __future__ import annotations

import copy
import importlib
import json
import math
from functools import lru_cache
from importlib import resources

import jsonschema
import numpy as np

from .errors import InputError
from .flow import CERTIFY, DynamicalSystem, IntegratorOptions
from .linalg import FractionalDimension
from .metric import MetricField, constant_metric, exponential_metric
from .region import Region
from .systems import (LangfordParams, Potential, RigidBodyParams, RosslerParams, langford_system,
                      rigid_body_system, rossler_reference_metric, rossler_region, rossler_system)

BUILTINS = {"rigid-body": "rigid_body.json", "rossler": "rossler.json", "langford": "langford.json"}


@lru_cache(maxsize=None)
def schema() -> dict:
    return json.loads(resources.files("contracta").joinpath("schema.json").read_text(encoding="utf-8"))


def validate(config: dict) -> dict:
    try:
        jsonschema.validate(config, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InputError(f"invalid configuration at {where}: {exc.message}") from None
    return config


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise InputError(f"configuration file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"configuration is not valid JSON: {exc}") from None
    return validate(data)


def fixture_config(name: str) -> dict:
    if name not in BUILTINS:
        raise InputError(f"unknown demo system {name!r}")
    text = resources.files("contracta").joinpath("fixtures", BUILTINS[name]).read_text(encoding="utf-8")
    return validate(json.loads(text))


class Bundle:
    """System plus the optional analytic data of a built-in benchmark."""

    def __init__(self, system: DynamicalSystem, analytic=None, potential: Potential = None):
        self.system = system
        self.analytic = analytic
        self.potential = potential


def build_system(spec: dict) -> Bundle:
    name = spec["name"]
    params = dict(spec.get("params", {}))
    try:
        if name == "rigid-body":
            rb = rigid_body_system(RigidBodyParams(**params))
            return Bundle(rb.system, rb, rb.energy)
        if name == "rossler":
            r = rossler_system(RosslerParams(**params))
            return Bundle(r.system, r, r.potential)
        if name == "langford":
            lf = langford_system(LangfordParams(**params))
            return Bundle(lf.system, lf, None)
    except TypeError as exc:
        raise InputError(f"bad parameters for {name}: {exc}") from None
    if name == "linear":
        if "A" not in params:
            raise InputError("linear system needs params.A")
        A = np.asarray(params["A"], dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InputError("params.A must be square")
        sys = DynamicalSystem(A.shape[0], lambda x: np.asarray(x) @ A.T,
                              lambda x: np.broadcast_to(A, np.shape(x)[:-1] + A.shape).copy(),
                              name="linear", vectorized=True)
        zero = Potential(lambda x: np.zeros(np.shape(x)[:-1]), lambda x: np.zeros(np.shape(x)[:-1]), "0")
        return Bundle(sys, None, zero)
    if name == "python":
        target = spec.get("callable")
        if not target:
            raise InputError("system 'python' needs a 'callable' of the form module:function")
        mod, fn = target.split(":")
        try:
            obj = getattr(importlib.import_module(mod), fn)(**params)
        except (ImportError, AttributeError) as exc:
            raise InputError(f"cannot load {target}: {exc}") from None
        if isinstance(obj, DynamicalSystem):
            return Bundle(obj)
        return Bundle(obj.system, obj, getattr(obj, "potential", None))
    raise InputError(f"unknown system {name!r}")


def build_options(spec: dict | None) -> IntegratorOptions:
    if not spec:
        return CERTIFY
    keys = {"method": "method", "atol": "atol", "rtol": "rtol", "maxStep": "max_step",
            "minStep": "min_step", "maxSteps": "max_steps", "step": "step"}
    kw = {keys[k]: v for k, v in spec.items()}
    try:
        return IntegratorOptions(**kw)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def build_dimension(config: dict, n: int) -> FractionalDimension:
    if "d" not in config:
        raise InputError("the configuration needs a dimension 'd'")
    return FractionalDimension(float(config["d"]), n)


def build_region(spec: dict, bundle: Bundle, periodic_metric=None) -> Region:
    kind = spec["kind"]
    n = bundle.system.n
    if kind == "box":
        for key in ("lo", "hi", "counts"):
            if key not in spec:
                raise InputError(f"box region needs '{key}'")
        if not len(spec["lo"]) == len(spec["hi"]) == len(spec["counts"]) == n:
            raise InputError("box bounds must match the system dimension")
        return Region(spec["lo"], spec["hi"], spec["counts"], label="box")
    if kind == "points":
        pts = np.asarray(spec.get("points", []), dtype=float)
        if pts.ndim != 2 or pts.shape[1] != n:
            raise InputError("points must be an array of states")
        return Region.from_points(pts, label="explicit points")
    if kind == "rossler-y":
        return rossler_region(spec.get("step", 0.005), spec.get("yMax", 20.0))
    if kind == "trapping-ellipsoid":
        if not hasattr(bundle.analytic, "trapping_region"):
            raise InputError("trapping-ellipsoid regions need the rigid-body system")
        return bundle.analytic.trapping_region(tuple(spec.get("counts", (15, 15, 15))), spec.get("beta"))
    if kind == "equilibrium":
        eq = getattr(bundle.analytic, "equilibrium", None)
        if eq is None:
            raise InputError("this system has no designated equilibrium")
        return Region.from_points([eq], label="equilibrium")
    if kind == "tube":
        if periodic_metric is None:
            raise InputError("tube regions need a periodic orbit (floquet settings)")
        from .floquet import tube_region
        return tube_region(periodic_metric, spec.get("radius", 0.005), spec.get("phases", 16),
                           spec.get("rings", 8))
    raise InputError(f"unknown region kind {kind!r}")


def build_metric(spec: dict, bundle: Bundle, periodic_metric=None) -> MetricField:
    kind = spec["kind"]
    n = bundle.system.n
    if kind == "identity":
        return constant_metric(np.eye(n), "identity")
    if kind == "constant":
        return constant_metric(np.asarray(spec["P0"], dtype=float), "constant P0")
    if kind == "exponential":
        P0 = spec.get("P0")
        if P0 is None:
            P0 = getattr(bundle.analytic, "P0", None)
        if P0 is None or bundle.potential is None:
            raise InputError("exponential metric needs P0 and a system potential")
        return exponential_metric(np.asarray(P0, dtype=float), spec.get("gamma", 0.0), bundle.potential)
    if kind == "fixture":
        if bundle.potential is None or not hasattr(bundle.analytic, "gamma"):
            raise InputError("the fixture metric belongs to the Rössler system")
        P, tau, _ = rossler_reference_metric()
        return exponential_metric(P, tau, bundle.potential, "reference metric P* exp(0.25 (z - b x))")
    if kind == "periodic":
        if periodic_metric is None:
            raise InputError("periodic metric needs floquet settings")
        from .floquet import tube_metric
        return tube_metric(periodic_metric)
    raise InputError(f"unknown metric kind {kind!r}")


def horizons_of(config: dict):
    from .exponents import default_horizons

    if "horizons" in config:
        hs = [float(h) for h in config["horizons"]]
        if "tMax" in config:
            hs = [h for h in hs if h < float(config["tMax"])] + [float(config["tMax"])]
        return hs
    if "tMax" in config:
        return default_horizons(float(config["tMax"]))
    raise InputError("the configuration needs 'horizons' or 'tMax'")


def apply_overrides(config: dict, args) -> dict:
    """Merge command-line overrides into a copy of ``config`` and revalidate."""
    cfg = copy.deepcopy(config)
    if getattr(args, "d", None) is not None:
        cfg["d"] = args.d
    if getattr(args, "t_max", None) is not None:
        cfg["tMax"] = args.t_max
    if getattr(args, "grid", None):
        vals = [v for v in args.grid.split(",") if v.strip()]
        region = cfg.setdefault("region", {"kind": "box"})
        try:
            if region.get("kind") == "rossler-y" and len(vals) == 1:
                region["step"] = float(vals[0])
            else:
                region["counts"] = [int(v) for v in vals]
        except ValueError:
            raise InputError(f"cannot parse --grid {args.grid!r}") from None
    if getattr(args, "seed", None) is not None:
        count = len(cfg.get("seeds", [])) or 1
        cfg["seeds"] = list(range(args.seed, args.seed + count))
    out = cfg.setdefault("output", {})
    if getattr(args, "out", None):
        out["path"] = args.out
    if getattr(args, "format", None):
        out["format"] = args.format
    if not out:
        cfg.pop("output")
    return validate(cfg)
