"""Command-line frontend.

Exit codes: 0 success, 2 input error, 3 numerical or I/O failure,
4 a NOT-CONTRACTIVE verdict while ``--expect-contractive`` is set.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import math
import os
import sys as _sys

import numpy as np

from . import config as cfgmod
from .certificate import NOT_CONTRACTIVE, TOOL_VERSION
from .errors import InputError, NumericalError
from .flow import find_periodic_orbit, integrate, variational_flow, write_trajectory_csv
from .reporting import (Report, certificate_rows, dumps, exponent_rows, kcompound_check,
                        lambda_curve_rows, orbit_root_rows, sigma_curve_rows, write_csv,
                        write_report)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_VERDICT = 0, 2, 3, 4
TASKS = ("simulate", "exponents", "certify", "synthesize", "floquet", "kcompound")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(_sys.stderr)
        raise InputError(f"{self.prog}: {message}")


def _add_common(p):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--d", type=float, help="dimension d = d0 + s")
    p.add_argument("--t-max", type=float, dest="t_max", help="largest horizon")
    p.add_argument("--grid", help="grid counts per axis (comma separated) or a y step for rossler-y")
    p.add_argument("--out", help="output path (stdout when absent)")
    p.add_argument("--seed", type=int, help="first synthesis seed")
    p.add_argument("--format", choices=("json", "csv"), help="output format")
    p.add_argument("--expect-contractive", action="store_true", dest="expect_contractive",
                   help="exit with status 4 on a NOT-CONTRACTIVE verdict")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="contracta", description="d-contraction certificates for ODE systems")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for task in TASKS:
        _add_common(sub.add_parser(task, help=f"run the {task} task"))
    demo = sub.add_parser("demo", help="run a built-in benchmark")
    demo.add_argument("system", choices=sorted(cfgmod.BUILTINS))
    demo.add_argument("--task", choices=TASKS)
    demo.add_argument("--a", type=float, help="Langford parameter a")
    _add_common(demo)
    return parser


def _periodic_metric(cfg, bundle):
    from .floquet import ORBIT_OPTS, auto_precondition, construct_periodic_metric

    fl = cfg.get("floquet")
    if not fl or "xGuess" not in fl or "TGuess" not in fl:
        raise InputError("this run needs floquet.xGuess and floquet.TGuess")
    orbit = find_periodic_orbit(bundle.system, fl["xGuess"], fl["TGuess"], ORBIT_OPTS)
    from .flow import monodromy

    M = monodromy(bundle.system, orbit.x0, orbit.T, ORBIT_OPTS)
    Q, _ = auto_precondition(M)
    return construct_periodic_metric(bundle.system, orbit.x0, orbit.T, Q, fl.get("lattice", 512))


def _needs_orbit(cfg) -> bool:
    return (cfg.get("region", {}).get("kind") == "tube"
            or cfg.get("metric", {}).get("kind") == "periodic")


def run_task(cfg: dict):
    """Execute the configured task; returns ``(results, table, extras, warnings, verdict)``."""
    task = cfg.get("task")
    if task not in TASKS:
        raise InputError("the configuration needs a task")
    bundle = cfgmod.build_system(cfg["system"])
    sys = bundle.system
    opts = cfgmod.build_options(cfg.get("integrator"))
    pm = _periodic_metric(cfg, bundle) if task in ("exponents", "certify", "kcompound") and _needs_orbit(cfg) else None
    warnings, extras, table, verdict = [], {}, None, None

    def region():
        if "region" not in cfg:
            raise InputError("the configuration needs a region")
        return cfgmod.build_region(cfg["region"], bundle, pm)

    if task == "simulate":
        sim = cfg.get("simulate", {})
        if "x0" not in sim or "t" not in sim:
            raise InputError("simulate needs x0 and t")
        t = float(sim["t"])
        samples = np.linspace(0.0, t, int(sim.get("samples", 101)))[1:]
        if sim.get("variational"):
            final, states = variational_flow(sys, sim["x0"], t, opts, checkpoints=list(samples))
            states = [variational_flow(sys, sim["x0"], 0.0, opts)] + states
            table = ("trajectory", states)
            results = {"final": final.x, "logScale": final.log_scale, "X": final.X,
                       "errorEstimate": final.error_estimate}
        else:
            traj = integrate(sys, sim["x0"], t, opts, samples=samples)
            table = ("trajectory", traj)
            results = {"final": traj.final, "errorEstimate": traj.error_estimate,
                       "steps": traj.n_steps, "samples": len(traj.t)}
    elif task == "exponents":
        from .exponents import estimate_bold_sigma_d, first_method_verdict

        dim = cfgmod.build_dimension(cfg, sys.n)
        rep = estimate_bold_sigma_d(sys, region(), dim, cfgmod.horizons_of(cfg), opts,
                                    check_invariance=bool(cfg.get("checkInvariance", False)))
        cert = first_method_verdict(rep, cfg.get("margin", 1e-6))
        results = {"report": rep.to_dict(), "certificate": cert.to_dict()}
        table = ("rows", exponent_rows(rep))
        extras = {"sigma_vs_t": sigma_curve_rows(rep), "lambda_vs_t": lambda_curve_rows(rep)}
        warnings.extend(rep.flags)
        verdict = cert.verdict
    elif task == "certify":
        from .metric import certify_second_method

        dim = cfgmod.build_dimension(cfg, sys.n)
        if "metric" not in cfg:
            raise InputError("certify needs a metric")
        field_ = cfgmod.build_metric(cfg["metric"], bundle, pm)
        cert, tab = certify_second_method(sys, field_, region(), dim, cfg.get("margin", 1e-6),
                                          opts, return_table=True)
        results = {"certificate": cert.to_dict(),
                   "rootMaxima": [float(v) for v in np.nanmax(tab.roots, axis=0)]}
        table = ("rows", certificate_rows(tab))
        verdict = cert.verdict
    elif task == "synthesize":
        from .synthesis import SynthesisOptions, minimize_fractional_s, search_fixed_dimension
        from .linalg import FractionalDimension

        syn = cfg.get("synthesis", {})
        if bundle.potential is None:
            raise InputError("synthesis needs a system with a scalar potential")
        init = tuple((np.asarray(e["P0"], dtype=float), float(e["gamma"])) for e in syn.get("init", []))
        seeds = cfg.get("seeds", list(range(10)))
        sopts = SynthesisOptions(restarts=len(seeds), seeds=seeds, max_eval=syn.get("maxEval", 1500),
                                 s_tol=syn.get("sTol", 1e-4), init=init,
                                 active_stride=syn.get("activeStride", 10))
        d0 = int(syn.get("d0", math.floor(cfg.get("d", 2))))
        if syn.get("fixedS") is not None:
            dim = FractionalDimension(d0 + float(syn["fixedS"]), sys.n)
            res = search_fixed_dimension(sys, dim, region(), bundle.potential, sopts)
            results = {"d": dim.d, "feasible": res.feasible, "worstXi": res.worst_xi,
                       "P0": res.family.P0.reshape(-1), "gamma": res.family.gamma,
                       "attempts": res.attempts, "seeds": list(seeds)}
        else:
            res = minimize_fractional_s(sys, d0, region(), bundle.potential, sopts)
            results = res.to_dict()
            if not res.feasible:
                warnings.append(f"no feasible s in [0, 1] at d0={d0}")
    elif task == "floquet":
        from .floquet import orbital_stability_report

        fl = cfg.get("floquet", {})
        if "xGuess" not in fl or "TGuess" not in fl:
            raise InputError("floquet needs xGuess and TGuess")
        rep = orbital_stability_report(sys, fl["xGuess"], fl["TGuess"], fl.get("kappa", "auto"),
                                       lattice=fl.get("lattice", 512))
        results = rep.to_dict()
        if rep.metric is not None:
            table = ("rows", orbit_root_rows(rep.metric))
        warnings.extend(rep.notes)
    else:
        k = int(cfg.get("kcompound", {}).get("k", 2))
        results = kcompound_check(sys, k, region())
    return results, table, extras, warnings, verdict


def _write_table(path, table):
    kind, data = table
    if kind == "trajectory":
        write_trajectory_csv(path, data)
    else:
        write_csv(path, data)


def execute(cfg: dict, out=None):
    """Run a validated configuration and emit its report; returns the report."""
    results, table, extras, warnings, verdict = run_task(cfg)
    report = Report(
        config=cfg, results=results,
        provenance={"toolVersion": TOOL_VERSION,
                    "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
                    "seeds": cfg.get("seeds", [])},
        warnings=warnings)
    output = cfg.get("output", {})
    fmt = output.get("format", "json")
    path = output.get("path")
    stream = out or _sys.stdout
    if path:
        if fmt == "csv":
            if table is None:
                raise InputError("this task has no CSV table")
            _write_table(path, table)
            write_report(report, os.path.splitext(path)[0] + ".json")
        else:
            write_report(report, path)
        stem = os.path.splitext(path)[0]
        for name, rows in extras.items():
            write_csv(f"{stem}_{name}.csv", rows)
    elif fmt == "csv" and table is not None:
        _write_table(stream, table)
    else:
        stream.write(dumps(report.to_dict()))
    return report, verdict


def _config_for(args) -> dict:
    if args.command == "demo":
        cfg = cfgmod.load_config(args.config) if args.config else cfgmod.fixture_config(args.system)
        if args.task:
            cfg["task"] = args.task
        if args.a is not None:
            if args.system != "langford":
                raise InputError("--a applies to the Langford demo only")
            cfg["system"]["params"]["a"] = args.a
            if 0.5 < args.a < 1:
                R = math.sqrt((1 - args.a) * (2 * args.a - 1))
                cfg.setdefault("floquet", {})["xGuess"] = [R, 0.0, 1 - args.a]
    else:
        if not args.config:
            raise InputError("--config is required")
        cfg = cfgmod.load_config(args.config)
        cfg["task"] = args.command
    return cfgmod.apply_overrides(cfg, args)


def run_cli(argv=None, out=None) -> int:
    """Parse ``argv``, run and return the exit code."""
    try:
        args = build_parser().parse_args(argv)
        cfg = _config_for(args)
        _, verdict = execute(cfg, out)
    except InputError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_INPUT
    except SystemExit as exc:
        return int(exc.code or 0)
    except (NumericalError, OSError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=_sys.stderr)
        return EXIT_NUMERIC
    if args.expect_contractive and verdict == NOT_CONTRACTIVE:
        return EXIT_VERDICT
    return EXIT_OK


def main() -> None:
    _sys.exit(run_cli())


if __name__ == "__main__":
    main()
