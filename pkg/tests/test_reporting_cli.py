import csv
import io
import json
import math

import numpy as np
import pytest

from contracta import cli
from contracta.config import (apply_overrides, build_metric, build_region, build_system, fixture_config,
                              horizons_of, load_config, validate)
from contracta.errors import InputError
from contracta.exponents import estimate_bold_sigma_d
from contracta.linalg import FractionalDimension
from contracta.metric import constant_metric, root_table
from contracta.region import Region
from contracta.reporting import (Report, certificate_rows, dumps, exponent_rows, kcompound_check,
                                 lambda_curve_rows, log_norm_point, read_report, sigma_curve_rows,
                                 write_csv, write_report)
from contracta.systems import RigidBodyParams, rigid_body_system, rossler_region, rossler_system

from conftest import linear_system

BOX = Region((-1, -1, -1), (1, 1, 1), (3, 3, 3))


def run(argv):
    buf = io.StringIO()
    code = cli.run_cli(argv, out=buf)
    return code, buf.getvalue()


def write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


LINEAR = {"system": {"name": "linear", "params": {"A": [[-1, 0, 0], [0, -2, 0], [0, 0, -3]]}},
          "d": 2.5, "region": {"kind": "box", "lo": [-1, -1, -1], "hi": [1, 1, 1], "counts": [3, 3, 3]},
          "metric": {"kind": "identity"}, "horizons": [1.0, 2.0]}


# ---------------------------------------------------------------- reporting

def test_json_is_canonical():
    text = dumps({"b": 1.0 / 3.0, "a": [float("nan"), 2], "c": []})
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert "0.33333333333333331" in text
    data = json.loads(text)
    assert data["a"][0] is None and data["c"] == []


def test_report_roundtrip(tmp_path):
    rep = Report(config={"task": "certify"}, results={"Lambda": -0.123456789012345678, "v": [1.5, 2.5]},
                 provenance={"toolVersion": "0.1.0"}, warnings=[])
    path = tmp_path / "r.json"
    write_report(rep, path)
    assert '"warnings": []' in path.read_text()
    assert read_report(path) == rep


def test_write_report_csv_needs_table(tmp_path):
    rep = Report({}, {})
    with pytest.raises(InputError):
        write_report(rep, tmp_path / "x.csv", "csv")
    with pytest.raises(InputError):
        write_report(rep, tmp_path / "x.txt", "yaml")
    paths = write_report(rep, tmp_path / "x.csv", "csv", table=[["a"], [1.0]])
    assert paths[1].endswith("x.json")


def test_certificate_csv_header(diag_sys):
    tab = root_table(diag_sys, constant_metric(np.eye(3)), BOX.points(), FractionalDimension(2.5, 3))
    rows = certificate_rows(tab)
    assert rows[0] == ["x1", "x2", "x3", "lambda1", "lambda2", "lambda3", "xi_forward", "xi_reverse"]
    buf = io.StringIO()
    write_csv(buf, rows)
    parsed = list(csv.reader(io.StringIO(buf.getvalue())))
    assert len(parsed) == 28 and float(parsed[1][6]) == -9.0


def test_exponent_tables(diag_sys):
    rep = estimate_bold_sigma_d(diag_sys, Region.from_points([[1.0, 0, 0]]), FractionalDimension(2.5, 3), [1.0, 2.0])
    rows = exponent_rows(rep)
    assert rows[0] == ["x1", "x2", "x3", "t", "Lambda1", "Lambda2", "Lambda3", "Sigma_d"]
    assert sigma_curve_rows(rep)[0] == ["t", "Sigma_d_max"] and len(sigma_curve_rows(rep)) == 3
    assert lambda_curve_rows(rep)[2][0] == 2.0


def test_kcompound_examples():
    diag = linear_system(np.diag([-1.0, -2.0, -3.0]))
    out = kcompound_check(diag, 2, BOX)
    assert out["supNu"] == pytest.approx(-3.0) and out["condition"]
    assert out["secondMethodLambda"] == pytest.approx(2 * out["supNu"])
    rb = rigid_body_system(RigidBodyParams(tau=0.0))
    out = kcompound_check(rb.system, 3, Region((-2, -2, -2), (2, 2, 2), (3, 3, 3)))
    assert out["supNu"] == pytest.approx(-3.0)
    ros = rossler_system()
    out = kcompound_check(ros.system, 2, rossler_region(0.5))
    assert isinstance(out["condition"], bool)
    assert log_norm_point(diag, np.zeros(3), 1) == pytest.approx(-1.0)
    with pytest.raises(InputError):
        kcompound_check(diag, 4, BOX)


# ------------------------------------------------------------------- config

def test_fixtures_validate():
    for name in ("rigid-body", "rossler", "langford"):
        cfg = fixture_config(name)
        assert cfg["system"]["name"] == name


def test_schema_rejects_bad_config(tmp_path):
    with pytest.raises(InputError):
        validate({"system": {"name": "nope"}})
    with pytest.raises(InputError):
        validate(dict(LINEAR, d="two"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(InputError):
        load_config(bad)


def test_published_schema_matches_package():
    from pathlib import Path
    from contracta.config import schema

    docs = Path(__file__).parents[1] / "docs" / "schema.json"
    assert json.loads(docs.read_text()) == schema()


def test_build_helpers():
    b = build_system(LINEAR["system"])
    assert b.system.n == 3
    with pytest.raises(InputError):
        build_system({"name": "rossler", "params": {"q": 1}})
    with pytest.raises(InputError):
        build_region({"kind": "box", "lo": [0], "hi": [1], "counts": [2]}, b)
    with pytest.raises(InputError):
        build_region({"kind": "tube"}, b)
    with pytest.raises(InputError):
        build_metric({"kind": "fixture"}, b)
    assert horizons_of({"horizons": [1, 2, 8], "tMax": 4}) == [1.0, 2.0, 4.0]
    assert horizons_of({"tMax": 4}) == [1.0, 2.0, 4.0]
    with pytest.raises(InputError):
        horizons_of({})


def test_python_callable_system():
    b = build_system({"name": "python", "callable": "external_system:damped_pair", "params": {"rate": 2.0}})
    assert b.system.n == 2 and b.system.jac(np.zeros(2))[0, 0] == -2.0
    with pytest.raises(InputError):
        build_system({"name": "python", "callable": "no_such_module:f"})


def test_overrides_echoed():
    import argparse

    args = argparse.Namespace(d=1.5, t_max=None, grid="5,5,5", seed=3, out="x.json", format="json")
    cfg = apply_overrides(dict(LINEAR, seeds=[0, 1]), args)
    assert cfg["d"] == 1.5 and cfg["region"]["counts"] == [5, 5, 5]
    assert cfg["seeds"] == [3, 4] and cfg["output"] == {"path": "x.json", "format": "json"}
    ros = fixture_config("rossler")
    args = argparse.Namespace(d=None, t_max=None, grid="0.01", seed=None, out=None, format=None)
    assert apply_overrides(ros, args)["region"]["step"] == 0.01


# ---------------------------------------------------------------------- CLI

def test_cli_certify_linear(tmp_path):
    code, out = run(["certify", "--config", write_cfg(tmp_path, LINEAR)])
    assert code == 0
    rep = json.loads(out)
    assert rep["results"]["certificate"]["Lambda"] == -9.0
    assert rep["config"]["task"] == "certify"


def test_cli_config_echo_matches_effective(tmp_path):
    code, out = run(["exponents", "--config", write_cfg(tmp_path, LINEAR), "--d", "1.5", "--grid", "2,2,2"])
    assert code == 0
    rep = json.loads(out)
    assert rep["config"]["d"] == 1.5 and rep["config"]["region"]["counts"] == [2, 2, 2]
    assert rep["results"]["report"]["boldSigmaEstimate"] == pytest.approx(-2.0)


def test_cli_determinism(tmp_path):
    path = write_cfg(tmp_path, LINEAR)
    a = json.loads(run(["exponents", "--config", path])[1])
    b = json.loads(run(["exponents", "--config", path])[1])
    assert dumps(a["results"]) == dumps(b["results"])


def test_cli_outputs(tmp_path):
    path = write_cfg(tmp_path, LINEAR)
    out = tmp_path / "exp.csv"
    assert run(["exponents", "--config", path, "--out", str(out), "--format", "csv"])[0] == 0
    assert out.read_text().startswith("x1,x2,x3,t,Lambda1")
    assert (tmp_path / "exp.json").exists()
    assert (tmp_path / "exp_sigma_vs_t.csv").read_text().startswith("t,Sigma_d_max")
    assert (tmp_path / "exp_lambda_vs_t.csv").exists()
    code, text = run(["certify", "--config", path, "--format", "csv"])
    assert code == 0 and text.startswith("x1,x2,x3,lambda1")


def test_cli_simulate(tmp_path):
    cfg = dict(LINEAR, simulate={"x0": [1, 1, 1], "t": 1.0, "samples": 11, "variational": True})
    code, text = run(["simulate", "--config", write_cfg(tmp_path, cfg), "--format", "csv"])
    assert code == 0
    lines = text.splitlines()
    assert lines[0].startswith("t,x1,x2,x3,X11") and len(lines) == 12
    assert float(lines[-1].split(",")[1]) == pytest.approx(math.exp(-1), rel=1e-9)


def test_cli_kcompound_and_synthesize(tmp_path):
    cfg = dict(LINEAR, kcompound={"k": 2}, seeds=[0], synthesis={"d0": 2, "maxEval": 200})
    path = write_cfg(tmp_path, cfg)
    code, text = run(["kcompound", "--config", path])
    assert code == 0 and json.loads(text)["results"]["supNu"] == pytest.approx(-3.0)
    code, text = run(["synthesize", "--config", path])
    assert code == 0 and json.loads(text)["results"]["sStar"] <= 1e-4


def test_cli_exit_codes(tmp_path):
    assert run(["exponents", "--config", str(tmp_path / "missing.json")])[0] == 2
    assert run(["certify", "--bogus-flag"])[0] == 2
    assert run(["certify"])[0] == 2
    assert run([])[0] == 2
    bad = dict(LINEAR, d=7.0)
    assert run(["certify", "--config", write_cfg(tmp_path, bad)])[0] == 2
    grow = dict(LINEAR, system={"name": "linear", "params": {"A": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}})
    path = write_cfg(tmp_path, grow, "grow.json")
    assert run(["certify", "--config", path])[0] == 0
    assert run(["certify", "--config", path, "--expect-contractive"])[0] == 4
    blow = {"system": {"name": "python", "callable": "external_system:damped_pair", "params": {"rate": -50.0}},
            "simulate": {"x0": [1, 0], "t": 100.0}, "integrator": {"maxSteps": 50}}
    assert run(["simulate", "--config", write_cfg(tmp_path, blow, "blow.json")])[0] == 3
    assert run(["certify", "--config", path, "--out", str(tmp_path / "no" / "dir.json")])[0] == 3


def test_demo_rossler_certify():
    code, text = run(["demo", "rossler", "--task", "certify"])
    assert code == 0
    cert = json.loads(text)["results"]["certificate"]
    assert cert["d"] == 2.60557 and cert["grid"]["points"] == 8001
    assert cert["Lambda"] == pytest.approx(3.975e-5, rel=1e-2)


def test_demo_langford_floquet():
    code, text = run(["demo", "langford", "--task", "floquet", "--a", "0.6"])
    assert code == 0
    res = json.loads(text)["results"]
    assert res["andronovWitt"] is True
    assert res["multipliers"][1]["modulus"] == pytest.approx(0.53349, abs=1e-5)


def test_demo_rejects_a_for_other_systems():
    assert run(["demo", "rossler", "--a", "0.6"])[0] == 2
