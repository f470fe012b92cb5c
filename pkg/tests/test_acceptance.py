"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines, or as a
script with ``python3 tests/test_acceptance.py``.
"""
import math
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

import property_checks as pc  # noqa: E402
from conftest import linear_system  # noqa: E402
from contracta.certificate import CONTRACTIVE  # noqa: E402
from contracta.exponents import estimate_bold_sigma_d  # noqa: E402
from contracta.floquet import (andronov_witt_boundary, construct_periodic_metric, floquet_multipliers,  # noqa: E402
                               tube_metric, tube_region)
from contracta.flow import SWEEP, monodromy  # noqa: E402
from contracta.linalg import FractionalDimension  # noqa: E402
from contracta.metric import certify_second_method, constant_metric, exponential_metric, root_table  # noqa: E402
from contracta.region import Region  # noqa: E402
from contracta.synthesis import SynthesisOptions, minimize_fractional_s, search_fixed_dimension  # noqa: E402
from contracta.systems import (LangfordParams, RigidBodyParams, langford_system, rigid_body_system,  # noqa: E402
                               rossler_reference_metric, rossler_region, rossler_system)

TWO_PI = 2 * math.pi


def report(number, title, checks, elapsed, limit):
    """Print the verdict line plus one line per sub-check; return overall pass."""
    checks = list(checks) + [(f"runtime {elapsed:.1f} s < {limit} s", elapsed < limit)]
    ok = all(passed for _, passed in checks)
    print(f"\n{'PASS' if ok else 'FAIL'}  criterion {number}: {title}")
    for text, passed in checks:
        print(f"      [{'ok' if passed else '--'}] {text}")
    return ok


def test_criterion_1_rossler_certification():
    t0 = time.perf_counter()
    ros = rossler_system()
    P, tau, _ = rossler_reference_metric()
    field_ = exponential_metric(P, tau, ros.potential)
    region = rossler_region(0.005)
    dim = FractionalDimension(2.60557, 3)
    cert = certify_second_method(ros.system, field_, region, dim)
    lam3 = root_table(ros.system, field_, region.points(), dim).roots[:, 2]
    elapsed = time.perf_counter() - t0
    y_max = cert.grid_meta["argmax"][1]
    assert report(1, "Rossler reference certification", [
        (f"Lambda = {cert.bound:+.6e} < 0 (argmax y = {y_max:+.3f}, {len(lam3)} points)", cert.bound < 0),
        (f"max lambda3 = {lam3.max():+.6e} < 0", bool(np.all(lam3 < 0))),
    ], elapsed, 5)


def test_criterion_2_rossler_dimension_bound():
    t0 = time.perf_counter()
    ros = rossler_system(0.386, 0.2)
    res = minimize_fractional_s(ros.system, 2, rossler_region(0.005), ros.potential,
                                SynthesisOptions(restarts=10, seeds=tuple(range(10))))
    elapsed = time.perf_counter() - t0
    s_star = res.s_star if res.feasible else float("nan")
    assert report(2, "Rossler dimension bound", [
        (f"dLower = {ros.d_lower:.9f} within 1e-6 of 2.6055653", abs(ros.d_lower - 2.6055653) <= 1e-6),
        (f"cubic residual = {ros.cubic_residual:.2e} <= 1e-12", ros.cubic_residual <= 1e-12),
        (f"sStar = {s_star:.7f} in [0.600, 0.615] (worst Xi {res.worst_xi:+.3e})",
         res.feasible and 0.600 <= s_star <= 0.615),
    ], elapsed, 600)


def test_criterion_3_rigid_body_threshold():
    t0 = time.perf_counter()
    tau_c = rigid_body_system(RigidBodyParams(tau=0.0)).tau_bound
    rb = rigid_body_system(RigidBodyParams(tau=0.9 * tau_c))
    dim = FractionalDimension(2, 3)
    region = rb.trapping_region()
    found = search_fixed_dimension(rb.system, dim, rb.trapping_region((9, 9, 9)), rb.energy,
                                   SynthesisOptions(restarts=3, init=((rb.P0, 0.1),)))
    fam = found.family
    cert = certify_second_method(rb.system, exponential_metric(fam.P0, fam.gamma, rb.energy), region, dim)

    above = rigid_body_system(RigidBodyParams(tau=1.01 * tau_c))
    target = 2 * above.params.delta * (above.u - 1)
    eq = Region.from_points([above.equilibrium])
    pointwise = {t: estimate_bold_sigma_d(above.system, eq, dim, [t]).bold_sigma for t in (50.0, 100.0, 200.0)}
    # growth rate of t * Sigma_2 beyond t = 50 (the asymptotic value of Sigma_2)
    rate = (200.0 * pointwise[200.0] - 50.0 * pointwise[50.0]) / 150.0
    elapsed = time.perf_counter() - t0
    assert report(3, "rigid-body threshold", [
        (f"tauBound = {tau_c:.9f} within 1e-9 of 4 sqrt(3) = {4 * math.sqrt(3):.9f}",
         abs(tau_c - 4 * math.sqrt(3)) <= 1e-9 and abs(tau_c - 6.928203) <= 1e-6),
        (f"0.9 tauBound: synthesized gamma = {fam.gamma:.4f}, Lambda = {cert.bound:+.4e} "
         f"on {cert.grid_meta['points']} trapping points", found.feasible and cert.verdict == CONTRACTIVE),
        ("1.01 tauBound: Sigma_2(t) at t = 50, 100, 200: "
         + ", ".join(f"{v:.5f}" for v in pointwise.values()), True),
        (f"1.01 tauBound: Sigma_2(200) = {pointwise[200.0]:.5f} within 1e-3 of {target:.6f}",
         abs(pointwise[200.0] - target) <= 1e-3),
        (f"1.01 tauBound: Sigma_2 rate for t >= 50 = {rate:.6f}, target {target:.6f} +- 1e-3",
         abs(rate - target) <= 1e-3),
    ], elapsed, 120)


def test_criterion_4_langford_floquet():
    t0 = time.perf_counter()
    lf = langford_system(LangfordParams(0.6))
    fr = floquet_multipliers(monodromy(lf.system, lf.orbit(0.0), lf.T))
    mods = np.sort(np.abs(fr.multipliers))[::-1]
    rho = math.exp(-0.2 * math.pi)

    def flag(a):
        sys_ = langford_system(LangfordParams(a))
        return floquet_multipliers(monodromy(sys_.system, sys_.orbit(0.0), sys_.T)).andronov_witt

    a_star = andronov_witt_boundary(flag, 0.55, 0.8, 1e-3)
    pm = construct_periodic_metric(lf.system, lf.orbit(0.0), lf.T)
    ts = np.linspace(0, pm.T, 41)[:-1]
    roots = np.array([pm.roots(t) for t in ts])
    std = roots.std(axis=0).max()
    eta = pm.root_constants
    elapsed = time.perf_counter() - t0
    assert report(4, "Langford Floquet", [
        (f"multiplier moduli {mods[0]:.12f}, {mods[1]:.10f}, {mods[2]:.10f}; e^(-0.2 pi) = {rho:.10f}",
         abs(mods[0] - 1) <= 1e-8 and np.all(np.abs(mods[1:] / rho - 1) <= 1e-6)),
        (f"Andronov-Witt boundary a = {a_star:.5f}, |a - 2/3| = {abs(a_star - 2 / 3):.1e} <= 1e-3",
         abs(a_star - 2 / 3) <= 1e-3),
        (f"P(0), P(T) identity residual = {pm.identity_residual():.2e} <= 1e-8", pm.identity_residual() <= 1e-8),
        (f"root stddev along orbit = {std:.2e} <= 1e-6", std <= 1e-6),
        (f"lambda1 + lambda2 = {eta[0] + eta[1]:+.8f} < 0", eta[0] + eta[1] < 0),
    ], elapsed, 30)


def test_criterion_5_method_consistency():
    t0 = time.perf_counter()
    diag = linear_system(np.diag([-1.0, -2.0, -3.0]))
    box = Region((-1, -1, -1), (1, 1, 1), (3, 3, 3))
    d25 = FractionalDimension(2.5, 3)
    est = estimate_bold_sigma_d(diag, box, d25, [1.0, 2.0, 4.0]).bold_sigma
    lin = certify_second_method(diag, constant_metric(np.eye(3)), box, d25)

    lf = langford_system(LangfordParams(0.6))
    pm = construct_periodic_metric(lf.system, lf.orbit(0.0), lf.T, lattice=64)
    tube = tube_region(pm, 0.005, n_phase=4, n_ring=2)
    d2 = FractionalDimension(2, 3)
    tube_est = estimate_bold_sigma_d(lf.system, tube, d2, [TWO_PI * 20], SWEEP).bold_sigma
    tube_cert = certify_second_method(lf.system, tube_metric(pm), tube, d2)
    elapsed = time.perf_counter() - t0
    assert report(5, "consistency of the two methods", [
        (f"linear: Sigma_2.5 estimate = {est:.10f} (target -4.5 +- 1e-6)", abs(est + 4.5) <= 1e-6),
        (f"linear: Lambda / 2 = {lin.bound / 2:.12f} (target -4.5 +- 1e-10)", abs(lin.bound / 2 + 4.5) <= 1e-10),
        (f"Langford tube: Sigma_2 estimate = {tube_est:+.5f} <= Lambda / 2 + 0.01 = {tube_cert.bound / 2 + 0.01:+.5f}",
         tube_est <= tube_cert.bound / 2 + 0.01),
    ], elapsed, math.inf)


def test_criterion_6_property_suites():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240601)
    gap, lam = pc.expansion_bound_gap()
    checks = [
        ("Horn inequality, 1000 pairs", pc.horn_ratio(rng, pairs=1000), 1e-10),
        ("Weyl inequality ratio", pc.weyl_ratio(rng), 1 + 1e-10),
        ("cocycle residual", pc.cocycle_residual(rng), 1e-6),
        ("Liouville residual at t = 10", pc.liouville_residual(10.0), 1e-5 * 10),
        ("Smith bound excess at t = 4 (log)", pc.smith_violation(4.0), math.log1p(1e-6)),
        ("fractional Smith bound excess at t = -1 (log)", pc.smith_violation(-1.0), math.log1p(1e-6)),
        ("dual-route root error, 500 instances", pc.dual_route_error(rng, 500), 1e-9),
        ("similarity invariance error", pc.similarity_error(rng), 1e-8),
        ("ellipsoid profile lemma iv-vii violation", pc.epony_violation(rng), 1e-9),
        ("ellipsoid image lemma i-iv violation", pc.elip_violation(rng), 1e-9),
        ("multiplicative compound identity error", pc.compound_identity_error(rng), 1e-9),
        ("additive compound eigenvalue-sum error", pc.additive_eigensum_error(rng), 1e-8),
        (f"expansion bound: -min log gap (Lambda = {lam:+.4f})", -gap, math.log1p(1e-6)),
    ]
    elapsed = time.perf_counter() - t0
    assert report(6, "property suites", [(f"{name}: {val:.3e} <= {tol:.1e}", val <= tol)
                                         for name, val, tol in checks], elapsed, 60)


if __name__ == "__main__":
    failed = 0
    for name, fn in list(globals().items()):
        if name.startswith("test_criterion"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
