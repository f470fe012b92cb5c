"""Langford-type system: Floquet multipliers and a periodic contraction metric.

Sweeps the parameter a across the stability window, prints the nontrivial
multiplier modulus, and certifies d = 2 contraction on a thin orbit tube.
"""
import numpy as np

from contracta.floquet import construct_periodic_metric, floquet_multipliers, tube_metric, tube_region
from contracta.flow import monodromy
from contracta.linalg import FractionalDimension
from contracta.metric import certify_second_method
from contracta.systems import LangfordParams, langford_system


def main():
    for a in (0.55, 0.6, 0.65, 0.7):
        lf = langford_system(LangfordParams(a))
        fr = floquet_multipliers(monodromy(lf.system, lf.orbit(0.0), lf.T))
        mods = np.sort(np.abs(fr.multipliers))[::-1]
        print(f"a = {a:.2f}: |rho| = {np.round(mods, 6)}  Andronov-Witt: {fr.andronov_witt}")
    lf = langford_system(LangfordParams(0.6))
    pm = construct_periodic_metric(lf.system, lf.orbit(0.0), lf.T)
    print(f"root constants along the orbit: {np.round(pm.root_constants, 8)}")
    cert = certify_second_method(lf.system, tube_metric(pm), tube_region(pm, 0.005, 8, 4), FractionalDimension(2, 3))
    print(f"tube certificate: Lambda = {cert.bound:+.5f} ({cert.verdict})")


if __name__ == "__main__":
    main()
