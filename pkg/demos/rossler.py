"""Rossler-type system: reference metric check and metric synthesis.

Evaluates the stored metric at the conjectured threshold and slightly above
it, then synthesizes a metric of the same family on a coarse grid.
"""
from contracta.linalg import FractionalDimension
from contracta.metric import certify_second_method, exponential_metric
from contracta.synthesis import SynthesisOptions, minimize_fractional_s
from contracta.systems import rossler_reference_metric, rossler_region, rossler_system


def main():
    ros = rossler_system(0.386, 0.2)
    print(f"dLower = {ros.d_lower:.7f}  gamma = {ros.gamma:.7f}  cubic residual = {ros.cubic_residual:.1e}")
    P, tau, _ = rossler_reference_metric()
    field_ = exponential_metric(P, tau, ros.potential)
    region = rossler_region(0.005)
    for d in (2.60557, 2.6057):
        cert = certify_second_method(ros.system, field_, region, FractionalDimension(d, 3))
        y = cert.grid_meta["argmax"][1]
        print(f"reference metric, d = {d}: Lambda = {cert.bound:+.3e} at y = {y:+.3f} ({cert.verdict})")
    res = minimize_fractional_s(ros.system, 2, rossler_region(0.05), ros.potential, SynthesisOptions(restarts=3))
    print(f"synthesized on the 0.05 grid: sStar = {res.s_star:.5f}, gamma = {res.family.gamma:.4f}")


if __name__ == "__main__":
    main()
