"""Rigid body with damping and torque: the d = 2 contraction threshold in tau.

Below the threshold a metric ``P0 exp(gamma W)`` is synthesized and certified
on the trapping ellipsoid; above it the equilibrium finite-time exponents
show area growth at rate ``2 delta (u - 1)``.
"""
from contracta.linalg import FractionalDimension
from contracta.metric import certify_second_method, exponential_metric
from contracta.region import Region
from contracta.exponents import estimate_bold_sigma_d
from contracta.synthesis import SynthesisOptions, search_fixed_dimension
from contracta.systems import RigidBodyParams, rigid_body_system

D2 = FractionalDimension(2, 3)


def main():
    tau_c = rigid_body_system(RigidBodyParams(tau=0.0)).tau_bound
    print(f"threshold tau = {tau_c:.9f}")
    for factor in (0.5, 0.9, 0.99, 1.01, 1.2):
        rb = rigid_body_system(RigidBodyParams(tau=factor * tau_c))
        found = search_fixed_dimension(rb.system, D2, rb.trapping_region((9, 9, 9)), rb.energy,
                                       SynthesisOptions(restarts=3, init=((rb.P0, 0.1),)))
        line = f"tau = {factor:4.2f} tau_c: "
        if found.feasible:
            fam = found.family
            cert = certify_second_method(rb.system, exponential_metric(fam.P0, fam.gamma, rb.energy),
                                         rb.trapping_region(), D2)
            line += f"certificate gamma = {fam.gamma:.4f}, Lambda = {cert.bound:+.4f} ({cert.verdict})"
        else:
            rep = estimate_bold_sigma_d(rb.system, Region.from_points([rb.equilibrium]), D2, [200.0])
            line += (f"no metric found; Sigma_2(200) at the equilibrium = {rep.bold_sigma:+.5f}, "
                     f"predicted {2 * rb.params.delta * (rb.u - 1):+.5f}")
        print(line)


if __name__ == "__main__":
    main()
