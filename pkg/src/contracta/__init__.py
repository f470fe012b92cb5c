"""Numerical certificates of d-contraction for autonomous ODE systems.

Two complementary tests decide whether a flow shrinks d-dimensional
volumes (fractional ``d`` allowed): finite-time Lyapunov exponents of the
variational flow, and generalized eigenvalues of the linearization in a
state-dependent Riemannian metric.  Floquet analysis and an explicit
periodic metric cover orbital stability of periodic solutions, and a
multi-start search synthesizes metrics that certify small dimensions.
"""
from .certificate import (CONTRACTIVE, INCONCLUSIVE, INVALID_METRIC, NOT_CONTRACTIVE,
                          ContractionCertificate)
from .errors import ContractaError, DivergenceError, InputError, NoConvergenceError, NumericalError
from .exponents import (ExponentReport, estimate_bold_sigma_d, finite_time_exponents,
                        first_method_verdict, sigma_d)
from .floquet import (FloquetReport, PeriodicMetric, construct_periodic_metric, floquet_multipliers,
                      orbital_stability_report, precondition_similarity)
from .flow import (CERTIFY, SWEEP, DynamicalSystem, IntegratorOptions, VariationalState,
                   find_periodic_orbit, integrate, monodromy, variational_flow)
from .linalg import (Ellipsoid, FractionalDimension, additive_compound, ellipsoid_profile,
                     log_norm2, multiplicative_compound, omega_d, singular_values, spd_sqrt)
from .metric import (CriterionRoots, MetricField, certify_second_method, criterion_roots,
                     orbital_derivative, weighted_flow_expansion, xi_d)
from .region import Region
from .synthesis import MetricFamily, SynthesisOptions, SynthesisResult, feasibility, minimize_fractional_s
from .systems import (LangfordParams, RigidBodyParams, RosslerParams, langford_system,
                      rigid_body_system, rossler_reference_metric, rossler_system)

__version__ = "0.1.0"
