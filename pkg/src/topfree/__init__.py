"""Topological free entropy laboratory: norm-microstate volumes, free capacities and covering numbers."""

__version__ = "0.1.0"

from .linalg import HermitianMatrix, MatrixTuple, eigenvalues, hs_metric, normalized_trace, opnorm, uniform_metric
from .ncpoly import NCPolynomial, adjoint_poly, eval_poly, parse_poly, poly_norm_at
from .randmat import SamplerConfig, log_ball_volume, log_c_k, sample_ball, sample_gue
from .microstates import (
    Constraint,
    MicrostateSpec,
    TraceSpec,
    direct_sum,
    is_microstate,
    is_semi_microstate,
    is_trace_microstate,
    project_presence,
    tracestate_metric,
)
from .potential import (
    THETA,
    DiscretizedMeasure,
    RealCompact,
    capacity,
    chi_one_var,
    equilibrium_measure,
    kappa_one_var,
    log_energy,
    reference_density,
)
from .entropy import (
    CoveringEstimate,
    VolumeEstimate,
    ball_covering_bounds_check,
    delta_top_estimate,
    estimate_gamma_measure,
    estimate_volume_ball,
    estimate_volume_gaussian,
    greedy_net,
    semicircular_lower_bound,
    trace_pinning_check,
)
