"""Finite-blocklength lower bounds for coded transmission over AWGN channels.

The package evaluates hypothesis-testing converse bounds on the error
probability of length-n block codes under equal, maximal, and average power
constraints, together with saddlepoint approximations, the convex-envelope
construction that handles average power, classical cone-packing bounds, and
Monte Carlo validation of actual constellations.
"""

__version__ = "0.1.0"

from .bounds import (
    BoundQuery,
    BoundResult,
    SweepRow,
    compute_bound,
    cone_packing,
    cor1_maximal,
    half_angle,
    lemma1_transform,
    phi_n,
    sweep,
)
from .envelope import (
    EnvelopeEndpoints,
    EnvelopeSolution,
    InputMixture,
    envelope_endpoints,
    f_envelope,
    m_bar,
    m_bar_rate,
    optimal_input,
)
from .errors import (
    BoundError,
    ConstraintViolation,
    InvalidParams,
    NoBracket,
    NoConvergence,
    NoRoot,
)
from .ht_core import (
    FDerivatives,
    TestParams,
    TradeoffPoint,
    decision_sphere,
    f_derivatives,
    f_exact,
    f_nonparametric,
    solve_t_for_beta,
    tradeoff_at,
)
from .saddlepoint import (
    ExponentBound,
    ExponentReport,
    SaddlepointBound,
    capacity_nats,
    f_saddlepoint,
    f_saddlepoint_exponent,
    sphere_packing,
    theta_tilde,
)
from .sim import (
    Constellation,
    McEstimate,
    apsk_search,
    make_apsk,
    make_psk,
    ml_error_mc,
)
from .special_fn import (
    LogValue,
    Prob,
    log_bessel_i,
    marcum_q,
    marcum_q_grad,
    noncentral_chi2_sf,
    psi_stable,
    reg_inc_beta,
)

__all__ = [
    "BoundError",
    "ConstraintViolation",
    "InvalidParams",
    "NoBracket",
    "NoConvergence",
    "NoRoot",
    "LogValue",
    "Prob",
    "log_bessel_i",
    "marcum_q",
    "marcum_q_grad",
    "noncentral_chi2_sf",
    "psi_stable",
    "reg_inc_beta",
    "TestParams",
    "TradeoffPoint",
    "FDerivatives",
    "tradeoff_at",
    "solve_t_for_beta",
    "f_exact",
    "f_nonparametric",
    "f_derivatives",
    "decision_sphere",
    "SaddlepointBound",
    "ExponentBound",
    "ExponentReport",
    "f_saddlepoint",
    "theta_tilde",
    "f_saddlepoint_exponent",
    "capacity_nats",
    "sphere_packing",
    "EnvelopeEndpoints",
    "EnvelopeSolution",
    "InputMixture",
    "envelope_endpoints",
    "f_envelope",
    "m_bar",
    "m_bar_rate",
    "optimal_input",
    "BoundQuery",
    "BoundResult",
    "SweepRow",
    "compute_bound",
    "lemma1_transform",
    "half_angle",
    "phi_n",
    "cone_packing",
    "cor1_maximal",
    "sweep",
    "Constellation",
    "McEstimate",
    "make_psk",
    "make_apsk",
    "ml_error_mc",
    "apsk_search",
    "__version__",
]
