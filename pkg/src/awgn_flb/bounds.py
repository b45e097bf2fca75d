"""User-facing converse bounds assembled from the core machinery.

This module dispatches the three power-constraint flavours of the
hypothesis-testing lower bound (equal and maximal share one expression, the
average constraint routes through the convex envelope), offers the classical
cone-packing bound with its half-angle solver as an independent comparison,
implements the dimension-raising and codeword-discarding transforms that
convert bounds between constraint types, and drives the two standard sweeps
(error versus blocklength, highest rate versus blocklength).

Power is normalized so the noise variance is 1 and the signal budget is
Upsilon = 10^(SNR_dB / 10); every query carries beta = 1/M = 2^(-n R) in log
form so rates that push beta far below the double-precision floor stay
representable.
"""

from __future__ import annotations

import math
import warnings as _warnings
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy import integrate as _integrate

from .envelope import envelope_endpoints, f_envelope
from .errors import BoundError, InvalidParams, NoBracket, NoConvergence
from .ht_core import (
    TestParams,
    _f_exact_with_t,
    _f_nonparametric_with_t,
    _golden_argmax,
)
from .saddlepoint import (
    capacity_nats,
    f_saddlepoint,
    f_saddlepoint_exponent,
    sphere_packing,
)
from .special_fn import (
    LogValue,
    Prob,
    noncentral_chi2_sf,
    psi_stable,
    reg_inc_beta,
)

__all__ = [
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
]

_NEG_INF = float("-inf")
_LN2 = math.log(2.0)

_CONSTRAINTS = ("equal", "maximal", "average")
_THETA_POLICIES = ("capacity", "exponent-asymptotic", "exponent-finite-n",
                   "fixed")
_METHODS = ("auto", "exact", "saddlepoint-full", "saddlepoint-hat",
            "verdu-han")

# blocklength above which method='auto' abandons the exact Marcum path
_AUTO_EXACT_MAX_N = 1000

# largest blocklength at which the cone quadrature is validated to 1e-9
_CONE_VALIDATED_N = 200


def _is_real(x) -> bool:
    return (not isinstance(x, bool)
            and isinstance(x, (int, float, np.integer, np.floating)))


# ---------------------------------------------------------------------------
# query / result plumbing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundQuery:
    """One bound request: constraint flavour, code size, channel, method.

    Exactly one of M (codebook size, real > 1) or rate_bits (> 0, bits per
    channel use) must be given.  theta2 accompanies theta_policy='fixed' and
    is rejected otherwise; the remaining policies resolve the auxiliary
    variance from the channel: 'capacity' takes Upsilon + 1,
    'exponent-asymptotic' the variance attaining the best error exponent at
    this rate, and 'exponent-finite-n' the variance from the blocklength-n
    tilt search.
    """

    constraint: str
    n: int
    snr_db: float
    M: Optional[float] = None
    rate_bits: Optional[float] = None
    theta_policy: str = "capacity"
    theta2: Optional[float] = None
    method: str = "auto"

    def __post_init__(self):
        if self.constraint not in _CONSTRAINTS:
            raise InvalidParams("unknown constraint", constraint=self.constraint)
        if (isinstance(self.n, bool)
                or not isinstance(self.n, (int, np.integer)) or self.n < 1):
            raise InvalidParams("n must be a positive integer", n=self.n)
        if not _is_real(self.snr_db) or not math.isfinite(float(self.snr_db)):
            raise InvalidParams("snr_db must be a finite real", snr_db=self.snr_db)
        if (self.M is None) == (self.rate_bits is None):
            raise InvalidParams("exactly one of M or rate_bits must be set",
                                M=self.M, rate_bits=self.rate_bits)
        if self.M is not None:
            if not _is_real(self.M) or not math.isfinite(float(self.M)) \
                    or not self.M > 1.0:
                raise InvalidParams("M must be a finite real > 1", M=self.M)
        if self.rate_bits is not None:
            if not _is_real(self.rate_bits) \
                    or not math.isfinite(float(self.rate_bits)) \
                    or not self.rate_bits > 0.0:
                raise InvalidParams("rate_bits must be a finite real > 0",
                                    rate_bits=self.rate_bits)
        if self.theta_policy not in _THETA_POLICIES:
            raise InvalidParams("unknown theta policy",
                                theta_policy=self.theta_policy)
        if self.theta_policy == "fixed":
            if self.theta2 is None or not _is_real(self.theta2) \
                    or not math.isfinite(float(self.theta2)) \
                    or not self.theta2 > 1.0:
                raise InvalidParams("fixed policy needs theta2 > sigma2 = 1",
                                    theta2=self.theta2)
        elif self.theta2 is not None:
            raise InvalidParams("theta2 only accompanies theta_policy='fixed'",
                                theta_policy=self.theta_policy,
                                theta2=self.theta2)
        if self.method not in _METHODS:
            raise InvalidParams("unknown method", method=self.method)

    @property
    def upsilon(self) -> float:
        return 10.0 ** (float(self.snr_db) / 10.0)

    @property
    def log_beta(self) -> float:
        if self.M is not None:
            return -math.log(float(self.M))
        return -float(self.n) * float(self.rate_bits) * _LN2

    @property
    def rate_nats(self) -> float:
        return -self.log_beta / float(self.n)


@dataclass(frozen=True)
class BoundResult:
    """A computed bound value plus provenance diagnostics.

    Either s_star (tilt searches) or t_star (threshold or half-angle
    solvers) is populated depending on the path taken; warnings collect
    fallback and validity notes as plain strings.
    """

    value: Prob
    bound_name: str
    method_used: str
    s_star: Optional[float] = None
    t_star: Optional[float] = None
    theta2_used: Optional[float] = None
    warnings: tuple = ()

    def __post_init__(self):
        if not isinstance(self.value, Prob) or self.value.log_value > 0.0:
            raise InvalidParams("bound value must be a probability",
                                value=self.value)


# ---------------------------------------------------------------------------
# constraint dispatch
# ---------------------------------------------------------------------------

def _dispatch_point(n, gamma, theta2, log_beta, method, finite_n_hint=None):
    """f(beta, gamma) at a fixed auxiliary variance, by the chosen method.

    finite_n_hint carries an already-solved finite-n tilt-search bound so
    the saddlepoint-full path does not redo the maximization the theta
    policy just performed (for that policy the joint search IS the bound).
    Returns (value, s_star or None, t_star or None).
    """
    p = TestParams(n, gamma, 1.0, theta2)
    lv = LogValue(log_beta)
    if method == "exact":
        value, t = _f_exact_with_t(p, lv)
        return value, None, t
    if method == "verdu-han":
        res = _f_nonparametric_with_t(p, lv, "verdu-han")
        return res.value, None, res.t_star
    if method == "saddlepoint-full" and finite_n_hint is not None:
        return finite_n_hint.value, finite_n_hint.s_star, None
    sb = f_saddlepoint(p, lv, "full" if method == "saddlepoint-full" else "hat")
    return sb.value, sb.s_star, None


def _compute_bound(q: BoundQuery) -> BoundResult:
    warns = []
    method = q.method
    if method == "auto":
        if q.n <= _AUTO_EXACT_MAX_N:
            method = "exact"
        else:
            method = "saddlepoint-full"
            warns.append("auto: exact path limited to n <= %d, switched to "
                         "saddlepoint-full" % _AUTO_EXACT_MAX_N)
    ups = q.upsilon
    lb = q.log_beta

    eb = None
    if q.theta_policy == "capacity":
        theta2, s_pol = ups + 1.0, None
    elif q.theta_policy == "fixed":
        theta2, s_pol = float(q.theta2), None
    elif q.theta_policy == "exponent-asymptotic":
        rep = sphere_packing(q.rate_nats, ups, 1.0)
        theta2, s_pol = rep.theta_tilde2, rep.s_star
    else:
        eb = f_saddlepoint_exponent(q.n, ups, 1.0, LogValue(lb))
        theta2, s_pol = eb.theta_tilde2, eb.s_star

    name = "ht-" + q.constraint
    if q.constraint in ("equal", "maximal"):
        value, s, t = _dispatch_point(q.n, ups, theta2, lb, method, eb)
        return BoundResult(value, name, method,
                           s_star=s if s is not None else s_pol, t_star=t,
                           theta2_used=theta2, warnings=tuple(warns))

    ep = envelope_endpoints(ups, q.n, 1.0, theta2)
    if lb >= ep.beta0.log_value:
        # small-codebook regime: the envelope touches the fixed-power
        # trade-off at full budget, so averaging costs nothing
        value, s, t = _dispatch_point(q.n, ups, theta2, lb, method, eb)
        return BoundResult(value, name, method,
                           s_star=s if s is not None else s_pol, t_star=t,
                           theta2_used=theta2, warnings=tuple(warns))
    if method != "exact":
        warns.append("average-power envelope is evaluated exactly; method "
                     "'%s' applies only at or below the codebook-size "
                     "threshold" % method)
    sol = f_envelope(q.n, ups, 1.0, theta2, LogValue(lb))
    return BoundResult(sol.value, name, "envelope-exact", s_star=s_pol,
                       t_star=sol.t0, theta2_used=theta2,
                       warnings=tuple(warns))


def compute_bound(q: BoundQuery) -> BoundResult:
    """Evaluate the bound described by the query.

    equal and maximal dispatch to the fixed-power trade-off f(1/M, Upsilon);
    they share the expression and the label records which constraint was
    asked.  average compares the codebook size against the threshold where
    the envelope leaves the fixed-power curve: at or below it the value
    coincides with the maximal-constraint one, above it the chord
    construction takes over.  Numeric failures propagate with the query
    attached to the exception details.
    """
    try:
        return _compute_bound(q)
    except BoundError as exc:
        exc.details["query"] = q
        raise


# ---------------------------------------------------------------------------
# constraint transforms
# ---------------------------------------------------------------------------

_TRANSFORM_KINDS = ("equal_to_maximal_eq16", "equal_to_maximal_lemma1",
                    "maximal_to_average")


def _as_value(res) -> Prob:
    if isinstance(res, BoundResult):
        return res.value
    if isinstance(res, Prob):
        return res
    if isinstance(res, LogValue):
        return Prob.from_log(min(res.log_magnitude, 0.0))
    x = float(res)
    if math.isnan(x) or not 0.0 <= x <= 1.0:
        raise InvalidParams("base evaluator must return a probability",
                            value=res)
    return Prob.from_linear(x)


def _wrap_transform(kind: str, res, s_star) -> BoundResult:
    value = _as_value(res)
    label = kind.replace("_", "-")
    if isinstance(res, BoundResult):
        return BoundResult(value, "%s(%s)" % (label, res.bound_name),
                           res.method_used,
                           s_star=res.s_star if s_star is None else s_star,
                           t_star=res.t_star, theta2_used=res.theta2_used,
                           warnings=res.warnings)
    return BoundResult(value, label, "transform", s_star=s_star)


def lemma1_transform(kind: str, base: Callable, n: int, M: float,
                     upsilon: float, s: Optional[float] = None) -> BoundResult:
    """Turn a bound for one power constraint into one for a weaker one.

    base(n, M, upsilon) evaluates the bound being transformed and may
    return a BoundResult, a Prob, or a plain float.  The two
    equal-to-maximal kinds embed the length-n code into n + 1 dimensions,
    which turns the energy inequality into an equality; the eq16 variant
    shrinks the per-letter budget to n/(n+1) of nominal while the plain
    variant keeps it.  maximal_to_average keeps an s fraction of the
    codebook and inflates the power budget by 1/(1-s), then takes the best
    s in (0, 1): a coarse scan (dense toward both endpoints, where the
    value vanishes) followed by golden-section refinement, unless a fixed
    s is supplied.
    """
    if kind not in _TRANSFORM_KINDS:
        raise InvalidParams("unknown transform kind", kind=kind)
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidParams("n must be a positive integer", n=n)
    if not _is_real(M) or not math.isfinite(float(M)) or not M > 1.0:
        raise InvalidParams("M must be a finite real > 1", M=M)
    if not _is_real(upsilon) or not upsilon > 0.0:
        raise InvalidParams("upsilon must be > 0", upsilon=upsilon)
    n = int(n)
    M = float(M)
    upsilon = float(upsilon)

    if kind == "equal_to_maximal_eq16":
        return _wrap_transform(kind, base(n + 1, M, n * upsilon / (n + 1.0)),
                               None)
    if kind == "equal_to_maximal_lemma1":
        return _wrap_transform(kind, base(n + 1, M, upsilon), None)

    if s is not None:
        if not _is_real(s) or not 0.0 < s < 1.0:
            raise InvalidParams("s must lie strictly inside (0, 1)", s=s)
        if s * M <= 1.0:
            raise InvalidParams("discarding that many codewords leaves fewer "
                                "than one", s=s, M=M)
        v = _as_value(base(n, s * M, upsilon / (1.0 - s)))
        lv = math.log(s) + v.log_value
        return BoundResult(Prob.from_log(min(lv, 0.0)), "maximal-to-average",
                           "fixed-s", s_star=float(s))

    skipped = 0

    def h(s_):
        nonlocal skipped
        if not 1.0 / M < s_ < 1.0:
            return _NEG_INF
        try:
            v = _as_value(base(n, s_ * M, upsilon / (1.0 - s_)))
        except BoundError:
            skipped += 1
            return _NEG_INF
        return math.log(s_) + v.log_value

    lo = 1.0 / M
    s_lo = lo + 1e-9 * (1.0 - lo)
    s_hi = 1.0 - 1e-9
    decades = np.asarray([10.0 ** -k for k in range(1, 9)])
    grid = np.unique(np.concatenate([
        np.linspace(s_lo, s_hi, 33),
        s_lo + (s_hi - s_lo) * decades,
        s_hi - (s_hi - s_lo) * decades,
    ]))
    vals = [h(float(x)) for x in grid]
    i = int(np.argmax(vals))
    if vals[i] == _NEG_INF:
        raise NoBracket("every probe of the s scan failed or vanished",
                        n=n, M=M, upsilon=upsilon)

    def fn(x):
        val = h(x)
        return val, val

    a = float(grid[max(i - 1, 0)])
    b = float(grid[min(i + 1, len(grid) - 1)])
    s_best, lv = _golden_argmax(fn, a, b, 1e-10)
    warns = ()
    if skipped:
        warns = ("%d probes of the s scan failed and were skipped" % skipped,)
    return BoundResult(Prob.from_log(min(lv, 0.0)), "maximal-to-average",
                       "golden-section", s_star=float(s_best), warnings=warns)


# ---------------------------------------------------------------------------
# cone packing
# ---------------------------------------------------------------------------

def half_angle(n: int, M: float) -> float:
    """Half-angle of the spherical cap covering a 1/M fraction of the
    sphere surface in n dimensions.

    The cap fraction is 0.5 * I_{sin^2 t}((n-1)/2, 1/2) for t in [0, pi/2]
    (regularized incomplete beta); fractions above one half are solved
    through the complementary cap.  Bisection to 1e-12 radians.  The circle
    case n = 2 is the exact arc fraction pi / M.
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 2:
        raise InvalidParams("n must be an integer >= 2", n=n)
    if not _is_real(M) or not math.isfinite(float(M)) or not M > 1.0:
        raise InvalidParams("M must be a finite real > 1", M=M)
    n = int(n)
    M = float(M)
    if n == 2:
        return math.pi / M
    target = 1.0 / M
    frac = min(target, 1.0 - target)
    p = 0.5 * (n - 1)

    def cap(t):
        st = math.sin(t)
        return 0.5 * reg_inc_beta(st * st, p, 0.5)

    lo, hi = 0.0, 0.5 * math.pi
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if cap(mid) < frac:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    return math.pi - t if target > 0.5 else t


def phi_n(n: int, theta: float, noise_var_ratio: float) -> Prob:
    """Escape probability of a sphere point from the cone of half-angle
    theta drawn around it, under i.i.d. Gaussian noise.

    The reference point sits at radius sqrt(n) on the cone axis and the
    noise has variance noise_var_ratio per dimension.  Conditioned on the
    axial noise component u, the point leaves the cone exactly when the
    transverse radius exceeds (sqrt(n) + u) tan(theta); for u <= -sqrt(n)
    it lands behind the apex and always escapes.  That reduces the n-fold
    integral to one adaptive quadrature over u with the transverse tail a
    chi-square survival with n - 1 degrees of freedom, run to an absolute
    error of 1e-9.
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 2:
        raise InvalidParams("n must be an integer >= 2", n=n)
    if not _is_real(theta) or not 0.0 < float(theta) <= 0.5 * math.pi:
        raise InvalidParams("theta must lie in (0, pi/2]", theta=theta)
    if not _is_real(noise_var_ratio) \
            or not math.isfinite(float(noise_var_ratio)) \
            or not noise_var_ratio > 0.0:
        raise InvalidParams("noise_var_ratio must be > 0",
                            noise_var_ratio=noise_var_ratio)
    n = int(n)
    theta = float(theta)
    s2 = float(noise_var_ratio)
    sbar = math.sqrt(s2)
    rn = math.sqrt(n)
    apex = rn / sbar
    log_behind = math.log(psi_stable(apex)) - 0.5 * apex * apex
    if theta == 0.5 * math.pi:
        # the cone opens into a half-space: only apex-crossing noise escapes
        return Prob.from_log(min(log_behind, 0.0))

    tan2 = math.tan(theta) ** 2
    inv_norm = 1.0 / math.sqrt(2.0 * math.pi)

    def integrand(z):
        axial = rn + sbar * z
        q = noncentral_chi2_sf(n - 1, 0.0, axial * axial * tan2 / s2)
        return inv_norm * math.exp(-0.5 * z * z) * q.value

    z_lo = max(-apex, -40.0)
    z_hi = 40.0
    # the chi-square tail switches from ~1 to ~0 around its bulk; hand the
    # subdivision that breakpoint
    z_mid = math.sqrt(n - 1.0) / math.tan(theta) - apex
    pts = [z_mid] if z_lo < z_mid < z_hi else None
    with _warnings.catch_warnings():
        _warnings.simplefilter("ignore", _integrate.IntegrationWarning)
        val, err = _integrate.quad(integrand, z_lo, z_hi, points=pts,
                                   epsabs=1e-12, epsrel=1e-12, limit=400)
    if not math.isfinite(val) or err > 1e-9:
        raise NoConvergence("cone escape quadrature missed the 1e-9 target",
                            achieved_abs_error=err, n=n, theta=theta,
                            noise_var_ratio=s2)
    total = math.exp(log_behind) + val
    return Prob.from_linear(min(max(total, 0.0), 1.0))


def _cone_warns(dim: int) -> tuple:
    if dim <= _CONE_VALIDATED_N:
        return ()
    return ("cone quadrature is validated up to n = %d; accuracy beyond "
            "that is unverified" % _CONE_VALIDATED_N,)


def cone_packing(n: int, M: float, upsilon: float,
                 sigma2: float = 1.0) -> BoundResult:
    """Cone bound for codewords on the energy sphere (equal power).

    Composes the equal-cap half-angle with the escape probability at noise
    ratio sigma2 / upsilon.  The t_star diagnostic carries the half-angle
    in radians.
    """
    if not _is_real(upsilon) or not upsilon > 0.0:
        raise InvalidParams("upsilon must be > 0", upsilon=upsilon)
    if not _is_real(sigma2) or not sigma2 > 0.0:
        raise InvalidParams("sigma2 must be > 0", sigma2=sigma2)
    ang = half_angle(n, M)
    value = phi_n(int(n), ang, float(sigma2) / float(upsilon))
    return BoundResult(value, "cone-packing", "cap-quadrature", t_star=ang,
                       warnings=_cone_warns(int(n)))


def cor1_maximal(n: int, M: float, upsilon: float,
                 sigma2: float = 1.0) -> BoundResult:
    """Cone bound carried to a maximal power constraint.

    The length-n code is embedded one dimension up, trading the energy
    inequality for an equality at a slightly smaller effective budget:
    the escape probability in n + 1 dimensions at noise ratio
    (n+1) sigma2 / (n upsilon).
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidParams("n must be a positive integer", n=n)
    if not _is_real(upsilon) or not upsilon > 0.0:
        raise InvalidParams("upsilon must be > 0", upsilon=upsilon)
    if not _is_real(sigma2) or not sigma2 > 0.0:
        raise InvalidParams("sigma2 must be > 0", sigma2=sigma2)
    n = int(n)
    ang = half_angle(n + 1, M)
    ratio = (n + 1.0) * float(sigma2) / (n * float(upsilon))
    value = phi_n(n + 1, ang, ratio)
    return BoundResult(value, "cone-packing-maximal", "cap-quadrature",
                       t_star=ang, warnings=_cone_warns(n + 1))


# ---------------------------------------------------------------------------
# sweep drivers
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class SweepRow:
    n: int
    rate_bits: float
    value: Optional[Prob]
    method: str
    note: str = ""


def _rate_bits_at(template: BoundQuery, n: int) -> float:
    if template.rate_bits is not None:
        return float(template.rate_bits)
    return math.log2(float(template.M)) / n


def _solve_rate(template: BoundQuery, n: int, eps: float, hi_bits: float):
    """Rate whose bound value hits eps at blocklength n, to 1e-4 relative
    on ln(eps).

    Assumes the value moves monotonically with the rate; when the bracket
    endpoints contradict that, or bisection stalls, falls back to a dense
    scan for the highest crossing.
    """
    lt = math.log(eps)
    tol = 1e-4 * abs(lt)
    cache: dict = {}

    def at(r):
        if r not in cache:
            cache[r] = compute_bound(replace(template, n=n, rate_bits=r,
                                             M=None))
        return cache[r]

    lo = 1e-9
    v_lo = at(lo).value.log_value
    v_hi = at(hi_bits).value.log_value
    if not min(v_lo, v_hi) <= lt <= max(v_lo, v_hi):
        raise NoBracket("target error is not bracketed by rates in (0, 2C]",
                        n=n, target_log_eps=lt, log_eps_lo=v_lo,
                        log_eps_hi=v_hi)
    rising = v_hi >= v_lo
    a, b = lo, hi_bits
    for _ in range(120):
        mid = 0.5 * (a + b)
        vm = at(mid).value.log_value
        if abs(vm - lt) <= tol:
            return mid, at(mid)
        if (vm < lt) == rising:
            a = mid
        else:
            b = mid
        if b - a <= 1e-13 * max(1.0, hi_bits):
            break

    # non-monotone or stalled: scan from the top for the last crossing
    rates = np.linspace(lo, hi_bits, 257)
    logs = [at(float(r)).value.log_value for r in rates]
    for j in range(len(rates) - 2, -1, -1):
        da, db = logs[j] - lt, logs[j + 1] - lt
        if da == 0.0:
            return float(rates[j]), at(float(rates[j]))
        if da * db <= 0.0:
            a, b = float(rates[j]), float(rates[j + 1])
            seg_rising = logs[j + 1] >= logs[j]
            for _ in range(120):
                mid = 0.5 * (a + b)
                vm = at(mid).value.log_value
                if abs(vm - lt) <= tol:
                    return mid, at(mid)
                if (vm < lt) == seg_rising:
                    a = mid
                else:
                    b = mid
            break
    raise NoConvergence("rate bisection could not reach the ln(eps) "
                        "tolerance", n=n, target_log_eps=lt, tol=tol)


def sweep(mode: str, grid, template: BoundQuery,
          target_eps: Optional[float] = None) -> list:
    """Evaluate a query template across blocklengths.

    mode 'error_vs_n' computes the template bound at every n in the grid;
    'maxrate_vs_n' inverts it, solving for the rate at which the bound
    value equals target_eps (to 1e-4 relative on ln eps, rate bracketed in
    (0, 2C]).  Per-point failures are recorded in the row note instead of
    aborting the sweep.  In error mode with a fixed rate, a value that
    rises against the previous blocklength is flagged the same way: below
    capacity the rows are expected to be nonincreasing in n.
    """
    if mode not in ("error_vs_n", "maxrate_vs_n"):
        raise InvalidParams("mode must be 'error_vs_n' or 'maxrate_vs_n'",
                            mode=mode)
    if not isinstance(template, BoundQuery):
        raise InvalidParams("template must be a BoundQuery",
                            template=type(template).__name__)
    ns = []
    for v in grid:
        if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
            raise InvalidParams("grid entries must be integers", entry=v)
        ns.append(int(v))
    if not ns:
        raise InvalidParams("grid is empty")

    rows: list[SweepRow] = []
    if mode == "error_vs_n":
        for n in ns:
            try:
                res = compute_bound(replace(template, n=n))
            except BoundError as exc:
                rows.append(SweepRow(n, _rate_bits_at(template, n), None, "",
                                     "failed: %s" % exc))
                continue
            rows.append(SweepRow(n, _rate_bits_at(template, n), res.value,
                                 res.method_used))
        if template.rate_bits is not None:
            prev = None
            for i, row in enumerate(rows):
                if row.value is None:
                    continue
                if prev is not None and row.value.log_value > prev + 1e-12:
                    rows[i] = replace(
                        row, note="value rose versus the previous blocklength")
                prev = row.value.log_value
        return rows

    if target_eps is None or not _is_real(target_eps) \
            or not 0.0 < float(target_eps) < 1.0:
        raise InvalidParams("maxrate_vs_n needs target_eps strictly inside "
                            "(0, 1)", target_eps=target_eps)
    hi_bits = 2.0 * capacity_nats(template.upsilon, 1.0) / _LN2
    for n in ns:
        try:
            r_bits, res = _solve_rate(template, n, float(target_eps), hi_bits)
        except BoundError as exc:
            rows.append(SweepRow(n, float("nan"), None, "",
                                 "failed: %s" % exc))
            continue
        rows.append(SweepRow(n, r_bits, res.value, res.method_used))
    return rows
