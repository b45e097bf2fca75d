"""Exact binary hypothesis testing trade-off between two Gaussian laws.

The test discriminates n i.i.d. observations of N(sqrt(gamma), sigma^2)
against N(0, theta^2) with theta^2 > sigma^2.  The optimal trade-off is
parametrized by a radial threshold t >= 0:

    alpha(gamma, t) = Q_{n/2}(sqrt(n gamma) sigma / delta, t / sigma)
    beta(gamma, t)  = 1 - Q_{n/2}(sqrt(n gamma) theta / delta, t / theta)

with delta = theta^2 - sigma^2, and the smallest type-I error at type-II
error beta is f(beta, gamma) = alpha(gamma, t*) where beta(gamma, t*) = beta.
The log-likelihood-ratio value on the decision boundary is

    t' = n ln(theta/sigma) + n gamma / (2 delta) - delta t^2 / (2 sigma^2 theta^2).

Everything is evaluated in the log domain so that code rates translating to
beta = 2**(-nR) far below the double-precision floor remain exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidParams, NoConvergence
from .special_fn import (
    LogValue,
    Prob,
    log_bessel_i,
    log_sub_exp,
    marcum_q,
    signed_log_sum,
    _log_gamma_lower,
    _log_gamma_upper,
)

__all__ = [
    "TestParams",
    "TradeoffPoint",
    "FDerivatives",
    "tradeoff_at",
    "solve_t_for_beta",
    "f_exact",
    "f_nonparametric",
    "f_derivatives",
    "decision_sphere",
]

_NEG_INF = float("-inf")


@dataclass(frozen=True, slots=True)
class TestParams:
    """Channel-induced hypothesis test: n letters, means sqrt(gamma) vs 0."""

    n: int
    gamma: float
    sigma2: float
    theta2: float

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or isinstance(self.n, bool):
            raise InvalidParams("n must be a positive integer", n=self.n)
        if self.n < 1:
            raise InvalidParams("n must be a positive integer", n=self.n)
        for name in ("gamma", "sigma2", "theta2"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise InvalidParams(f"{name} must be finite", value=v)
        if self.gamma < 0.0:
            raise InvalidParams("gamma must be nonnegative", gamma=self.gamma)
        if self.sigma2 <= 0.0:
            raise InvalidParams("sigma2 must be positive", sigma2=self.sigma2)
        if self.theta2 <= self.sigma2:
            raise InvalidParams("theta2 must strictly exceed sigma2",
                                theta2=self.theta2, sigma2=self.sigma2)

    @property
    def delta(self) -> float:
        return self.theta2 - self.sigma2

    def _scales(self):
        return (math.sqrt(self.sigma2), math.sqrt(self.theta2), self.delta)


@dataclass(frozen=True, slots=True)
class TradeoffPoint:
    t: float
    t_prime: float
    alpha: Prob
    beta: Prob


@dataclass(frozen=True, slots=True)
class FDerivatives:
    df_dgamma: float
    df_dbeta: float
    d2f_dbeta_dgamma: float
    d2f_dbeta2: float
    d2f_dgamma2: float
    at_origin: bool


def _as_log_beta(beta) -> float:
    """Accept a probability as float, LogValue, or Prob; return ln(beta)."""
    if isinstance(beta, Prob):
        lb = beta.log_value
    elif isinstance(beta, LogValue):
        lb = beta.log_magnitude
    else:
        if isinstance(beta, bool) or not isinstance(beta, (int, float, np.floating)):
            raise InvalidParams("beta must be a probability", beta=beta)
        b = float(beta)
        if math.isnan(b) or not 0.0 <= b <= 1.0:
            raise InvalidParams("beta must lie in [0, 1]", beta=beta)
        lb = _NEG_INF if b == 0.0 else math.log(b)
    if math.isnan(lb) or lb > 0.0:
        raise InvalidParams("beta must lie in [0, 1]", log_beta=lb)
    return lb


def _t_prime(p: TestParams, t: float) -> float:
    sig2, th2 = p.sigma2, p.theta2
    d = p.delta
    return (0.5 * p.n * math.log(th2 / sig2) + 0.5 * p.n * p.gamma / d
            - 0.5 * d * t * t / (sig2 * th2))


def _log_alpha_at(p: TestParams, t: float) -> float:
    """ln alpha(gamma, t): upper tail of the sqrt(gamma)-mean hypothesis."""
    sig = math.sqrt(p.sigma2)
    a = math.sqrt(p.n * p.gamma) * sig / p.delta
    return marcum_q(0.5 * p.n, a, t / sig).log_value


def _log_beta_at(p: TestParams, t: float) -> float:
    """ln beta(gamma, t): lower tail of the null hypothesis."""
    m = 0.5 * p.n
    b = t / math.sqrt(p.theta2)
    if p.gamma == 0.0:
        return _log_gamma_lower(m, 0.5 * b * b)
    a = math.sqrt(p.n * p.gamma) * math.sqrt(p.theta2) / p.delta
    return marcum_q(m, a, b).log_complement


def _log_beta_and_slope(p: TestParams, t: float) -> tuple[float, float]:
    """(ln beta(gamma, t), ln d(beta)/dt); the slope is always positive."""
    m = 0.5 * p.n
    th = math.sqrt(p.theta2)
    b = t / th
    log_beta = _log_beta_at(p, t)
    if p.gamma == 0.0:
        if t == 0.0:
            log_slope = _NEG_INF if p.n > 1 else (
                -math.log(th) - 0.5 * math.log(2.0) - math.lgamma(0.5))
        else:
            log_slope = (-math.log(th) + (p.n - 1.0) * math.log(b) - 0.5 * b * b
                         - (m - 1.0) * math.log(2.0) - math.lgamma(m))
        return log_beta, log_slope
    if t == 0.0:
        return log_beta, _NEG_INF
    a = math.sqrt(p.n * p.gamma) * th / p.delta
    log_slope = (-math.log(th) + m * math.log(b) - (m - 1.0) * math.log(a)
                 - 0.5 * (a * a + b * b)
                 + log_bessel_i(m - 1.0, a * b).log_magnitude)
    return log_beta, log_slope


def tradeoff_at(params: TestParams, t: float) -> TradeoffPoint:
    """Evaluate the parametric trade-off point at radial threshold t."""
    if not isinstance(params, TestParams):
        raise InvalidParams("params must be a TestParams instance")
    if math.isnan(t) or t < 0.0:
        raise InvalidParams("t must be a nonnegative real", t=t)
    sig, th, d = params._scales()
    m = 0.5 * params.n
    root = math.sqrt(params.n * params.gamma)
    alpha = marcum_q(m, root * sig / d, t / sig)
    beta = marcum_q(m, root * th / d, t / th).one_minus()
    return TradeoffPoint(t=t, t_prime=_t_prime(params, t), alpha=alpha, beta=beta)


def solve_t_for_beta(params: TestParams, beta) -> float:
    """Radial threshold t* with beta(gamma, t*) = beta.

    beta(gamma, t) is strictly increasing in t, so the root is bracketed by
    doubling and refined with a safeguarded Newton iteration carried out on
    ln t using the closed-form slope of ln beta.
    """
    lb = _as_log_beta(beta)
    if lb == _NEG_INF or lb == 0.0:
        raise InvalidParams("solve_t_for_beta needs beta strictly inside (0, 1)",
                            log_beta=lb)
    th = math.sqrt(params.theta2)
    d = params.delta
    mean = params.n * (1.0 + params.gamma * params.theta2 / (d * d))
    t = th * math.sqrt(mean)
    lo = 0.0
    hi = math.inf
    for _ in range(200):
        log_beta_t, log_slope = _log_beta_and_slope(params, t)
        err = log_beta_t - lb
        if abs(err) <= 5e-12:
            return t
        if log_beta_t < lb:
            lo = t
        else:
            hi = t
        if hi - lo <= 4e-16 * lo:
            # adjacent doubles straddle the target: beta is not attainable
            # to tolerance at this precision (t*^2 underflows for tiny t)
            raise NoConvergence(
                "target beta unreachable at double precision",
                last_bracket=(lo, hi), target_log_beta=lb,
                achieved_log_beta=log_beta_t, n=params.n, gamma=params.gamma)
        # Newton in u = ln t: du = -err / (t * dlogbeta/dt), clamped so the
        # far-tail regime (dlogbeta/du -> n) cannot run away
        dlog_du = t * math.exp(log_slope - log_beta_t) if log_slope != _NEG_INF else 0.0
        if dlog_du > 0.0:
            du = -err / dlog_du
            du = max(-50.0, min(50.0, du))
            t_new = t * math.exp(du)
        else:
            t_new = math.nan
        if not (lo < t_new < hi):
            if math.isinf(hi):
                t_new = 2.0 * t
            else:
                t_new = 0.5 * (lo + hi)
        t = t_new
    raise NoConvergence("threshold solve exhausted its iteration budget",
                        last_bracket=(lo, hi), target_log_beta=lb,
                        n=params.n, gamma=params.gamma)


def _f_exact_with_t(params: TestParams, beta) -> tuple[Prob, float]:
    lb = _as_log_beta(beta)
    if lb == 0.0:
        return Prob(_NEG_INF, 0.0), math.inf
    if lb == _NEG_INF:
        return Prob(0.0, _NEG_INF), 0.0
    t_star = solve_t_for_beta(params, LogValue(lb))
    sig = math.sqrt(params.sigma2)
    a = math.sqrt(params.n * params.gamma) * sig / params.delta
    return marcum_q(0.5 * params.n, a, t_star / sig), t_star


def f_exact(params: TestParams, beta) -> Prob:
    """Smallest type-I error at type-II error beta: f(beta, gamma)."""
    return _f_exact_with_t(params, beta)[0]


# ---------------------------------------------------------------------------
# non-parametric maximization over the threshold
# ---------------------------------------------------------------------------

def _sl_key(sign: float, logmag: float):
    # total order on signed log-domain reals: positives above zero above
    # negatives, larger magnitude wins on the positive side and loses on the
    # negative side
    if logmag == _NEG_INF or sign == 0.0:
        return (0.0, 0.0)
    return (sign, sign * logmag)


def _np_objective(p: TestParams, lb: float, t: float, drop_beta_term: bool):
    log_alpha = _log_alpha_at(p, t)
    tp = _t_prime(p, t)
    terms = [(1.0, log_alpha)]
    if drop_beta_term:
        terms.append((-1.0, tp + lb))
    else:
        log_beta_t = _log_beta_at(p, t)
        if log_beta_t > lb:
            terms.append((1.0, tp + log_sub_exp(log_beta_t, lb)))
        elif log_beta_t < lb:
            terms.append((-1.0, tp + log_sub_exp(lb, log_beta_t)))
    return signed_log_sum(terms)


def _golden_argmax(fn, lo: float, hi: float, tol: float):
    """Golden-section maximization of fn's key ordering on [lo, hi]."""
    invphi = 0.5 * (math.sqrt(5.0) - 1.0)
    evals = {}

    def at(x):
        if x not in evals:
            evals[x] = fn(x)
        return evals[x]

    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    at(lo), at(hi), at(c), at(d)
    while hi - lo > tol:
        if at(c)[0] > at(d)[0]:
            hi, d = d, c
            c = hi - invphi * (hi - lo)
            at(c)
        else:
            lo, c = c, d
            d = lo + invphi * (hi - lo)
            at(d)
    best_x = max(evals, key=lambda x: evals[x][0])
    return best_x, evals[best_x][1]


class _NpResult(NamedTuple):
    value: Prob
    t_star: float


def _f_nonparametric_with_t(params: TestParams, beta, mode: str) -> _NpResult:
    if mode not in ("exact-max", "verdu-han"):
        raise InvalidParams("mode must be 'exact-max' or 'verdu-han'", mode=mode)
    lb = _as_log_beta(beta)
    if lb == _NEG_INF or lb == 0.0:
        raise InvalidParams("f_nonparametric needs beta strictly inside (0, 1)",
                            log_beta=lb)
    drop = mode == "verdu-han"

    def obj(t):
        sv = _np_objective(params, lb, t, drop)
        return _sl_key(*sv), sv

    d = params.delta
    th = math.sqrt(params.theta2)
    t_scale = th * math.sqrt(params.n * (1.0 + params.gamma * params.theta2 / (d * d)))
    for _ in range(40):
        grid = np.concatenate(([0.0], np.geomspace(1e-4 * t_scale, 6.0 * t_scale, 160)))
        keys = [obj(t) for t in grid]
        i = int(max(range(len(grid)), key=lambda j: keys[j][0]))
        if i < len(grid) - 1:
            break
        if keys[i][1][0] <= 0.0:
            # the whole grid is nonpositive and creeping toward the t -> inf
            # limit of 0: the supremum is vacuous (possible in verdu-han mode)
            return _NpResult(Prob(_NEG_INF, 0.0), grid[i])
        t_scale *= 4.0
    else:
        raise NoConvergence("objective maximum kept escaping the grid",
                            t_scale=t_scale)
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    t_best, (sign, logmag) = _golden_argmax(obj, lo, hi, 1e-8 * t_scale)
    if sign <= 0.0:
        return _NpResult(Prob(_NEG_INF, 0.0), t_best)
    return _NpResult(Prob.from_log(min(logmag, 0.0)), t_best)


def f_nonparametric(params: TestParams, beta, mode: str = "exact-max") -> Prob:
    """Trade-off via direct maximization over the threshold t.

    mode 'exact-max' maximizes alpha(t) + e^{t'} (beta(gamma, t) - beta),
    which equals f(beta, gamma) at the maximizing t.  mode 'verdu-han' drops
    the beta(gamma, t) term, yielding the weaker alpha(t) - e^{t'} beta.
    """
    return _f_nonparametric_with_t(params, beta, mode).value


# ---------------------------------------------------------------------------
# closed-form derivatives of f
# ---------------------------------------------------------------------------

def f_derivatives(params: TestParams, beta) -> FDerivatives:
    """First and second partial derivatives of f(beta, gamma).

    For gamma > 0 the closed forms involve Bessel ratios at
    x = sqrt(n gamma) t / delta; at gamma = 0 those expressions are
    indeterminate and the analytic limits are used instead.
    """
    lb = _as_log_beta(beta)
    if lb == _NEG_INF or lb == 0.0:
        raise InvalidParams("f_derivatives needs beta strictly inside (0, 1)",
                            log_beta=lb)
    n = params.n
    g = params.gamma
    sig2, th2 = params.sigma2, params.theta2
    d = params.delta
    t = solve_t_for_beta(params, LogValue(lb))
    ln_th_sig = 0.5 * math.log(th2 / sig2)
    inv_diff = 1.0 / sig2 - 1.0 / th2  # = delta / (sigma2 theta2)

    if g == 0.0:
        m = 0.5 * n
        df_dg = -math.exp(n * math.log(t / math.sqrt(sig2)) - 0.5 * t * t / sig2
                          - math.lgamma(m) - m * math.log(2.0)) / d
        df_db = -math.exp(n * ln_th_sig - 0.5 * t * t * inv_diff)
        d2f_dbdg = df_db * (0.5 * n / d - 0.5 * t * t / (d * sig2))
        d2f_db2 = math.exp(n * ln_th_sig
                           + (n - 2.0) * math.log(math.sqrt(2.0 * th2) / t)
                           + math.log(d / sig2) + math.lgamma(m)
                           - 0.5 * t * t * (d - sig2) / (th2 * sig2))
        d2f_dg2 = -(0.25 * n / d) * math.exp(
            n * math.log(t / math.sqrt(sig2)) - m * math.log(2.0)
            - 0.5 * t * t / sig2 - math.lgamma(m + 1.0)
        ) * (n / d + (n / (n + 2.0) - th2 / sig2) * t * t / (d * d))
        return FDerivatives(df_dg, df_db, d2f_dbdg, d2f_db2, d2f_dg2, True)

    m = 0.5 * n
    x = math.sqrt(n * g) * t / d
    log_i_m = log_bessel_i(m, x).log_magnitude
    log_i_m1 = log_bessel_i(m - 1.0, x).log_magnitude
    r = math.exp(log_i_m1 - log_i_m)  # Bessel ratio I_{m-1}/I_m > 1

    log_a = (m * math.log(t * d / (sig2 * math.sqrt(n * g)))
             - 0.5 * (n * g * sig2 / (d * d) + t * t / sig2) + log_i_m)
    df_dg = -(0.5 * n / d) * math.exp(log_a)
    df_db = -math.exp(_t_prime(params, t))
    dt_dg = (th2 / (2.0 * d)) * math.sqrt(n / g) / r
    d2f_dbdg = df_db * (0.5 * n / d - t * inv_diff * dt_dg)
    dt_db = (d / math.sqrt(n * g)) * math.exp(
        m * math.log(th2 * math.sqrt(n * g) / (t * d))
        + 0.5 * (n * g * th2 / (d * d) + t * t / th2) - log_i_m1)
    d2f_db2 = (-df_db) * t * inv_diff * dt_db
    d2f_dg2 = (0.5 * df_dg) * (n / d - n / g
                               + math.sqrt(n / g) * (t / d) * (r - (th2 / sig2) / r))
    return FDerivatives(df_dg, df_db, d2f_dbdg, d2f_db2, d2f_dg2, False)


def decision_sphere(upsilon: float, sigma2: float, n: int, t: float):
    """Geometry of the optimal decision region at theta^2 = upsilon + sigma2.

    The acceptance region for a codeword x is a sphere centered at
    center_scale * x; radius2 may be negative, meaning an empty region.
    Returns (center_scale, radius2).
    """
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
        raise InvalidParams("n must be a positive integer", n=n)
    for name, v in (("upsilon", upsilon), ("sigma2", sigma2), ("t", t)):
        if not math.isfinite(v):
            raise InvalidParams(f"{name} must be finite", value=v)
    if upsilon <= 0.0 or sigma2 <= 0.0:
        raise InvalidParams("upsilon and sigma2 must be positive",
                            upsilon=upsilon, sigma2=sigma2)
    center_scale = 1.0 + sigma2 / upsilon
    radius2 = (n * sigma2 * center_scale
               * (1.0 - 2.0 * t / n + math.log1p(upsilon / sigma2)))
    return center_scale, radius2
