"""Cumulant-based expansions of the Gaussian hypothesis-testing trade-off.

The exact trade-off between the two Gaussian product measures is driven by
Marcum-Q evaluations whose arguments grow with n.  This module provides the
complementary machinery that stays accurate when beta decays exponentially:
the cumulant generating function kappa(s) of the log-likelihood ratio and its
derivatives, a uniform saddlepoint expansion of f(beta, gamma) maximized over
the tilting parameter s, a simplified variant that drops the third-cumulant
correction, the exponent-achieving auxiliary variance theta_tilde(s)^2, the
Augustin capacity of the power-constrained channel, and the sphere-packing
exponent with its critical rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from .errors import InvalidParams, NoConvergence
from .ht_core import TestParams, _as_log_beta, _golden_argmax, _sl_key
from .special_fn import Prob, psi_stable, signed_log_sum

__all__ = [
    "SaddlepointState",
    "SaddlepointBound",
    "ExponentBound",
    "ExponentReport",
    "kappa_set",
    "expansion_state",
    "f_saddlepoint",
    "theta_tilde",
    "f_saddlepoint_exponent",
    "capacity_nats",
    "augustin_capacity",
    "sphere_packing",
]

_NEG_INF = float("-inf")
_SQRT_2PI = math.sqrt(2.0 * math.pi)

# sentinel ordering key that ranks below every value _sl_key can produce
_KEY_INVALID = (_NEG_INF, 0.0)


@dataclass(frozen=True, slots=True)
class SaddlepointState:
    """kappa(s) and its first three derivatives at a tilting point s.

    ``kappa_set`` fills the cumulant fields and eta(s); the blocklength-aware
    quantities (lambda_a, lambda_b and the assembled prefactors a_corr,
    b_corr) stay None until ``expansion_state`` attaches them.
    """

    s: float
    kappa: float
    dkappa: float
    d2kappa: float
    d3kappa: float
    eta: float
    lambda_a: Optional[float] = None
    lambda_b: Optional[float] = None
    a_corr: Optional[float] = None
    b_corr: Optional[float] = None


class SaddlepointBound(NamedTuple):
    value: Prob
    s_star: float


class ExponentBound(NamedTuple):
    value: Prob
    s_star: float
    theta_tilde2: float


@dataclass(frozen=True, slots=True)
class ExponentReport:
    """Sphere-packing exponent at one rate, plus channel-level anchors."""

    rate_nats: float
    s_star: float
    esp: float
    theta_tilde2: float
    augustin: float
    critical_rate_nats: float


def _validate_channel(gamma: float, sigma2: float, theta2: float) -> None:
    for name, v in (("gamma", gamma), ("sigma2", sigma2), ("theta2", theta2)):
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            raise InvalidParams(f"{name} must be a finite real", **{name: v})
    if gamma < 0.0:
        raise InvalidParams("gamma must be >= 0", gamma=gamma)
    if sigma2 <= 0.0:
        raise InvalidParams("sigma2 must be > 0", sigma2=sigma2)
    if theta2 <= sigma2:
        raise InvalidParams("theta2 must exceed sigma2 strictly",
                            sigma2=sigma2, theta2=theta2)


def kappa_set(s: float, gamma: float, sigma2: float, theta2: float) -> SaddlepointState:
    """Cumulant generating function of the log-likelihood ratio and its
    first three derivatives, evaluated at the tilting parameter s.

    The generating function of log(phi_{sqrt(gamma),sigma}/phi_{0,theta})
    under the theta measure is

        kappa(s) = gamma s(s-1)/(2 eta) + log(theta^s sigma^(1-s) / sqrt(eta))

    with eta(s) = s theta^2 + (1-s) sigma^2, which must stay positive.
    kappa(0) = kappa(1) = 0 hold exactly by construction.
    """
    _validate_channel(gamma, sigma2, theta2)
    if not math.isfinite(s):
        raise InvalidParams("s must be finite", s=s)
    delta = theta2 - sigma2
    eta = s * theta2 + (1.0 - s) * sigma2
    if eta <= 0.0:
        raise InvalidParams("eta(s) must be positive; s is below -sigma2/delta",
                            s=s, eta=eta, s_min=-sigma2 / delta)
    log_ratio = 0.5 * math.log(theta2 / sigma2)
    kappa = (gamma * s * (s - 1.0) / (2.0 * eta)
             + 0.5 * s * math.log(theta2)
             + 0.5 * (1.0 - s) * math.log(sigma2)
             - 0.5 * math.log(eta))
    dkappa = (gamma * (s * s * theta2 - (1.0 - s) ** 2 * sigma2) / (2.0 * eta * eta)
              - delta / (2.0 * eta) + log_ratio)
    d2kappa = gamma * theta2 * sigma2 / eta ** 3 + delta * delta / (2.0 * eta * eta)
    # third derivative of kappa; the delta^3 term is d/ds of delta^2/(2 eta^2)
    # and therefore carries coefficient 1/eta^3, as finite differences confirm
    d3kappa = -(3.0 * gamma * theta2 * sigma2 * delta / eta ** 4
                + delta ** 3 / eta ** 3)
    return SaddlepointState(s=s, kappa=kappa, dkappa=dkappa,
                            d2kappa=d2kappa, d3kappa=d3kappa, eta=eta)


def _cubic_term(n: int, u: float, w: float, d3: float) -> float:
    # third-cumulant correction n u^3/6 ((lam^-1 - lam^-3)/sqrt(2 pi) - Psi(lam)) d3
    # at lam = u w, written so the u -> 0 limit stays finite: the polynomial
    # part collapses to (n u^2/(6w) - n/(6 w^3))/sqrt(2 pi).
    poly = (n * u * u / (6.0 * w) - n / (6.0 * w ** 3)) / _SQRT_2PI
    return (poly - (n * u ** 3 / 6.0) * psi_stable(u * w)) * d3


def _prefactors(st: SaddlepointState, n: int, variant: str):
    """Assembled prefactors (a, b) of the expansion at blocklength n.

    The sign conventions follow sgn(0) = +1: the a term keeps the left limit
    at s = 1 and the b term keeps the right limit at s = 0, which pairs with
    the strict indicators 1[s > 1] and 1[s < 0] to make the objective
    continuous across both seams.
    """
    w = math.sqrt(n * st.d2kappa)
    ua = abs(1.0 - st.s)
    ub = abs(st.s)
    lam_a = ua * w
    lam_b = ub * w
    sign_a = -1.0 if st.s > 1.0 else 1.0
    sign_b = -1.0 if st.s < 0.0 else 1.0
    a_val = sign_a * psi_stable(lam_a)
    b_val = sign_b * psi_stable(lam_b)
    if variant == "full":
        # sgn(1-s) (s-1)^3 = -|1-s|^3 and sgn(s) s^3 = |s|^3, so the
        # correction enters the a term negated and the b term as-is.
        a_val -= _cubic_term(n, ua, w, st.d3kappa)
        b_val += _cubic_term(n, ub, w, st.d3kappa)
    return a_val, b_val, lam_a, lam_b


def expansion_state(st: SaddlepointState, n: int,
                    variant: str = "full") -> SaddlepointState:
    """Attach lambda_a/lambda_b and the assembled a/b prefactors for
    blocklength n to a state produced by kappa_set."""
    if variant not in ("full", "hat"):
        raise InvalidParams("variant must be 'full' or 'hat'", variant=variant)
    a_val, b_val, lam_a, lam_b = _prefactors(st, n, variant)
    return replace(st, lambda_a=lam_a, lambda_b=lam_b, a_corr=a_val, b_corr=b_val)


def _exponent_combo(n: int, s: float, gamma: float, sigma2: float,
                    theta2: float, eta: float) -> float:
    # n (kappa + (1-s) kappa') collapses algebraically to
    # n (log(theta/sigma... ) ...) = n (0.5 log(theta2/eta)
    #   - gamma (1-s)^2 sigma2 / (2 eta^2) - (1-s) delta / (2 eta)),
    # which avoids the large-s cancellation between kappa and (1-s) kappa'.
    one_minus_s = 1.0 - s
    delta = theta2 - sigma2
    return n * (0.5 * math.log(theta2 / eta)
                - gamma * one_minus_s * one_minus_s * sigma2 / (2.0 * eta * eta)
                - one_minus_s * delta / (2.0 * eta))


def _sp_objective(n: int, gamma: float, sigma2: float, theta2: float,
                  s: float, log_beta: float, variant: str):
    """Signed log-domain value of the expansion objective at one s."""
    st = kappa_set(s, gamma, sigma2, theta2)
    a_val, b_val, _, _ = _prefactors(st, n, variant)
    x1 = _exponent_combo(n, s, gamma, sigma2, theta2, st.eta)
    x3 = n * st.dkappa
    terms = []
    ab = a_val + b_val
    if ab != 0.0:
        terms.append((math.copysign(1.0, ab), math.log(abs(ab)) + x1))
    if s > 1.0:
        terms.append((1.0, 0.0))
    if s < 0.0:
        terms.append((1.0, x3))
    terms.append((-1.0, log_beta + x3))
    return signed_log_sum(terms)


_S_HI_CAP = 1e7


def _maximize_over_s(obj, s_floor: float, lo: float, hi: float):
    """Grid-then-golden maximization of a signed log-domain objective.

    obj(s) returns (sign, log magnitude) or None outside the domain.  The
    bracket grows geometrically whenever the grid argmax lands on an edge;
    the left edge cannot cross s_floor and the right edge is capped, after
    which the search is declared exhausted.
    """

    def keyed(s):
        sv = obj(s)
        if sv is None:
            return _KEY_INVALID, None
        return _sl_key(*sv), sv

    for _ in range(80):
        grid = np.linspace(lo, hi, 257)
        keys = [keyed(s) for s in grid]
        i = int(max(range(len(grid)), key=lambda j: keys[j][0]))
        at_left = i == 0
        at_right = i == len(grid) - 1
        if at_left and lo > s_floor:
            width = hi - lo
            lo = max(s_floor, lo - width)
            continue
        if at_right:
            if hi >= _S_HI_CAP:
                raise NoConvergence(
                    "saddlepoint search bracket exhausted; objective still "
                    "increasing at the right edge", s_hi=hi)
            hi = min(_S_HI_CAP, hi + (hi - lo))
            continue
        g_lo = grid[i - 1] if i > 0 else grid[i]
        g_hi = grid[i + 1] if i < len(grid) - 1 else grid[i]
        tol = 1e-9 * max(1.0, abs(grid[i]))
        best_s, payload = _golden_argmax(keyed, g_lo, g_hi, tol)
        if payload is None:
            raise NoConvergence("saddlepoint objective undefined at optimum",
                                s=best_s)
        return best_s, payload
    raise NoConvergence("saddlepoint bracket expansion did not settle",
                        lo=lo, hi=hi)


def _prob_from_signed(sign: float, logmag: float) -> Prob:
    if sign <= 0.0 or logmag == _NEG_INF:
        return Prob(_NEG_INF, 0.0)
    return Prob.from_log(min(logmag, 0.0))


def f_saddlepoint(params: TestParams, beta, variant: str = "full") -> SaddlepointBound:
    """Saddlepoint expansion of the trade-off f(beta, gamma), maximized over
    the tilting parameter s.

    variant='full' keeps the third-cumulant correction in the prefactors;
    variant='hat' simplifies them to sgn(1-s) Psi(lambda_a) and
    sgn(s) Psi(lambda_b).  Returns the value (with its log companion) and
    the maximizing s.  Accurate down to blocklengths of a few tens, and the
    only practical route once beta = 2^(-nR) underflows the exact path.
    """
    if variant not in ("full", "hat"):
        raise InvalidParams("variant must be 'full' or 'hat'", variant=variant)
    lb = _as_log_beta(beta)
    if lb == _NEG_INF or lb >= 0.0:
        raise InvalidParams("f_saddlepoint needs beta strictly inside (0, 1)",
                            log_beta=lb)
    n, gamma, sigma2, theta2 = params.n, params.gamma, params.sigma2, params.theta2
    s_min = -sigma2 / params.delta
    s_floor = s_min + 1e-12 * (1.0 + abs(s_min))

    def obj(s):
        try:
            return _sp_objective(n, gamma, sigma2, theta2, s, lb, variant)
        except InvalidParams:
            return None

    lo = max(-1.0, s_floor)
    s_star, (sign, logmag) = _maximize_over_s(obj, s_floor, lo, 2.0)
    return SaddlepointBound(_prob_from_signed(sign, logmag), s_star)


def theta_tilde(s: float, gamma: float, sigma2: float) -> float:
    """Exponent-achieving auxiliary variance theta_tilde(s)^2.

    Evaluates sigma2 + gamma/2 - sigma2/(2s) + sqrt((gamma/2 - sigma2/(2s))^2
    + gamma sigma2) with the root combined stably when the linear part is
    negative.  Always >= sigma2, with equality exactly at gamma = 0.
    """
    if not isinstance(s, (int, float)) or isinstance(s, bool) or not math.isfinite(s):
        raise InvalidParams("s must be a finite real", s=s)
    if s <= 0.0:
        raise InvalidParams("theta_tilde needs s > 0", s=s)
    if gamma < 0.0:
        raise InvalidParams("gamma must be >= 0", gamma=gamma)
    if sigma2 <= 0.0:
        raise InvalidParams("sigma2 must be > 0", sigma2=sigma2)
    a = 0.5 * gamma - 0.5 * sigma2 / s
    rad = math.hypot(a, math.sqrt(gamma * sigma2))
    if a >= 0.0:
        return sigma2 + a + rad
    # a + rad rewritten as gamma sigma2 / (rad - a) to dodge cancellation
    return sigma2 + gamma * sigma2 / (rad - a)


def f_saddlepoint_exponent(n: int, gamma: float, sigma2: float, beta) -> ExponentBound:
    """Expansion with the exponent-achieving variance substituted.

    Each candidate s is scored with theta^2 = theta_tilde(s)^2 plugged into
    the same closed-form cumulant set (the curves are the fixed-theta
    formulas evaluated at theta_tilde(s), not derivatives of the composite
    map).  Returns the value, the maximizing s, and theta_tilde(s*)^2.
    """
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise InvalidParams("n must be a positive integer", n=n)
    if gamma <= 0.0:
        raise InvalidParams(
            "the exponent-achieving variance needs gamma > 0 (it collapses "
            "to sigma2 when the shell energy vanishes)", gamma=gamma)
    if sigma2 <= 0.0:
        raise InvalidParams("sigma2 must be > 0", sigma2=sigma2)
    lb = _as_log_beta(beta)
    if lb == _NEG_INF or lb >= 0.0:
        raise InvalidParams("beta must be strictly inside (0, 1)", log_beta=lb)

    def obj(s):
        if s <= 0.0:
            return None
        try:
            th2 = theta_tilde(s, gamma, sigma2)
            return _sp_objective(n, gamma, sigma2, th2, s, lb, "full")
        except InvalidParams:
            return None

    s_floor = 1e-10
    s_star, (sign, logmag) = _maximize_over_s(obj, s_floor, s_floor, 2.0)
    return ExponentBound(_prob_from_signed(sign, logmag), s_star,
                         theta_tilde(s_star, gamma, sigma2))


def capacity_nats(upsilon: float, sigma2: float) -> float:
    """Channel capacity 0.5 log(1 + upsilon/sigma2) in nats per use."""
    if upsilon < 0.0 or sigma2 <= 0.0:
        raise InvalidParams("need upsilon >= 0 and sigma2 > 0",
                            upsilon=upsilon, sigma2=sigma2)
    return 0.5 * math.log1p(upsilon / sigma2)


def augustin_capacity(s: float, upsilon: float, sigma2: float) -> float:
    """Augustin capacity of order s for the power-constrained channel.

    For s >= 0, s != 1 this is s upsilon/(2 eta) + log(theta_tilde^s
    sigma^(1-s)/sqrt(eta))/(s-1) with eta = s theta_tilde^2 + (1-s) sigma2;
    the s = 1 branch is the Shannon capacity.
    """
    if s < 0.0:
        raise InvalidParams("augustin_capacity needs s >= 0", s=s)
    if upsilon < 0.0 or sigma2 <= 0.0:
        raise InvalidParams("need upsilon >= 0 and sigma2 > 0",
                            upsilon=upsilon, sigma2=sigma2)
    if s == 1.0:
        return capacity_nats(upsilon, sigma2)
    if s == 0.0 or upsilon == 0.0:
        return 0.0
    th2 = theta_tilde(s, upsilon, sigma2)
    eta = s * th2 + (1.0 - s) * sigma2
    log_part = 0.5 * (s * math.log(th2) + (1.0 - s) * math.log(sigma2)
                      - math.log(eta))
    return s * upsilon / (2.0 * eta) + log_part / (s - 1.0)


def _esp_at(rate_nats: float, upsilon: float, sigma2: float, tol: float):
    """Maximize (1-s)/s (C_s - R) over s in (0,1); returns (s_star, esp)."""

    def scored(s):
        v = (1.0 - s) / s * (augustin_capacity(s, upsilon, sigma2) - rate_nats)
        return v, v

    lo, hi = 1e-9, 1.0 - 1e-9
    grid = np.linspace(lo, hi, 513)
    vals = [scored(s)[0] for s in grid]
    i = int(np.argmax(vals))
    g_lo = grid[i - 1] if i > 0 else lo
    g_hi = grid[i + 1] if i < len(grid) - 1 else hi
    s_star, esp = _golden_argmax(scored, g_lo, g_hi, tol)
    return s_star, max(esp, 0.0)


_CRITICAL_RATE_CACHE: dict = {}


def _critical_rate(upsilon: float, sigma2: float, cap: float) -> float:
    """Rate at which the sphere-packing maximizer crosses s = 1/2."""
    key = (upsilon, sigma2)
    hit = _CRITICAL_RATE_CACHE.get(key)
    if hit is not None:
        return hit
    lo, hi = 1e-9, cap * (1.0 - 1e-12)
    s_lo = _esp_at(lo, upsilon, sigma2, 1e-8)[0]
    s_hi = _esp_at(hi, upsilon, sigma2, 1e-8)[0]
    if not (s_lo < 0.5 < s_hi):
        raise NoConvergence("critical-rate bisection bracket failed",
                            s_at_low_rate=s_lo, s_at_high_rate=s_hi)
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        if _esp_at(mid, upsilon, sigma2, 1e-8)[0] < 0.5:
            lo = mid
        else:
            hi = mid
    out = 0.5 * (lo + hi)
    _CRITICAL_RATE_CACHE[key] = out
    return out


def sphere_packing(rate_nats: float, upsilon: float, sigma2: float) -> ExponentReport:
    """Sphere-packing exponent E_sp(R) = sup over s in (0,1) of
    (1-s)/s (C_s - R), with the Augustin capacity C_s at the maximizer,
    the exponent-achieving variance there, and the critical rate (the rate
    whose maximizer sits at s = 1/2).

    Rates at or above capacity report a zero exponent with s_star = 1.
    """
    if not rate_nats > 0.0:
        raise InvalidParams("rate must be > 0 nats", rate_nats=rate_nats)
    if upsilon <= 0.0 or sigma2 <= 0.0:
        raise InvalidParams("need upsilon > 0 and sigma2 > 0",
                            upsilon=upsilon, sigma2=sigma2)
    cap = capacity_nats(upsilon, sigma2)
    crit = _critical_rate(upsilon, sigma2, cap)
    if rate_nats >= cap:
        return ExponentReport(rate_nats=rate_nats, s_star=1.0, esp=0.0,
                              theta_tilde2=theta_tilde(1.0, upsilon, sigma2),
                              augustin=cap, critical_rate_nats=crit)
    s_star, esp = _esp_at(rate_nats, upsilon, sigma2, 1e-10)
    return ExponentReport(rate_nats=rate_nats, s_star=s_star, esp=esp,
                          theta_tilde2=theta_tilde(s_star, upsilon, sigma2),
                          augustin=augustin_capacity(s_star, upsilon, sigma2),
                          critical_rate_nats=crit)
