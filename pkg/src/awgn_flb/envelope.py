"""Lower convex envelope of the trade-off function in the power coordinate.

Under an average power constraint the codebook may park probability mass at
the origin and spend the saved energy on a shell above the nominal budget, so
the operative converse quantity is not f(beta, gamma) itself but its lower
convex envelope taken jointly in (beta, gamma).  The envelope has a simple
two-piece structure: a boundary curve beta_0(gamma) above which it coincides
with f, and a region below where it is the chord between the two trade-off
points (bar_beta, 0) and (beta_0(gamma_0), gamma_0), with the mixing weight
pinned by the power budget.

The boundary is located through an implicit radial equation: three terms
xi_1, xi_2, xi_3 built from Marcum-Q tails and a Bessel density must cancel
at the critical threshold t_0.  Everything here works in the log domain
because the xi_2 prefactor overflows any linear representation long before
the bracketed tail difference it multiplies stops being meaningful.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import InvalidParams, NoBracket, NoConvergence, NoRoot
from .ht_core import TestParams, _as_log_beta, f_exact
from .special_fn import LogValue, Prob, log_bessel_i, marcum_q, signed_log_sum

__all__ = [
    "EnvelopeEndpoints",
    "EnvelopeSolution",
    "InputMixture",
    "envelope_endpoints",
    "f_envelope",
    "m_bar",
    "m_bar_rate",
    "optimal_input",
    "solve_t0",
    "xi_terms",
]

_log = logging.getLogger(__name__)

_NEG_INF = float("-inf")
_LN2 = math.log(2.0)

# geometric scan for the sign change of the chord condition: a coarse pass
# first, the dense documented grid only when the coarse pass sees nothing
_SCAN_COARSE = 256
_SCAN_FULL = 10_000


def _validate_channel(gamma, n, sigma2, theta2) -> None:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidParams("n must be a positive integer", n=n)
    for name, v in (("gamma", gamma), ("sigma2", sigma2), ("theta2", theta2)):
        if isinstance(v, bool) or not isinstance(v, (int, float, np.floating)):
            raise InvalidParams(f"{name} must be a real number", value=v)
        if not math.isfinite(float(v)):
            raise InvalidParams(f"{name} must be finite", value=v)
    if sigma2 <= 0.0:
        raise InvalidParams("sigma2 must be positive", sigma2=sigma2)
    if theta2 <= sigma2:
        raise InvalidParams("theta2 must strictly exceed sigma2",
                            theta2=theta2, sigma2=sigma2)
    if gamma <= 0.0:
        raise InvalidParams(
            "boundary machinery needs gamma > 0; the gamma=0 endpoint enters "
            "only through the chord", gamma=gamma)


# ---------------------------------------------------------------------------
# the implicit boundary equation
# ---------------------------------------------------------------------------

def _tail_diff(pos: Prob, neg: Prob):
    """(sign, log magnitude) terms for pos - neg between two tail values.

    Both tails near one is the dangerous corner: their direct logs agree to
    the last bit long before the difference is actually zero, so the
    subtraction is routed through the complements there (Q1 - Q2 = P2 - P1).
    """
    if max(pos.log_value, neg.log_value) > -_LN2:
        return [(1.0, neg.log_complement), (-1.0, pos.log_complement)]
    return [(1.0, pos.log_value), (-1.0, neg.log_value)]


def _xi_signed_terms(t, gamma, n, sigma2, theta2):
    """The five contributions to xi1 + xi2 + xi3 as (sign, log magnitude).

    Grouped per term: xi1 is a difference of two Marcum tails, xi2 is a
    second difference under a shared exponential prefactor, xi3 is a single
    nonnegative Bessel-density term that vanishes at t = 0.
    """
    sigma = math.sqrt(sigma2)
    theta = math.sqrt(theta2)
    delta = theta2 - sigma2
    m = 0.5 * n
    ng = n * gamma
    root_ng = math.sqrt(ng)

    q11 = marcum_q(m, root_ng * sigma / delta, t / sigma)
    arg1 = t * t / sigma2 - ng * theta2 / (delta * delta)
    q10 = marcum_q(m, 0.0, math.sqrt(max(arg1, 0.0)))
    xi1 = _tail_diff(q11, q10)

    lpref = m * math.log(theta2 / sigma2) \
        + 0.5 * (ng / delta - delta * t * t / (sigma2 * theta2))
    arg2 = t * t / theta2 - ng * sigma2 / (delta * delta)
    q20 = marcum_q(m, 0.0, math.sqrt(max(arg2, 0.0)))
    q2a = marcum_q(m, root_ng * theta / delta, t / theta)
    xi2 = [(s, lpref + lm) for s, lm in _tail_diff(q20, q2a)]

    if t == 0.0:
        l3 = _NEG_INF
    else:
        l3 = math.log(ng / (2.0 * delta)) \
            + m * math.log(t * delta / (sigma2 * root_ng)) \
            - 0.5 * (ng * sigma2 / (delta * delta) + t * t / sigma2) \
            + log_bessel_i(m, root_ng * t / delta).log_magnitude
    return xi1, xi2, (1.0, l3)


def xi_terms(t, gamma, n: int, sigma2: float, theta2: float):
    """Evaluate the three boundary-equation terms at radial threshold t.

    Returns (xi1, xi2, xi3) as plain floats.  The clamps (a)_+ sit inside
    the Marcum second arguments, so for t large enough that both clamp
    arguments are positive the values match the unclamped expressions.
    xi3 >= 0 always.  For large n the linear values may over- or underflow;
    the root solver below works on the log-domain representation instead.
    """
    _validate_channel(gamma, n, sigma2, theta2)
    if isinstance(t, bool) or not isinstance(t, (int, float, np.floating)):
        raise InvalidParams("t must be a real number", t=t)
    t = float(t)
    if not math.isfinite(t) or t < 0.0:
        raise InvalidParams("t must be finite and nonnegative", t=t)
    g1, g2, g3 = _xi_signed_terms(t, float(gamma), int(n),
                                  float(sigma2), float(theta2))
    s1, l1 = signed_log_sum(g1)
    s2, l2 = signed_log_sum(g2)
    return s1 * math.exp(l1), s2 * math.exp(l2), math.exp(g3[1])


def _xi_sum(t, gamma, n, sigma2, theta2):
    g1, g2, g3 = _xi_signed_terms(t, gamma, n, sigma2, theta2)
    return signed_log_sum([*g1, *g2, g3])


def _scan_roots(fn, grid):
    """Ordered root events along grid: exact zeros and sign-change cells."""
    events = []
    prev_t = float(grid[0])
    prev = fn(prev_t)
    if prev[0] == 0.0:
        events.append(("zero", prev_t, None, None, None))
    for t in grid[1:]:
        t = float(t)
        cur = fn(t)
        if cur[0] == 0.0:
            events.append(("zero", t, None, None, None))
        elif prev[0] != 0.0 and cur[0] != prev[0]:
            events.append(("flip", prev_t, t, prev, cur))
        prev_t, prev = t, cur
    return events


def _refine_root(fn, lo, hi, plo, phi):
    """Regula falsi with Illinois damping on (sign, log magnitude) values.

    The secant step is formed after rescaling both bracket values by their
    common maximum log magnitude, which keeps the arithmetic finite no
    matter how extreme the underlying terms are.
    """
    side = 0
    for _ in range(120):
        ref = max(plo[1], phi[1])
        if ref == _NEG_INF:
            break
        vlo = plo[0] * math.exp(plo[1] - ref)
        vhi = phi[0] * math.exp(phi[1] - ref)
        denom = vhi - vlo
        mid = hi - vhi * (hi - lo) / denom if denom != 0.0 else 0.5 * (lo + hi)
        if not lo < mid < hi:
            mid = 0.5 * (lo + hi)
        if hi - lo <= 1e-15 * hi:
            return mid
        pm = fn(mid)
        if pm[0] == 0.0:
            return mid
        if pm[0] == plo[0]:
            lo, plo = mid, pm
            if side == -1:
                phi = (phi[0], phi[1] - _LN2)
            side = -1
        else:
            hi, phi = mid, pm
            if side == 1:
                plo = (plo[0], plo[1] - _LN2)
            side = 1
    return 0.5 * (lo + hi)


def _solve_t0_impl(gamma, n, sigma2, theta2, hint: Optional[float] = None) -> float:
    def fn(t):
        return _xi_sum(t, gamma, n, sigma2, theta2)

    theta = math.sqrt(theta2)
    t_lo = 1e-6 * theta
    t_hi = 1e3 * theta * math.sqrt(n)

    # warm path: a previous root for nearby parameters localizes this one.
    # Only small parameter moves may pass a hint (see _hint_for): a far-away
    # hint can sit next to a second root of the sum and capture the wrong
    # branch, violating the smallest-root convention.
    if hint is not None and t_lo < hint < t_hi:
        for width in (1.1, 1.3):
            lo = max(t_lo, hint / width)
            hi = min(t_hi, hint * width)
            events = _scan_roots(fn, np.geomspace(lo, hi, 9))
            if events:
                ev = events[0]
                if ev[0] == "zero":
                    return float(ev[1])
                return float(_refine_root(fn, ev[1], ev[2], ev[3], ev[4]))

    # a nearly degenerate separation (theta2 -> sigma2) pushes the root out
    # like sqrt(n gamma) sigma2 / (theta2 - sigma2); include that scale when
    # it exceeds the default window
    t_far = 32.0 * theta * (1.0 + math.sqrt(n * max(gamma, 1.0)) * sigma2
                            / (theta2 - sigma2))
    ranges = [(t_lo, t_hi)]
    if t_far > t_hi:
        ranges.append((t_lo, t_far))
    for lo_hi in ranges:
        for points in (_SCAN_COARSE, _SCAN_FULL):
            events = _scan_roots(fn, np.geomspace(lo_hi[0], lo_hi[1], points))
            if events:
                if len(events) > 1:
                    _log.info(
                        "boundary equation shows %d sign changes at gamma=%g "
                        "n=%d; keeping the smallest root", len(events), gamma,
                        n)
                ev = events[0]
                if ev[0] == "zero":
                    return float(ev[1])
                return float(_refine_root(fn, ev[1], ev[2], ev[3], ev[4]))

    s_lo = fn(t_lo)
    s_hi = fn(ranges[-1][1])
    raise NoRoot("no sign change of the boundary equation on the scan grid",
                 gamma=gamma, n=n, sigma2=sigma2, theta2=theta2,
                 t_range=(t_lo, ranges[-1][1]), end_signs=(s_lo[0], s_hi[0]))


_T0_CACHE: dict = {}
_T0_CACHE_CAP = 20_000
# per (n, sigma2, theta2): last solved (gamma, t0), used as a warm hint
_LAST_ROOT: dict = {}
# per (n, sigma2, theta2): last chord gamma0, used to seed the bracket
_LAST_CHORD: dict = {}

# widest gamma move (in log) across which a previous root is trusted as a
# hint; beyond it the root may have drifted next to a different branch
_HINT_WINDOW = 0.2
# the chord search tracks its own (gamma, root) pair, so it can afford a
# slightly wider window: the root drifts at most ~e^(0.45 dlng) while the
# next sign change sits a factor >= 1.6 above it, clear of the scan bands
_CHORD_HINT_WINDOW = 0.35


def _hint_for(gamma: float, last, window: float = _HINT_WINDOW) -> Optional[float]:
    if last is None:
        return None
    if abs(math.log(last[0] / gamma)) > window:
        return None
    return last[1]


def solve_t0(gamma, n: int, sigma2: float, theta2: float) -> float:
    """Smallest positive root t0 of xi1 + xi2 + xi3 = 0.

    t = 0 annihilates all three terms, so the scan starts just above zero
    and walks a geometric grid up to 1e3 * theta * sqrt(n) looking for the
    first sign change, which is then polished to machine precision.  Raises
    NoRoot when the sum never changes sign on that range.
    """
    _validate_channel(gamma, n, sigma2, theta2)
    key = (float(gamma), int(n), float(sigma2), float(theta2))
    hit = _T0_CACHE.get(key)
    if hit is not None:
        return hit
    hint = _hint_for(key[0], _LAST_ROOT.get(key[1:]))
    t0 = _solve_t0_impl(key[0], key[1], key[2], key[3], hint=hint)
    if len(_T0_CACHE) >= _T0_CACHE_CAP:
        _T0_CACHE.clear()
    _T0_CACHE[key] = t0
    _LAST_ROOT[key[1:]] = (key[0], t0)
    return t0


# ---------------------------------------------------------------------------
# boundary point and chord endpoints
# ---------------------------------------------------------------------------

class EnvelopeEndpoints(NamedTuple):
    beta0: Prob
    bar_beta: Prob
    t0: float
    bar_t_star: float


def _endpoints_from_t0(gamma, n, sigma2, theta2, t0) -> EnvelopeEndpoints:
    theta = math.sqrt(theta2)
    delta = theta2 - sigma2
    m = 0.5 * n
    ng = n * gamma
    beta0 = marcum_q(m, math.sqrt(ng) * theta / delta, t0 / theta).one_minus()
    bar_t = math.sqrt(max(t0 * t0 - ng * sigma2 * theta2 / (delta * delta), 0.0))
    bar_beta = marcum_q(m, 0.0, bar_t / theta).one_minus()
    return EnvelopeEndpoints(beta0, bar_beta, t0, bar_t)


def envelope_endpoints(gamma, n: int, sigma2: float, theta2: float) -> EnvelopeEndpoints:
    """Chord endpoints at power gamma: (beta0, bar_beta, t0, bar_t_star).

    beta0 is the type-II error of the boundary point at power gamma and
    bar_beta the one of its zero-power partner; bar_t_star carries the
    clamped radial threshold, so bar_t_star = 0 (hence bar_beta = 0)
    whenever t0^2 <= n * gamma * sigma2 * theta2 / delta^2.
    """
    t0 = solve_t0(gamma, n, sigma2, theta2)
    return _endpoints_from_t0(float(gamma), int(n), float(sigma2),
                              float(theta2), t0)


def m_bar(n: int, upsilon: float, sigma2: float, theta2: float) -> float:
    """Codebook-size threshold 1/beta0(upsilon) below which the
    average-power converse collapses to the fixed-power trade-off."""
    ep = envelope_endpoints(upsilon, n, sigma2, theta2)
    return math.exp(-ep.beta0.log_value)


def m_bar_rate(n: int, upsilon: float, sigma2: float, theta2: float) -> float:
    """Same threshold expressed as a rate in bits per channel use."""
    ep = envelope_endpoints(upsilon, n, sigma2, theta2)
    return -ep.beta0.log_value / (n * _LN2)


# ---------------------------------------------------------------------------
# the envelope itself
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class EnvelopeSolution:
    """Resolved envelope query.

    lam is the chord weight on the high-power endpoint (gamma0); on or above
    the boundary the chord degenerates to the point itself, lam = 1 and
    value equals the plain trade-off function at (beta, upsilon).
    """

    t0: float
    gamma0: float
    beta0: Prob
    bar_t_star: float
    bar_beta: Prob
    lam: float
    value: Prob
    on_boundary_or_above: bool


@dataclass(frozen=True, slots=True)
class InputMixture:
    origin_mass: float
    shell_energy: float
    shell_mass: float


def _chord_log(lam: float, ep: EnvelopeEndpoints) -> float:
    la = math.log(lam) + ep.beta0.log_value
    if lam >= 1.0 or ep.bar_beta.log_value == _NEG_INF:
        return la
    return float(np.logaddexp(la, math.log1p(-lam) + ep.bar_beta.log_value))


def _solve_chord(n, upsilon, sigma2, theta2, lb, ep_u):
    """Find gamma0 >= upsilon whose chord passes through log-beta lb.

    The chord value lam * beta0(gamma0) + (1 - lam) * bar_beta(gamma0) with
    lam = upsilon / gamma0 is assumed decreasing in gamma0.  The doubling
    phase doubles as the runtime check of that assumption; a violation or a
    bad residual downgrades to a dense scan.
    """
    last = [(upsilon, ep_u.t0)]
    cache: dict = {}

    def endpoints_at(g0: float) -> EnvelopeEndpoints:
        ep = cache.get(g0)
        if ep is None:
            t0 = _solve_t0_impl(g0, n, sigma2, theta2,
                                hint=_hint_for(g0, last[0],
                                               _CHORD_HINT_WINDOW))
            last[0] = (g0, t0)
            ep = _endpoints_from_t0(g0, n, sigma2, theta2, t0)
            cache[g0] = ep
        return ep

    def gap(g0: float) -> float:
        return _chord_log(upsilon / g0, endpoints_at(g0)) - lb

    lo, v_lo = upsilon, ep_u.beta0.log_value - lb
    hi = 4.0 * upsilon
    cap = 1e6 * upsilon

    # Seed the bracket from the last solved chord on this channel.  Grid
    # sweeps move gamma0 slowly, so a narrow window around the previous root
    # usually brackets the new one; the gap signs are checked before use, so
    # a stale seed only costs the probe evaluations.
    seed = _LAST_CHORD.get((n, sigma2, theta2))
    if seed is not None and seed[0] > upsilon:
        last[0] = seed
        probe = max(upsilon * (1.0 + 1e-12), seed[0] / 1.4)
        v_probe = gap(probe)
        if v_probe > 0.0:
            lo, v_lo = probe, v_probe
            hi = min(max(seed[0] * 1.4, probe * 1.1), cap)
        else:
            hi = probe

    monotone = True
    prev = v_lo
    while True:
        v_hi = gap(hi)
        if v_hi > prev + 1e-12:
            monotone = False
        if v_hi <= 0.0:
            break
        if hi >= cap:
            raise NoBracket(
                "chord constraint keeps the same sign up to the power cap; "
                "the envelope construction degenerates for this query",
                upsilon=upsilon, n=n, log_beta=lb, gamma0_cap=cap,
                gap_at_cap=v_hi)
        lo, v_lo, prev = hi, v_hi, v_hi
        hi = min(2.0 * hi, cap)

    # Illinois on x = ln(gamma0); gap is a log-domain difference, O(1) scale
    x_lo, x_hi = math.log(lo), math.log(hi)
    root = None
    side = 0
    for _ in range(200):
        denom = v_hi - v_lo
        x = x_hi - v_hi * (x_hi - x_lo) / denom if denom != 0.0 \
            else 0.5 * (x_lo + x_hi)
        if not x_lo < x < x_hi:
            x = 0.5 * (x_lo + x_hi)
        g0 = math.exp(x)
        v = gap(g0)
        if abs(v) <= 2e-10:
            root = g0
            break
        if (v > 0.0) == (v_lo > 0.0):
            x_lo, v_lo = x, v
            if side == -1:
                v_hi *= 0.5
            side = -1
        else:
            x_hi, v_hi = x, v
            if side == 1:
                v_lo *= 0.5
            side = 1
        if x_hi - x_lo <= 5e-16:
            root = math.exp(0.5 * (x_lo + x_hi))
            break
    if root is None:
        root = math.exp(0.5 * (x_lo + x_hi))

    if not monotone or abs(gap(root)) > 1e-9:
        _log.warning("chord search downgraded to a dense scan at "
                     "upsilon=%g n=%d log_beta=%g", upsilon, n, lb)
        root = _chord_dense_scan(gap, upsilon, max(hi, 4.0 * upsilon))
        if abs(gap(root)) > 1e-9:
            raise NoConvergence(
                "chord residual stayed above tolerance after the dense scan",
                upsilon=upsilon, n=n, log_beta=lb, gamma0=root,
                residual=gap(root))
    ep_root = endpoints_at(root)
    _LAST_CHORD[(n, sigma2, theta2)] = (root, ep_root.t0)
    return root, ep_root


def _chord_dense_scan(gap, g_lo: float, g_hi: float) -> float:
    grid = np.geomspace(g_lo, g_hi, 4097)
    prev_g, prev_v = float(grid[0]), gap(float(grid[0]))
    for g in grid[1:]:
        g = float(g)
        v = gap(g)
        if v == 0.0:
            return g
        if (v > 0.0) != (prev_v > 0.0):
            lo, hi = prev_g, g
            s_lo = prev_v > 0.0
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if mid <= lo or mid >= hi:
                    break
                if (gap(mid) > 0.0) == s_lo:
                    lo = mid
                else:
                    hi = mid
            return 0.5 * (lo + hi)
        prev_g, prev_v = g, v
    raise NoBracket("dense chord scan found no sign change",
                    gamma0_range=(g_lo, g_hi), gap_at_ends=(gap(g_lo), prev_v))


def f_envelope(n: int, upsilon: float, sigma2: float, theta2: float,
               beta) -> EnvelopeSolution:
    """Envelope value at (beta, upsilon) with the full chord diagnostics.

    On or above the boundary (beta >= beta0(upsilon)) the envelope equals
    the trade-off function and the query reduces to a single exact
    evaluation.  Below it, the chord power gamma0 is found by bracketing
    plus an Illinois iteration, and the value is the chord combination
    lam * f(beta0, gamma0) + (1 - lam) * f(bar_beta, 0) with
    lam = upsilon / gamma0.
    """
    lb = _as_log_beta(beta)
    if lb == _NEG_INF or lb == 0.0:
        raise InvalidParams("f_envelope needs beta strictly inside (0, 1)",
                            log_beta=lb)
    _validate_channel(upsilon, n, sigma2, theta2)
    n = int(n)
    upsilon = float(upsilon)
    sigma2 = float(sigma2)
    theta2 = float(theta2)

    ep_u = envelope_endpoints(upsilon, n, sigma2, theta2)
    if lb >= ep_u.beta0.log_value:
        value = f_exact(TestParams(n, upsilon, sigma2, theta2), LogValue(lb))
        return EnvelopeSolution(t0=ep_u.t0, gamma0=upsilon, beta0=ep_u.beta0,
                                bar_t_star=ep_u.bar_t_star,
                                bar_beta=ep_u.bar_beta, lam=1.0, value=value,
                                on_boundary_or_above=True)

    gamma0, ep = _solve_chord(n, upsilon, sigma2, theta2, lb, ep_u)
    lam = upsilon / gamma0
    f_hi = f_exact(TestParams(n, gamma0, sigma2, theta2), ep.beta0)
    f_lo = f_exact(TestParams(n, 0.0, sigma2, theta2), ep.bar_beta)
    log_value = float(np.logaddexp(math.log(lam) + f_hi.log_value,
                                   math.log1p(-lam) + f_lo.log_value))
    value = Prob.from_log(min(log_value, 0.0))
    _LAST_ROOT[(n, sigma2, theta2)] = (gamma0, ep.t0)
    return EnvelopeSolution(t0=ep.t0, gamma0=gamma0, beta0=ep.beta0,
                            bar_t_star=ep.bar_t_star, bar_beta=ep.bar_beta,
                            lam=lam, value=value, on_boundary_or_above=False)


def optimal_input(n: int, upsilon: float, sigma2: float, theta2: float,
                  beta) -> InputMixture:
    """Mass split achieving the envelope: origin point plus one shell."""
    sol = f_envelope(n, upsilon, sigma2, theta2, beta)
    if sol.on_boundary_or_above:
        return InputMixture(0.0, float(upsilon), 1.0)
    return InputMixture(1.0 - sol.lam, sol.gamma0, sol.lam)
