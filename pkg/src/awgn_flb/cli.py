"""Command-line front end.

Evaluates single bounds, runs blocklength sweeps as CSV/JSON, and exposes
the envelope/exponent/cone-packing diagnostics plus Monte-Carlo simulation
and a self-test suite.  All numeric output is written in full precision
(17 significant digits); probability columns carry a log10 companion so
deep-tail values stay readable.

Exit codes: 0 success, 2 usage error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import io
import json
import math
import os
import sys
from typing import Optional

from . import __version__
from .bounds import (BoundQuery, compute_bound, cone_packing, cor1_maximal,
                     half_angle, lemma1_transform, phi_n, sweep)
from .envelope import envelope_endpoints, f_envelope, m_bar
from .errors import BoundError, InvalidParams
from .saddlepoint import (capacity_nats, f_saddlepoint_exponent,
                          sphere_packing)
from .sim import apsk_search, make_apsk, make_psk, ml_error_mc
from .special_fn import marcum_q, marcum_q_grad, psi_stable, reg_inc_beta

__all__ = ["main"]

_LN10 = math.log(10.0)

_METHOD_NAMES = {
    "auto": "auto",
    "exact": "exact",
    "sp-full": "saddlepoint-full",
    "sp-hat": "saddlepoint-hat",
    "vh": "verdu-han",
}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def _log10_of(prob) -> Optional[float]:
    """log10 of a Prob, None when the value is exactly zero."""
    lv = prob.log_value
    if lv == float("-inf"):
        return None
    return lv / _LN10


def _resolved_config(args, keys) -> dict:
    cfg = {"command": args.command}
    for k in keys:
        cfg[k] = getattr(args, k.replace("-", "_"))
    return cfg


def _write_output(text: str, args) -> None:
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit(config: dict, columns, rows, args, extra: Optional[dict] = None):
    """Render a table (or a single-row record) in the requested format.

    CSV: '#'-prefixed header lines carry the artifact version, the resolved
    config and (unless suppressed) a timestamp; then an RFC-4180 style
    header row and data rows with '.' decimal separators.  JSON: one object
    with version/config/rows keys (plus `extra`, merged at top level).
    """
    stamp = None
    if not args.no_timestamp:
        stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
    if args.format == "json":
        obj = {"version": __version__, "config": config}
        if stamp is not None:
            obj["timestamp"] = stamp
        if extra:
            obj.update(extra)
        if columns:
            obj["rows"] = [dict(zip(columns, r)) for r in rows]
        _write_output(json.dumps(obj, indent=2, sort_keys=True,
                                 allow_nan=False) + "\n", args)
        return
    buf = io.StringIO()
    buf.write("# awgn-flb %s\n" % __version__)
    buf.write("# config: %s\n" % " ".join(
        "%s=%s" % (k, config[k]) for k in sorted(config)))
    if extra:
        for k in sorted(extra):
            buf.write("# %s: %s\n" % (k, extra[k]))
    if stamp is not None:
        buf.write("# timestamp: %s\n" % stamp)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    _write_output(buf.getvalue(), args)


def _parse_grid(text: str):
    """Blocklength grid syntax.

    "8,16,32" is an explicit list; "A:B" or "A:B:lin" steps by one;
    "A:B:log" doubles from A (appending B if not reached exactly);
    "A:B:lin:K" / "A:B:log:K" place K points and round to unique ints.
    """
    text = text.strip()
    if "," in text:
        vals = [int(p) for p in text.split(",") if p.strip()]
    elif ":" in text:
        parts = text.split(":")
        if len(parts) < 2 or len(parts) > 4:
            raise ValueError("grid must be A:B[:lin|log[:K]]")
        a, b = int(parts[0]), int(parts[1])
        scale = parts[2] if len(parts) >= 3 else "lin"
        count = int(parts[3]) if len(parts) == 4 else None
        if a < 1 or b < a:
            raise ValueError("grid needs 1 <= A <= B")
        if scale not in ("lin", "log"):
            raise ValueError("grid scale must be lin or log")
        if count is not None:
            if count < 2:
                raise ValueError("grid point count must be >= 2")
            if scale == "log":
                raw = [a * (b / a) ** (i / (count - 1)) for i in range(count)]
            else:
                raw = [a + (b - a) * i / (count - 1) for i in range(count)]
            vals = sorted({int(round(x)) for x in raw})
        elif scale == "log":
            vals = []
            x = a
            while x <= b:
                vals.append(x)
                x *= 2
            if vals[-1] != b:
                vals.append(b)
        else:
            vals = list(range(a, b + 1))
    else:
        vals = [int(text)]
    if not vals or any(v < 1 for v in vals):
        raise ValueError("grid values must be positive integers")
    return vals


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--output", default=None, help="output path (default stdout)")
    p.add_argument("--no-timestamp", action="store_true",
                   help="omit the timestamp header for byte-identical reruns")


def _add_query_flags(p: argparse.ArgumentParser, need_n: bool = True) -> None:
    p.add_argument("--constraint", required=True,
                   choices=("equal", "maximal", "average"))
    if need_n:
        p.add_argument("--n", required=True, type=int, help="blocklength")
    p.add_argument("--snr-db", required=True, type=float,
                   help="10*log10(upsilon/sigma2)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--m", type=int, help="codebook size M")
    g.add_argument("--rate-bits", type=float, help="rate in bits per use")
    p.add_argument("--theta", default="capacity",
                   choices=("capacity", "fixed", "exponent-asymptotic",
                            "exponent-finite-n"),
                   help="auxiliary-scale policy")
    p.add_argument("--theta2", type=float, default=None,
                   help="auxiliary variance (with --theta fixed)")
    p.add_argument("--method", default="auto", choices=sorted(_METHOD_NAMES),
                   help="auto|exact|sp-full|sp-hat|vh")


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get("AWGN_FLB_WORKERS", "1")))
    except ValueError:
        return 1


def _add_workers_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--workers", type=int, default=_default_workers(),
                   help="declared parallelism (env AWGN_FLB_WORKERS)")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="awgn-flb",
        description="Finite-blocklength converse bounds for the AWGN channel")
    ap.add_argument("--version", action="version",
                    version="awgn-flb %s" % __version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", help="evaluate one lower bound")
    _add_query_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("sweep", help="bound or maximal rate across blocklengths")
    p.add_argument("--mode", required=True, choices=("error", "maxrate"))
    p.add_argument("--eps", type=float, default=None,
                   help="target error probability (maxrate mode)")
    _add_query_flags(p, need_n=False)
    p.add_argument("--n", required=True,
                   help="grid: list '8,16', range 'A:B[:lin|log[:K]]'")
    _add_workers_flag(p)
    _add_output_flags(p)

    p = sub.add_parser("envelope", help="lower convex envelope boundary table")
    p.add_argument("--n", required=True, type=int)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--theta2", required=True, type=float)
    p.add_argument("--grid", type=int, default=200,
                   help="number of boundary points")
    p.add_argument("--gamma-min", type=float, default=None)
    p.add_argument("--gamma-max", type=float, default=None)
    _add_output_flags(p)

    p = sub.add_parser("exponent", help="sphere-packing exponent diagnostics")
    p.add_argument("--snr-db", required=True, type=float)
    p.add_argument("--sigma2", type=float, default=1.0)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--rate-bits", type=float)
    g.add_argument("--m", type=int)
    p.add_argument("--n", type=int, default=None,
                   help="also evaluate the finite-n refinement at this n "
                        "(required with --m)")
    _add_output_flags(p)

    p = sub.add_parser("conepack", help="cone-packing comparison bounds")
    p.add_argument("--n", required=True, type=int)
    p.add_argument("--m", required=True, type=int)
    p.add_argument("--snr-db", required=True, type=float)
    p.add_argument("--sigma2", type=float, default=1.0)
    _add_output_flags(p)

    p = sub.add_parser("simulate", help="Monte-Carlo ML decoding error")
    p.add_argument("--family", required=True, choices=("psk", "apsk", "search"))
    p.add_argument("--m", required=True, type=int)
    p.add_argument("--snr-db", required=True, type=float)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--constraint", default=None,
                   choices=("equal", "maximal", "average"))
    p.add_argument("--trials", type=float, default=1e6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=60,
                   help="candidate evaluations (search family)")
    p.add_argument("--save-constellation", default=None,
                   help="write the constellation as text to this path")
    _add_workers_flag(p)
    _add_output_flags(p)

    p = sub.add_parser("selftest", help="internal consistency checks")
    p.add_argument("--suite", default="quick", choices=("quick", "full"))
    _add_workers_flag(p)
    _add_output_flags(p)
    return ap


# ----------------------------------------------------------------------
# subcommands


def _query_from_args(ap, args, n: int) -> BoundQuery:
    if (args.m is None) == (args.rate_bits is None):
        ap.error("exactly one of --m / --rate-bits is required")
    try:
        return BoundQuery(constraint=args.constraint, n=n,
                          snr_db=args.snr_db, M=args.m,
                          rate_bits=args.rate_bits, theta_policy=args.theta,
                          theta2=args.theta2,
                          method=_METHOD_NAMES[args.method])
    except InvalidParams as exc:
        ap.error(str(exc))


def _cmd_bound(ap, args) -> int:
    q = _query_from_args(ap, args, args.n)
    res = compute_bound(q)
    cfg = _resolved_config(args, ["constraint", "n", "snr_db", "m",
                                  "rate_bits", "theta", "theta2", "method"])
    extra = {
        "value": res.value.value,
        "log10_value": _log10_of(res.value),
        "method_used": res.method_used,
        "bound_name": res.bound_name,
        "s_star": res.s_star,
        "t_star": res.t_star,
        "theta2_used": res.theta2_used,
        "warnings": list(res.warnings),
    }
    if args.format == "json":
        _emit(cfg, (), [], args, extra=extra)
    else:
        cols = ("value", "log10_value", "method_used", "bound_name",
                "s_star", "t_star", "theta2_used", "warnings")
        row = [extra[c] if c != "warnings" else "; ".join(res.warnings)
               for c in cols]
        _emit(cfg, cols, [row], args)
    for wtext in res.warnings:
        print("awgn-flb: warning: %s" % wtext, file=sys.stderr)
    return 0


def _cmd_sweep(ap, args) -> int:
    try:
        grid = _parse_grid(args.n)
    except ValueError as exc:
        ap.error(str(exc))
    if args.mode == "maxrate":
        if args.eps is None:
            ap.error("--eps is required with --mode maxrate")
        if not (0.0 < args.eps < 1.0):
            ap.error("--eps must lie in (0, 1)")
        if args.m is not None or args.rate_bits is not None:
            ap.error("--m/--rate-bits have no effect in maxrate mode")
        args.rate_bits = 1.0  # placeholder; the solver replaces it
    elif args.eps is not None:
        ap.error("--eps only applies to --mode maxrate")
    template = _query_from_args(ap, args, grid[0])
    mode = "error_vs_n" if args.mode == "error" else "maxrate_vs_n"
    rows_out = []
    ok_rows = 0
    for row in sweep(mode, grid, template, target_eps=args.eps):
        val = None if row.value is None else row.value.value
        l10 = None if row.value is None else _log10_of(row.value)
        rows_out.append([row.n, row.rate_bits, val, l10, row.method,
                         row.note])
        if row.value is not None:
            ok_rows += 1
        if row.note:
            print("awgn-flb: n=%d: %s" % (row.n, row.note), file=sys.stderr)
    cfg = _resolved_config(args, ["mode", "eps", "constraint", "snr_db",
                                  "m", "rate_bits", "theta", "theta2",
                                  "method", "n", "workers"])
    if args.mode == "maxrate":
        del cfg["rate_bits"]  # placeholder, not user input
    _emit(cfg, ("n", "rate_bits", "value", "log10_value", "method", "note"),
          rows_out, args)
    return 0 if ok_rows else 3


def _cmd_envelope(ap, args) -> int:
    if args.n < 1:
        ap.error("--n must be a positive integer")
    if not (args.sigma2 > 0.0 and args.theta2 > args.sigma2):
        ap.error("need theta2 > sigma2 > 0")
    if args.grid < 2:
        ap.error("--grid must be >= 2")
    lo = args.gamma_min
    hi = args.gamma_max
    if lo is None:
        lo = 0.02 * args.n * args.sigma2
    if hi is None:
        hi = 50.0 * args.n * args.theta2
    if not (0.0 < lo < hi):
        ap.error("need 0 < gamma-min < gamma-max")
    rows = []
    for i in range(args.grid):
        gamma = lo * (hi / lo) ** (i / (args.grid - 1))
        ep = envelope_endpoints(gamma, args.n, args.sigma2, args.theta2)
        rows.append([gamma, ep.t0, ep.beta0.value, _log10_of(ep.beta0),
                     ep.bar_beta.value, _log10_of(ep.bar_beta),
                     ep.bar_t_star])
    cfg = _resolved_config(args, ["n", "sigma2", "theta2", "grid",
                                  "gamma_min", "gamma_max"])
    cfg["gamma_min"], cfg["gamma_max"] = lo, hi
    _emit(cfg, ("gamma", "t0", "beta0", "log10_beta0", "bar_beta",
                "log10_bar_beta", "bar_t_star"), rows, args)
    return 0


def _cmd_exponent(ap, args) -> int:
    upsilon = 10.0 ** (args.snr_db / 10.0)
    if args.m is not None:
        if args.n is None:
            ap.error("--m needs --n to define a rate")
        if args.m < 2:
            ap.error("--m must be >= 2")
        rate_nats = math.log(args.m) / args.n
    else:
        if args.rate_bits <= 0.0:
            ap.error("--rate-bits must be positive")
        rate_nats = args.rate_bits * math.log(2.0)
    rep = sphere_packing(rate_nats, upsilon, args.sigma2)
    cap = capacity_nats(upsilon, args.sigma2)
    extra = {
        "rate_bits": rate_nats / math.log(2.0),
        "rate_nats": rate_nats,
        "capacity_bits": cap / math.log(2.0),
        "critical_rate_bits": rep.critical_rate_nats / math.log(2.0),
        "esp": rep.esp,
        "s_star": rep.s_star,
        "theta_tilde2": rep.theta_tilde2,
        "augustin": rep.augustin,
    }
    if args.n is not None:
        if args.n < 1:
            ap.error("--n must be a positive integer")
        eb = f_saddlepoint_exponent(args.n, upsilon, args.sigma2,
                                    math.exp(-args.n * rate_nats))
        extra["finite_n_value"] = eb.value.value
        extra["finite_n_log10_value"] = _log10_of(eb.value)
        extra["finite_n_s_star"] = eb.s_star
        extra["finite_n_theta_tilde2"] = eb.theta_tilde2
    cfg = _resolved_config(args, ["snr_db", "sigma2", "rate_bits", "m", "n"])
    if args.format == "json":
        _emit(cfg, (), [], args, extra=extra)
    else:
        cols = tuple(sorted(extra))
        _emit(cfg, cols, [[extra[c] for c in cols]], args)
    return 0


def _cmd_conepack(ap, args) -> int:
    if args.n < 1 or args.m < 2:
        ap.error("need --n >= 1 and --m >= 2")
    upsilon = 10.0 ** (args.snr_db / 10.0) * args.sigma2
    eq = cone_packing(args.n, args.m, upsilon, sigma2=args.sigma2)
    mx = cor1_maximal(args.n, args.m, upsilon, sigma2=args.sigma2)
    extra = {
        "half_angle": half_angle(args.n, args.m),
        "value": eq.value.value,
        "log10_value": _log10_of(eq.value),
        "maximal_value": mx.value.value,
        "log10_maximal_value": _log10_of(mx.value),
    }
    cfg = _resolved_config(args, ["n", "m", "snr_db", "sigma2"])
    for wtext in eq.warnings + mx.warnings:
        print("awgn-flb: warning: %s" % wtext, file=sys.stderr)
    if args.format == "json":
        _emit(cfg, (), [], args, extra=extra)
    else:
        cols = ("half_angle", "value", "log10_value", "maximal_value",
                "log10_maximal_value")
        _emit(cfg, cols, [[extra[c] for c in cols]], args)
    return 0


def _cmd_simulate(ap, args) -> int:
    if args.m < 1:
        ap.error("--m must be >= 1")
    trials = int(args.trials)
    if trials < 10_000:
        ap.error("--trials must be >= 10000")
    if args.seed < 0:
        ap.error("--seed must be >= 0")
    if args.workers < 1:
        ap.error("--workers must be >= 1")
    upsilon = 10.0 ** (args.snr_db / 10.0)
    kind = args.constraint
    evaluations = None
    if args.family == "psk":
        if kind not in (None, "equal"):
            ap.error("--family psk satisfies the equal constraint; omit "
                     "--constraint or pass equal")
        kind = "equal"
        con = make_psk(args.m, upsilon, sigma2=args.sigma2)
        est = ml_error_mc(con, args.sigma2, trials, args.seed,
                          workers=args.workers)
    elif args.family == "apsk":
        if kind is None:
            kind = "maximal"
        if kind == "equal":
            ap.error("an APSK ring plus origin cannot satisfy the equal "
                     "constraint; use --family psk")
        if args.m < 2:
            ap.error("--family apsk needs --m >= 2")
        budget = 2.0 * upsilon * args.sigma2
        if kind == "average":
            radius = math.sqrt(budget * args.m / (args.m - 1))
        else:
            radius = math.sqrt(budget)
        con = make_apsk([(args.m - 1, radius, 0.0)], upsilon,
                        constraint_kind=kind, origin_count=1,
                        sigma2=args.sigma2)
        est = ml_error_mc(con, args.sigma2, trials, args.seed,
                          workers=args.workers)
    else:
        if kind is None:
            kind = "maximal"
        if args.budget < 1:
            ap.error("--budget must be >= 1")
        con, est = apsk_search(args.m, upsilon, args.sigma2, kind,
                               budget=args.budget, seed=args.seed,
                               final_trials=trials, workers=args.workers)
        evaluations = args.budget
    if args.save_constellation:
        with open(args.save_constellation, "w", encoding="utf-8") as fh:
            fh.write(con.to_text())
    extra = {
        "family": args.family,
        "m": args.m,
        "constraint": kind,
        "error_prob": est.error_prob,
        "log10_error_prob": (None if est.error_prob == 0.0
                             else math.log10(est.error_prob)),
        "std_error": est.std_error,
        "trials": est.trials,
        "seed": args.seed,
    }
    if evaluations is not None:
        extra["evaluations"] = evaluations
    cfg = _resolved_config(args, ["family", "m", "snr_db", "sigma2",
                                  "constraint", "trials", "seed", "budget",
                                  "workers"])
    cfg["constraint"] = kind
    cfg["trials"] = trials
    if args.format == "json":
        extra["constellation"] = {
            "constraint_kind": con.constraint_kind,
            "power_budget": con.power_budget,
            "points": [[float(x), float(y)] for x, y in con.points],
        }
        _emit(cfg, (), [], args, extra=extra)
    else:
        cols = ("family", "m", "constraint", "error_prob",
                "log10_error_prob", "std_error", "trials", "seed")
        _emit(cfg, cols, [[extra[c] for c in cols]], args)
    return 0


def _selftest_checks(suite: str, workers: int):
    """Yield (name, callable) pairs; each callable returns (ok, detail)."""

    def marcum_anchor():
        got = marcum_q(1, 0.0, 1.4142135623730951).value
        want = math.exp(-1.0)
        return abs(got - want) < 1e-12, "Q1(0,sqrt2)=%.12f" % got

    def beta_anchor():
        got = reg_inc_beta(0.5, 0.5, 0.5)
        return abs(got - 0.5) < 1e-12, "I_0.5(.5,.5)=%.12f" % got

    def psi_anchor():
        got = psi_stable(0.0)
        return abs(got - 0.5) < 1e-15, "psi(0)=%.12f" % got

    def halfspace():
        got = phi_n(3, math.pi / 2, 0.5).value
        want = 0.5 * math.erfc(math.sqrt(3.0 / 0.5) / math.sqrt(2.0))
        return abs(got - want) < 1e-10, "phi=%.3e" % got

    def cone_transform_identity():
        base = lambda n, m, u: cone_packing(n, m, u).value
        lhs = lemma1_transform("equal_to_maximal_eq16", base, 2, 16, 10.0)
        rhs = cor1_maximal(2, 16, 10.0).value.value
        return abs(lhs.value.value - rhs) < 1e-10, "eq16 vs direct"

    def capacity_anchor():
        got = capacity_nats(10.0, 1.0) / math.log(2.0)
        return abs(got - 1.7297) < 5e-3, "C(10dB)=%.4f bits" % got

    def fast_path_equality():
        qa = BoundQuery(constraint="average", n=2, snr_db=10.0, M=16)
        qm = BoundQuery(constraint="maximal", n=2, snr_db=10.0, M=16)
        a, m = compute_bound(qa), compute_bound(qm)
        return (a.value.value == m.value.value,
                "avg=%.6f max=%.6f" % (a.value.value, m.value.value))

    def ordering():
        vals = {}
        for c in ("average", "maximal", "equal"):
            q = BoundQuery(constraint=c, n=8, snr_db=10.0, rate_bits=1.2)
            vals[c] = compute_bound(q).value.value
        ok = vals["average"] <= vals["maximal"] * (1 + 1e-12) \
            and vals["maximal"] <= vals["equal"] * (1 + 1e-12)
        return ok, "%(average).4e <= %(maximal).4e <= %(equal).4e" % vals

    def saddlepoint_tracks_exact():
        q1 = BoundQuery(constraint="equal", n=100, snr_db=5.0,
                        rate_bits=0.8, method="exact")
        q2 = BoundQuery(constraint="equal", n=100, snr_db=5.0,
                        rate_bits=0.8, method="saddlepoint-full")
        e = compute_bound(q1).value.log_value
        s = compute_bound(q2).value.log_value
        rel = abs(s - e) / abs(e)
        return rel < 0.05, "rel ln err %.4f" % rel

    yield "marcum-anchor", marcum_anchor
    yield "incomplete-beta-anchor", beta_anchor
    yield "psi-anchor", psi_anchor
    yield "cone-half-space", halfspace
    yield "eq16-transform-identity", cone_transform_identity
    yield "capacity-10db", capacity_anchor
    yield "average-fast-path", fast_path_equality
    yield "constraint-ordering", ordering
    yield "saddlepoint-vs-exact", saddlepoint_tracks_exact

    if suite != "full":
        return

    def grad_fd():
        a, b = 1.3, 2.1
        da, db = marcum_q_grad(1, a, b)
        h = 1e-6
        fa = (marcum_q(1, a + h, b).value - marcum_q(1, a - h, b).value) \
            / (2 * h)
        fb = (marcum_q(1, a, b + h).value - marcum_q(1, a, b - h).value) \
            / (2 * h)
        rel = max(abs(da - fa) / abs(fa), abs(db - fb) / abs(fb))
        return rel < 1e-5, "rel %.2e" % rel

    def quartet_anchors():
        cp = cone_packing(2, 16, 10.0).value.value
        mx = compute_bound(BoundQuery(constraint="maximal", n=2,
                                      snr_db=10.0, M=16)).value.value
        c1 = cor1_maximal(2, 16, 10.0).value.value
        ok = abs(cp - 0.38) < 5e-3 and abs(mx - 0.15) < 5e-3 \
            and abs(c1 - 0.08) < 5e-3
        return ok, "cone=%.4f max=%.4f cor1=%.4f" % (cp, mx, c1)

    def threshold_boundary():
        mb = m_bar(2, 10.0, 1.0, 11.0)
        qa = BoundQuery(constraint="average", n=2, snr_db=10.0, M=23)
        qm = BoundQuery(constraint="maximal", n=2, snr_db=10.0, M=23)
        same = compute_bound(qa).value.value == compute_bound(qm).value.value
        qa2 = BoundQuery(constraint="average", n=2, snr_db=10.0, M=24)
        qm2 = BoundQuery(constraint="maximal", n=2, snr_db=10.0, M=24)
        below = compute_bound(qa2).value.value < compute_bound(qm2).value.value
        return (same and below and 22.0 < mb < 24.0,
                "m_bar=%.4f eq@23=%s strict@24=%s" % (mb, same, below))

    def envelope_below_exact():
        from .ht_core import TestParams, f_exact
        ok = True
        worst = 0.0
        for log_beta in (-2.0, -4.0, -8.0):
            env = f_envelope(6, 10.0, 1.0, 11.0, math.exp(log_beta))
            ex = f_exact(TestParams(n=6, gamma=6 * 10.0, sigma2=1.0,
                                    theta2=11.0), math.exp(log_beta))
            gap = env.value.log_value - ex.log_value
            worst = max(worst, gap)
            ok = ok and gap <= 1e-9
        return ok, "max ln gap %.2e" % worst

    def psk_mc_vs_cone():
        con = make_psk(16, 10.0)
        est = ml_error_mc(con, 1.0, 200_000, seed=2026, workers=workers)
        model = phi_n(2, math.pi / 16, 0.1).value
        pull = abs(est.error_prob - model) / max(est.std_error, 1e-12)
        return pull < 5.0, "mc=%.4f model=%.4f pull=%.2f" % (
            est.error_prob, model, pull)

    yield "marcum-grad-fd", grad_fd
    yield "quartet-anchors", quartet_anchors
    yield "average-threshold", threshold_boundary
    yield "envelope-below-exact", envelope_below_exact
    yield "psk-mc-vs-cone", psk_mc_vs_cone


def _cmd_selftest(ap, args) -> int:
    rows = []
    failures = 0
    for name, fn in _selftest_checks(args.suite, args.workers):
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, "%s: %s" % (type(exc).__name__, exc)
        if not ok:
            failures += 1
        rows.append([name, ok, detail])
    cfg = _resolved_config(args, ["suite", "workers"])
    _emit(cfg, ("check", "ok", "detail"), rows, args,
          extra={"failures": failures})
    return 3 if failures else 0


def main(argv=None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    handlers = {
        "bound": _cmd_bound,
        "sweep": _cmd_sweep,
        "envelope": _cmd_envelope,
        "exponent": _cmd_exponent,
        "conepack": _cmd_conepack,
        "simulate": _cmd_simulate,
        "selftest": _cmd_selftest,
    }
    try:
        return handlers[args.command](ap, args)
    except BoundError as exc:
        detail = ""
        if getattr(exc, "details", None):
            parts = []
            for k, v in exc.details.items():
                parts.append("%s=%r" % (k, v))
            detail = " [" + ", ".join(parts) + "]"
        print("awgn-flb: %s: %s%s" % (type(exc).__name__, exc, detail),
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
