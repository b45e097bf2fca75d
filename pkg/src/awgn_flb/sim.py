"""Monte-Carlo maximum-likelihood decoding of two-dimensional constellations.

This module provides the simulation side of the package: constellation
containers with power-constraint checking, a vectorized ML-decoding error
estimator driven by counter-based random streams, and a small stochastic
search over amplitude/phase-shift-keyed (APSK) families.  Estimates from
here are compared against the converse bounds in :mod:`awgn_flb.bounds`;
the bounds must always sit at or below the simulated error of any code
satisfying the same power constraint.

Power accounting follows the rest of the package: a constellation for the
two-dimensional channel at signal-to-noise ratio ``upsilon`` (per-dimension
noise variance ``sigma2``) has power budget ``n * upsilon * sigma2`` with
``n = 2``, i.e. ``|c|^2 <= 2 * upsilon * sigma2`` under the maximal
constraint.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ConstraintViolation, InvalidParams

__all__ = [
    "Constellation",
    "McEstimate",
    "make_psk",
    "make_apsk",
    "ml_error_mc",
    "apsk_search",
]

_CONSTRAINTS = ("equal", "maximal", "average")

# Slack for the power-constraint checks.  Scaled by the budget so that
# constellations built from exact arithmetic pass and genuinely violating
# ones do not.
_POWER_TOL = 1e-12

# Cap on the number of entries of the trial-by-codeword score matrix held
# at once; keeps the decoder below ~64 MB regardless of M.
_CHUNK_ENTRIES = 8_000_000

# Trials are always pre-split into this many logical substreams, regardless
# of how many OS workers execute them; estimates therefore do not depend on
# the parallelism level.
_N_SHARDS = 64


@dataclass(frozen=True)
class Constellation:
    """A block code of two-dimensional points under a power constraint.

    points: real array of shape (M, 2), one codeword per row.
    constraint_kind: "equal", "maximal" or "average".
    power_budget: the per-codeword energy cap (2 * upsilon * sigma2 for the
        two-dimensional channel); under "average" it caps the mean energy
        instead.
    """

    points: np.ndarray
    constraint_kind: str
    power_budget: float

    def __post_init__(self):
        if self.constraint_kind not in _CONSTRAINTS:
            raise InvalidParams(
                "constraint_kind must be one of %r" % (_CONSTRAINTS,),
                constraint_kind=self.constraint_kind,
            )
        budget = float(self.power_budget)
        if not (budget > 0.0 and math.isfinite(budget)):
            raise InvalidParams("power_budget must be positive and finite",
                                power_budget=self.power_budget)
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
            raise InvalidParams("points must have shape (M, 2) with M >= 1",
                                shape=getattr(pts, "shape", None))
        if not np.all(np.isfinite(pts)):
            bad = int(np.flatnonzero(~np.isfinite(pts).all(axis=1))[0])
            raise InvalidParams("codeword coordinates must be finite",
                                index=bad)
        pts = pts.copy()
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "power_budget", budget)
        self._check_power()

    def _check_power(self):
        energy = np.einsum("ij,ij->i", self.points, self.points)
        budget = self.power_budget
        tol = _POWER_TOL * max(1.0, budget)
        if self.constraint_kind == "equal":
            off = np.flatnonzero(np.abs(energy - budget) > tol)
            if off.size:
                i = int(off[0])
                raise ConstraintViolation(
                    "equal-power constraint violated: |c|^2 != budget",
                    index=i, energy=float(energy[i]), budget=budget)
        elif self.constraint_kind == "maximal":
            off = np.flatnonzero(energy > budget + tol)
            if off.size:
                i = int(off[0])
                raise ConstraintViolation(
                    "maximal-power constraint violated: |c|^2 > budget",
                    index=i, energy=float(energy[i]), budget=budget)
        else:
            mean = float(energy.mean())
            if mean > budget + tol:
                i = int(np.argmax(energy))
                raise ConstraintViolation(
                    "average-power constraint violated: mean |c|^2 > budget",
                    index=i, mean_energy=mean, budget=budget)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def to_text(self) -> str:
        """Serialize as plain text: header comments, then one "x y" per line."""
        lines = [
            "# constellation",
            "# constraint_kind: %s" % self.constraint_kind,
            "# power_budget: %.17g" % self.power_budget,
            "# points: %d" % self.size,
        ]
        for x, y in self.points:
            lines.append("%.17g %.17g" % (x, y))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Constellation":
        """Parse the format produced by :meth:`to_text`."""
        kind = None
        budget = None
        rows = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("constraint_kind:"):
                    kind = body.split(":", 1)[1].strip()
                elif body.startswith("power_budget:"):
                    budget = float(body.split(":", 1)[1])
                continue
            parts = line.split()
            if len(parts) != 2:
                raise InvalidParams("expected 'x y' per data line", line=raw)
            rows.append((float(parts[0]), float(parts[1])))
        if kind is None or budget is None or not rows:
            raise InvalidParams(
                "constellation text needs constraint_kind, power_budget "
                "and at least one point")
        return cls(points=np.array(rows), constraint_kind=kind,
                   power_budget=budget)


@dataclass(frozen=True)
class McEstimate:
    """Monte-Carlo error estimate with its binomial standard error."""

    error_prob: float
    std_error: float
    trials: int
    seed: int


def make_psk(M: int, upsilon: float, sigma2: float = 1.0) -> Constellation:
    """Uniform phase-shift keying on the circle of energy 2*upsilon*sigma2.

    Satisfies the equal-power constraint (hence also maximal and average).
    """
    if not (isinstance(M, (int, np.integer)) and M >= 2):
        raise InvalidParams("M must be an integer >= 2", M=M)
    if not (upsilon > 0.0 and sigma2 > 0.0):
        raise InvalidParams("upsilon and sigma2 must be positive",
                            upsilon=upsilon, sigma2=sigma2)
    budget = 2.0 * upsilon * sigma2
    r = math.sqrt(budget)
    ang = 2.0 * math.pi * np.arange(M) / M
    pts = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
    # pin the energies exactly onto the budget so the equal-power check is
    # immune to cos/sin rounding
    norm = np.sqrt(np.einsum("ij,ij->i", pts, pts))
    pts *= r / norm[:, None]
    return Constellation(points=pts, constraint_kind="equal",
                         power_budget=budget)


def make_apsk(rings: Sequence[Tuple[int, float, float]], upsilon: float,
              constraint_kind: str = "maximal", origin_count: int = 0,
              sigma2: float = 1.0) -> Constellation:
    """Amplitude/phase-shift keying from an explicit ring specification.

    rings: sequence of (count, radius, phase) triples; each ring places
        `count` points uniformly spaced starting at angle `phase`.
    origin_count: number of codewords placed exactly at the origin; they
        occupy the lowest indices, so the decoder's lowest-index tie rule
        makes at most one of them decodable.
    The power budget is 2*upsilon*sigma2; radii are taken as given and the
    resulting point set is validated against `constraint_kind`.
    """
    if not (upsilon > 0.0 and sigma2 > 0.0):
        raise InvalidParams("upsilon and sigma2 must be positive",
                            upsilon=upsilon, sigma2=sigma2)
    if not (isinstance(origin_count, (int, np.integer)) and origin_count >= 0):
        raise InvalidParams("origin_count must be a nonnegative integer",
                            origin_count=origin_count)
    spec = list(rings)
    total = int(origin_count)
    for count, radius, _phase in spec:
        if not (isinstance(count, (int, np.integer)) and count >= 1):
            raise InvalidParams("ring counts must be positive integers",
                                count=count)
        if not (radius >= 0.0 and math.isfinite(radius)):
            raise InvalidParams("ring radii must be finite and nonnegative",
                                radius=radius)
        total += int(count)
    if total < 2:
        raise InvalidParams("constellation needs at least 2 points",
                            size=total)
    blocks = [np.zeros((int(origin_count), 2))] if origin_count else []
    for count, radius, phase in spec:
        ang = phase + 2.0 * math.pi * np.arange(int(count)) / int(count)
        blocks.append(np.column_stack([radius * np.cos(ang),
                                       radius * np.sin(ang)]))
    pts = np.vstack(blocks)
    return Constellation(points=pts, constraint_kind=constraint_kind,
                         power_budget=2.0 * upsilon * sigma2)


def _mc_chunk_size(M: int) -> int:
    return max(10_000, _CHUNK_ENTRIES // max(M, 1))


def _mc_worker(points: np.ndarray, sigma2: float, trials: int, seed: int,
               worker: int) -> int:
    """Count ML-decoding errors for one logical shard of the trials.

    Each shard owns an independent counter-based substream, so the merged
    count depends only on (seed, per-shard trial counts), not on execution
    order or on how shards are assigned to OS workers.
    """
    M = points.shape[0]
    rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence(seed, spawn_key=(worker,))))
    sigma = math.sqrt(sigma2)
    # ML decoding for equiprobable messages is nearest-codeword decoding;
    # |y - c|^2 is minimized by maximizing y.c - |c|^2/2, so the |y|^2 term
    # is dropped.  Duplicate codewords produce bit-identical score columns
    # and argmin resolves ties to the lowest index.
    score_off = 0.5 * np.einsum("ij,ij->i", points, points)
    chunk = _mc_chunk_size(M)
    errors = 0
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        msg = rng.integers(0, M, size=m)
        y = points[msg] + sigma * rng.standard_normal((m, 2))
        dec = np.argmin(score_off[None, :] - y @ points.T, axis=1)
        errors += int(np.count_nonzero(dec != msg))
        done += m
    return errors


def _mc_worker_star(args):
    return _mc_worker(*args)


def ml_error_mc(constellation: Constellation, sigma2: float, trials: int,
                seed: int, workers: int = 1) -> McEstimate:
    """Estimate the ML block-error probability over the AWGN channel.

    Messages are equiprobable; the channel adds i.i.d. Gaussian noise of
    variance `sigma2` per dimension.  The estimate is a deterministic
    function of (seed, trials): trials are pre-split into a fixed set of
    logical shards, each drawing from its own Philox substream, and the
    integer error counts are merged order-independently.  `workers` only
    sets how many processes execute the shards, never the result.
    """
    if not isinstance(constellation, Constellation):
        raise InvalidParams("constellation must be a Constellation instance")
    if not (sigma2 > 0.0 and math.isfinite(sigma2)):
        raise InvalidParams("sigma2 must be positive and finite",
                            sigma2=sigma2)
    if not (isinstance(trials, (int, np.integer)) and trials >= 10_000):
        raise InvalidParams("trials must be an integer >= 10000",
                            trials=trials)
    if not (isinstance(seed, (int, np.integer)) and seed >= 0):
        raise InvalidParams("seed must be a nonnegative integer", seed=seed)
    if not (isinstance(workers, (int, np.integer)) and workers >= 1):
        raise InvalidParams("workers must be a positive integer",
                            workers=workers)
    trials = int(trials)
    workers = int(workers)
    seed = int(seed)
    base, extra = divmod(trials, _N_SHARDS)
    shares = [(base + 1 if s < extra else base) for s in range(_N_SHARDS)]
    jobs = [(constellation.points, float(sigma2), shares[s], seed, s)
            for s in range(_N_SHARDS) if shares[s] > 0]
    if workers == 1 or len(jobs) <= 1:
        errors = sum(_mc_worker(*job) for job in jobs)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            errors = sum(pool.map(_mc_worker_star, jobs, chunksize=4))
    p_hat = errors / trials
    se = math.sqrt(p_hat * (1.0 - p_hat) / trials)
    return McEstimate(error_prob=p_hat, std_error=se, trials=trials,
                      seed=seed)


# ----------------------------------------------------------------------
# stochastic search over APSK families


def _ring_energy(state) -> float:
    k, rings = state
    return sum(c * r * r for c, r, _p in rings)


def _normalize(state, constraint_kind: str, budget: float):
    """Rescale radii so the state uses its power budget exactly."""
    k, rings = state
    if not rings:
        return state
    if constraint_kind == "average":
        e = _ring_energy(state)
        if e <= 0.0:
            return state
        M = k + sum(c for c, _r, _p in rings)
        scale = math.sqrt(budget * M / e)
    else:
        rmax = max(r for _c, r, _p in rings)
        if rmax <= 0.0:
            return state
        scale = math.sqrt(budget) / rmax
    return (k, [(c, r * scale, p) for c, r, p in rings])


def _state_to_constellation(state, upsilon: float, constraint_kind: str,
                            sigma2: float) -> Constellation:
    k, rings = state
    return make_apsk(rings, upsilon, constraint_kind=constraint_kind,
                     origin_count=k, sigma2=sigma2)


def _seed_states(M: int, upsilon: float, constraint_kind: str,
                 sigma2: float):
    """Deterministic starting candidates for the APSK search.

    Always includes uniform PSK; under maximal/average also (M-1)-PSK plus
    an origin point, and staggered hexagonal-shell layouts (rings of 6j
    points at radius proportional to j) padded with origin codewords.  The
    hexagonal family with a large origin cluster is what lets
    average-constrained codes at large M undercut the maximal-power bound.
    """
    r0 = math.sqrt(2.0 * upsilon * sigma2)
    states = [(0, [(M, r0, 0.0)])]
    if constraint_kind == "equal":
        return states
    states.append((1, [(M - 1, r0, 0.0)]))
    if M >= 8:
        max_shells = 1
        while 3 * max_shells * (max_shells + 1) <= M - 1:
            max_shells += 1
        for nshell in range(1, max_shells + 1):
            rings = [(6 * j, float(j), 0.25 * math.pi * j)
                     for j in range(1, nshell + 1)]
            k = M - sum(c for c, _r, _p in rings)
            if k < 0:
                continue
            states.append((k, rings))
        # a couple of origin-heavy single-ring layouts
        for frac in (0.25, 0.5):
            k = int(round(frac * M))
            if 1 <= k <= M - 2:
                states.append((k, [(M - k, r0, 0.0)]))
    out = []
    seen = set()
    for st in states:
        st = _normalize(st, constraint_kind, 2.0 * upsilon * sigma2)
        key = (st[0], tuple((c, round(r, 12), round(p, 12))
                            for c, r, p in st[1]))
        if key not in seen:
            seen.add(key)
            out.append(st)
    return out


def _perturb(state, rng: np.random.Generator, scale: float,
             constraint_kind: str):
    """One random move: jitter radii within +-5%, phases within +-5 degrees
    (both shrunk by `scale`), and occasionally shift a point between rings
    or to/from the origin cluster."""
    k, rings = state
    rings = [list(r) for r in rings]
    for r in rings:
        r[1] *= 1.0 + 0.05 * scale * float(rng.uniform(-1.0, 1.0))
        r[2] += (math.pi / 36.0) * scale * float(rng.uniform(-1.0, 1.0))
    if constraint_kind != "equal" and rng.random() < 0.4:
        move = int(rng.integers(0, 3))
        if move == 0 and rings:
            i = int(rng.integers(0, len(rings)))
            if rings[i][0] > 1:
                rings[i][0] -= 1
                k += 1
        elif move == 1 and k > 0 and rings:
            i = int(rng.integers(0, len(rings)))
            rings[i][0] += 1
            k -= 1
        elif move == 2 and len(rings) >= 2:
            i = int(rng.integers(0, len(rings)))
            j = int(rng.integers(0, len(rings)))
            if i != j and rings[i][0] > 1:
                rings[i][0] -= 1
                rings[j][0] += 1
    rings = [tuple(r) for r in rings if r[0] >= 1]
    return (k, rings)


def apsk_search(M: int, upsilon: float, sigma2: float, constraint_kind: str,
                budget: int, seed: int, trials: int = 50_000,
                final_trials: int = 1_000_000,
                workers: int = 1) -> Tuple[Constellation, McEstimate]:
    """Search APSK layouts for a low ML error probability.

    Runs a simple accept-if-better random search from a fixed set of
    starting layouts, spending `budget` Monte-Carlo evaluations of `trials`
    transmissions each.  All candidates share common random numbers (one
    fixed evaluation substream), so comparisons are fair; the returned
    estimate re-evaluates the winner on a fresh substream with
    `final_trials` transmissions to remove the selection bias.

    Returns (best constellation, its final estimate).  The constellation
    always satisfies `constraint_kind` at power budget 2*upsilon*sigma2.
    """
    if not (isinstance(M, (int, np.integer)) and M >= 2):
        raise InvalidParams("M must be an integer >= 2", M=M)
    if constraint_kind not in _CONSTRAINTS:
        raise InvalidParams("constraint_kind must be one of %r"
                            % (_CONSTRAINTS,), constraint_kind=constraint_kind)
    if not (isinstance(budget, (int, np.integer)) and budget >= 1):
        raise InvalidParams("budget must be a positive integer (number of "
                            "Monte-Carlo evaluations)", budget=budget)
    if not (upsilon > 0.0 and sigma2 > 0.0):
        raise InvalidParams("upsilon and sigma2 must be positive",
                            upsilon=upsilon, sigma2=sigma2)
    M = int(M)
    budget = int(budget)
    power = 2.0 * upsilon * sigma2
    # distinct substreams: perturbation draws, common-random-number
    # evaluations, and the final unbiased re-evaluation
    move_rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence(seed, spawn_key=(101,))))
    eval_seed = int(np.random.SeedSequence(seed, spawn_key=(102,))
                    .generate_state(1)[0])
    final_seed = int(np.random.SeedSequence(seed, spawn_key=(103,))
                     .generate_state(1)[0])

    def evaluate(state):
        c = _state_to_constellation(state, upsilon, constraint_kind, sigma2)
        est = ml_error_mc(c, sigma2, trials, eval_seed, workers=workers)
        return c, est

    best_state = None
    best_c = None
    best_err = math.inf
    used = 0
    for st in _seed_states(M, upsilon, constraint_kind, sigma2):
        if used >= budget:
            break
        try:
            c, est = evaluate(st)
        except ConstraintViolation:
            continue
        used += 1
        if est.error_prob < best_err:
            best_state, best_c, best_err = st, c, est.error_prob
    if best_state is None:
        raise InvalidParams("no feasible starting layout", M=M,
                            constraint_kind=constraint_kind)
    scale = 1.0
    while used < budget:
        cand = _perturb(best_state, move_rng, scale, constraint_kind)
        cand = _normalize(cand, constraint_kind, power)
        try:
            c, est = evaluate(cand)
        except (ConstraintViolation, InvalidParams):
            scale *= 0.97
            continue
        used += 1
        if est.error_prob < best_err:
            best_state, best_c, best_err = cand, c, est.error_prob
        scale *= 0.97
    final = ml_error_mc(best_c, sigma2, max(int(final_trials), 10_000),
                        final_seed, workers=workers)
    return best_c, final
