"""Closed-form delivery times, stability regions and their vertices.

Expected delivery times are sums over stages: with ``k`` senders still
unserved, a stage ends at the first slot that serves one of them, so its
length is geometric and the expectation is the reciprocal of the per-slot
success probability.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import Diverges, InvalidProbability, InvalidRate, NotAchievable

_TOL = 1e-12


def _check_n(n: int) -> int:
    if int(n) != n or n < 1:
        raise ValueError(f"number of senders must be a positive integer, got {n}")
    return int(n)


def _check_p(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise InvalidProbability(f"erasure probability {p} outside [0, 1]")
    return float(p)


def _check_q(q: float) -> float:
    if not 0.0 < q <= 1.0:
        raise InvalidProbability(f"access probability {q} outside (0, 1]")
    return float(q)


def _cap(C) -> int | None:
    if C is None or (isinstance(C, float) and math.isinf(C)):
        return None
    if int(C) != C or C < 1:
        raise ValueError(f"contention cap must be a positive integer or unbounded, got {C}")
    return int(C)


def _stage_sum(probs) -> float:
    total = []
    for k, pk in probs:
        if pk <= 0.0:
            raise Diverges(f"stage with {k} unserved senders never succeeds")
        total.append(1.0 / pk)
    return math.fsum(total)


def et_centralized(n: int, p: float) -> float:
    n, p = _check_n(n), _check_p(p)
    if p >= 1.0:
        raise Diverges("every transmission is erased")
    return n / (1.0 - p)


def stage_success_ra(k: int, q_e: float, C: int | None) -> float:
    """Probability that between 1 and ``C`` of ``k`` contenders get through."""
    if C is None or C >= k:
        return -math.expm1(k * math.log1p(-q_e)) if q_e < 1.0 else 1.0
    return math.fsum(math.comb(k, m) * q_e**m * (1.0 - q_e) ** (k - m) for m in range(1, C + 1))


def et_random_access(n: int, p: float, q: float) -> float:
    n, p, q = _check_n(n), _check_p(p), _check_q(q)
    qe = q * (1.0 - p)
    return _stage_sum((k, k * qe * (1.0 - qe) ** (k - 1)) for k in range(1, n + 1))


def et_zigzag(n: int, p: float) -> float:
    n, p = _check_n(n), _check_p(p)
    if p >= 1.0:
        raise Diverges("every transmission is erased")
    return _stage_sum((k, -math.expm1(k * math.log(p)) if p > 0 else 1.0) for k in range(1, n + 1))


def et_zigzag_excess(n: int, p: float) -> float:
    """``et_zigzag(n, p) - n`` summed without cancellation."""
    n, p = _check_n(n), _check_p(p)
    if p >= 1.0:
        raise Diverges("every transmission is erased")
    if p == 0.0:
        return 0.0
    return math.fsum(p**k / (1.0 - p**k) for k in range(1, n + 1) if p**k > 0.0)


def zigzag_gap_bound(p: float) -> float:
    """Upper bound on ``et_zigzag(n, p) - n`` valid for every ``n``."""
    p = _check_p(p)
    if p >= 1.0:
        raise Diverges("every transmission is erased")
    return p / (1.0 - p) ** 2


def et_zigzag_ra(n: int, p: float, q: float, C=None) -> float:
    """Random access with collision recovery of up to ``C`` packets (``None``: no cap)."""
    n, p, q, C = _check_n(n), _check_p(p), _check_q(q), _cap(C)
    qe = q * (1.0 - p)
    return _stage_sum((k, stage_success_ra(k, qe, C)) for k in range(1, n + 1))


def multi_receiver_bound(in_degree: int, p: float) -> float:
    """Upper bound on one receiver's expected delivery time with ``in_degree`` neighbours."""
    return et_zigzag(in_degree, p)


def _objective(n, p, C):
    def f(q):
        try:
            return et_zigzag_ra(n, p, q, C)
        except Diverges:
            return math.inf
    return f


def optimal_q(n: int, p: float, C=None, step: float = 1e-3) -> float:
    """Access probability minimising ``et_zigzag_ra``.

    Without a binding cap (``C`` unbounded or ``C >= n``) every stage's
    success probability grows with ``q``, so the answer is 1. Otherwise a
    grid search with spacing ``step`` is refined by ternary search between
    the neighbours of the best grid point.
    """
    n, p, C = _check_n(n), _check_p(p), _cap(C)
    if C is None or C >= n:
        return 1.0
    f = _objective(n, p, C)
    m = int(round(1.0 / step))
    grid = [i / m for i in range(1, m + 1)]
    vals = [f(q) for q in grid]
    b = min(range(m), key=lambda i: vals[i])
    if math.isinf(vals[b]):
        return 1.0
    lo = grid[b - 1] if b > 0 else grid[0] / 2
    hi = grid[b + 1] if b + 1 < m else 1.0
    for _ in range(100):
        a, c = lo + (hi - lo) / 3, hi - (hi - lo) / 3
        if f(a) <= f(c):
            hi = c
        else:
            lo = a
    qs = (lo + hi) / 2
    return qs if f(qs) <= vals[b] else grid[b]


# stability regions -----------------------------------------------------------

REGION_KINDS = ("centralized_simplex", "mac_polymatroid", "cutset_intersection")


@dataclass(frozen=True)
class RegionSpec:
    """A rate region; ``p_links`` optionally gives per-link erasure probabilities."""

    kind: str
    p: float = 0.0
    topology: object = None
    p_links: Mapping[tuple[int, int], float] | None = None

    def __post_init__(self):
        if self.kind not in REGION_KINDS:
            raise ValueError(f"unknown region kind {self.kind!r}")
        if not 0.0 <= self.p < 1.0:
            raise InvalidProbability(f"erasure probability {self.p} outside [0, 1)")
        if self.kind == "cutset_intersection" and self.topology is None:
            raise ValueError("cut-set region needs a topology")


def _le(s: float, bound: float, inclusive: bool) -> bool:
    return s <= bound + _TOL if inclusive else s < bound - _TOL


def _mac_symmetric(lam: Sequence[float], p: float, inclusive: bool) -> bool:
    acc = 0.0
    for k, v in enumerate(sorted(lam, reverse=True), start=1):
        acc += v
        if not _le(acc, 1.0 - p**k, inclusive):
            return False
    return True


def _mac_enumerate(lam: Sequence[float], ps: Sequence[float], inclusive: bool) -> bool:
    n = len(lam)
    if n > 20:
        raise ValueError("subset enumeration is limited to 20 senders")
    for r in range(1, n + 1):
        for S in itertools.combinations(range(n), r):
            if not _le(math.fsum(lam[i] for i in S), 1.0 - math.prod(ps[i] for i in S), inclusive):
                return False
    return True


def mac_contains_enumerated(lam: Sequence[float], p: float, inclusive: bool = False) -> bool:
    """Single-receiver region by explicit enumeration of every sender subset."""
    return _mac_enumerate(list(lam), [p] * len(lam), inclusive)


def region_contains(region: RegionSpec, lam: Sequence[float], inclusive: bool = False) -> bool:
    """Membership of the rate vector ``lam``.

    Constraints are strict by default; ``inclusive=True`` tests the closure
    (non-strict inequalities).
    """
    lam = [float(v) for v in lam]
    if any(v < 0 or math.isnan(v) for v in lam):
        raise InvalidRate(f"rates must be nonnegative, got {lam}")
    p = region.p
    if region.kind == "centralized_simplex":
        return _le(math.fsum(lam), 1.0 - p, inclusive)
    if region.kind == "mac_polymatroid":
        if region.p_links:
            ps = [region.p_links.get((i, 0), p) for i in range(len(lam))]
            return _mac_enumerate(lam, ps, inclusive)
        return _mac_symmetric(lam, p, inclusive)
    topo = region.topology
    if len(lam) != topo.n_senders:
        raise InvalidRate(f"expected {topo.n_senders} rates, got {len(lam)}")
    for j in range(topo.n_receivers):
        nb = topo.in_neighbors(j)
        sub = [lam[i] for i in nb]
        if region.p_links:
            ok = _mac_enumerate(sub, [region.p_links.get((i, j), p) for i in nb], inclusive)
        else:
            ok = _mac_symmetric(sub, p, inclusive)
        if not ok:
            return False
    return True


def vertex_rates(order: Sequence[int], p: float) -> list[float]:
    """Rates of the dominant-face vertex for priority ``order`` (highest first)."""
    order = list(order)
    if sorted(order) != list(range(len(order))):
        raise ValueError(f"{order} is not a permutation")
    p = _check_p(p)
    lam = [0.0] * len(order)
    for rank_, i in enumerate(order):
        lam[i] = (1.0 - p) * p**rank_
    return lam


def _topk(x, k):
    return sum(sorted(x, reverse=True)[:k], Fraction(0))


def _lift_to_face(x: list, f: list) -> list:
    """Raise coordinates one at a time as far as the region allows (exact)."""
    n = len(x)
    x = list(x)
    for i in range(n):
        others = sorted((x[j] for j in range(n) if j != i), reverse=True)
        acc, slack = x[i], None
        for k in range(1, n + 1):
            room = f[k] - acc
            slack = room if slack is None or room < slack else slack
            if k - 1 < len(others):
                acc += others[k - 1]
        if slack > 0:
            x[i] += slack
    return x


def _first_hit(x: list, step: list, k: int, bound, hi):
    """Smallest mu in [0, hi] where the k largest entries of x + mu*step sum to ``bound``.

    The top-k sum is convex and piecewise linear in mu, so Newton steps from
    the right along its linear pieces land on the first crossing exactly.
    """
    n = len(x)

    def top_set(mu):
        vals = [x[i] + mu * step[i] for i in range(n)]
        return sorted(range(n), key=lambda i: (-vals[i], -step[i], i))[:k], vals

    S, vals = top_set(hi)
    if sum((vals[i] for i in S), Fraction(0)) <= bound:
        return hi
    mu = hi
    while True:
        base = sum((x[i] for i in S), Fraction(0))
        slope = sum((step[i] for i in S), Fraction(0))
        nxt = (bound - base) / slope  # slope > 0 since the line crosses upward
        S2, vals = top_set(nxt)
        if sum((vals[i] for i in S2), Fraction(0)) <= bound or nxt == mu:
            return nxt
        S, mu = S2, nxt


def _order(x) -> tuple[int, ...]:
    return tuple(sorted(range(len(x)), key=lambda i: (-x[i], i)))


def decompose_rates(lam: Sequence[float], p: float) -> list[tuple[tuple[int, ...], float]]:
    """Priority orders and time fractions whose mix of vertices dominates ``lam``.

    The demand is first raised onto the dominant face. Then, repeatedly, the
    vertex ``v`` of the order that sorts the current point ``x`` by
    decreasing rate is peeled off: ``x`` is pushed away from ``v`` along
    ``x - v`` until another constraint becomes tight, and ``x`` is written as
    a convex mix of ``v`` and that new point. Tight sets stay tight, so at
    most ``n`` vertices are used. Arithmetic is exact (rationals) because
    tail vertex rates ``(1-p) p**k`` quickly drop below float resolution.
    """
    lam = [float(v) for v in lam]
    if any(v < 0 for v in lam):
        raise InvalidRate(f"rates must be nonnegative, got {lam}")
    p = _check_p(p)
    if p >= 1.0 or not _mac_symmetric(lam, p, inclusive=True):
        raise NotAchievable(f"rates {lam} lie outside the stability region for p={p}")
    n = len(lam)
    if max(lam, default=0.0) <= 0.0:
        return []
    P = Fraction(p)
    f = [1 - P**k for k in range(n + 1)]
    x = [Fraction(v) for v in lam]
    # pull points within the float tolerance back inside the closed region
    shrink = min([Fraction(1)] + [f[k] / _topk(x, k) for k in range(1, n + 1) if _topk(x, k) > f[k]])
    x = _lift_to_face([v * shrink for v in x], f)
    out: dict[tuple[int, ...], Fraction] = {}
    mass = Fraction(1)
    for _ in range(n):
        order = _order(x)
        v = [Fraction(0)] * n
        for r, i in enumerate(order):
            v[i] = (1 - P) * P**r
        if x == v:
            out[order] = out.get(order, 0) + mass
            break
        step = [a - b for a, b in zip(x, v)]
        mu = min(x[i] / -step[i] for i in range(n) if step[i] < 0)
        for k in range(1, n):
            mu = _first_hit(x, step, k, f[k], mu)
        a = mu / (1 + mu)
        out[order] = out.get(order, 0) + mass * a
        mass *= 1 - a
        x = [xi + mu * si for xi, si in zip(x, step)]
    else:
        order = _order(x)
        out[order] = out.get(order, 0) + mass
    # weights this small only absorb float rounding of the input
    return [(o, float(w)) for o, w in out.items() if w > 1e-12]
