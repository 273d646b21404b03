"""Success probability of the block-rank rule, its lower bound and the gamma benchmark.

For a schedule ``c_0 >= c_1 >= ...`` the success probability is a sum of
blocks ``j = 0, 1, ...``; block ``j`` covers arrival times in
``(c_{j+1}, c_j]`` and integrates

    H_j(0) - int_0^y (H_j(x) - H_j(0)) / x dx

over ``y``, where ``H_j(x) = sum_i Pr[X^(i+1) > Y^(j+1)] x^i``.  The double
integral is folded into one integral by swapping the order of integration.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .ranks import PairStructure, exact_rank_beat_prob, p_value
from .schedule import DEFAULT_CONSTANTS, ThresholdSchedule
from .validation import check_non_increasing, check_positive_int, check_unit_interval

QUAD_EPSABS = 1e-10
SMALL_X = 1e-6
SERIES_DEGREE = 200


def f_series(j, x):
    """``F_j(x) = sum_{k=0}^{j} (2 - x)^-(k+1)``, the i.i.d. generating function."""
    if j < 0:
        raise ValueError("j must be non-negative")
    if not (0.0 <= x < 1.0):
        raise ValueError(f"x must lie in [0, 1), got {x}")
    base = 1.0 / (2.0 - x)
    return math.fsum(base ** (k + 1) for k in range(j + 1))


class BeatProbProvider:
    """Coefficients ``coef(i, j) = Pr[X^(i+1) > Y^(j+1)]`` of ``H_j``.

    Subclasses implement :meth:`coef`; the generating function is a power
    series truncated at ``degree``.
    """

    degree = SERIES_DEGREE

    def coef(self, i, j):
        raise NotImplementedError

    @functools.lru_cache(maxsize=None)
    def coefficients(self, j):
        c = np.array([float(self.coef(i, j)) for i in range(self.degree + 1)])
        if (c < 0).any() or (c > 1).any():
            raise ValueError(f"beat probabilities for block {j} must lie in [0, 1]")
        return c

    def h(self, j, x):
        return float(np.polynomial.polynomial.polyval(x, self.coefficients(j)))

    def quotient(self, j, x):
        """``(H_j(x) - H_j(0)) / x``; a 3-term Taylor expansion near 0."""
        c = self.coefficients(j)
        if x < SMALL_X:
            return c[1] + c[2] * x + c[3] * x * x
        return float(np.polynomial.polynomial.polyval(x, c[1:]))


class IIDBeatProbs(BeatProbProvider):
    """No pairs near the top: ``coef(i, j) = p(i+1, j+1)``."""

    def coef(self, i, j):
        return p_value(i + 1, j + 1)

    @functools.lru_cache(maxsize=None)
    def _taylor(self, j):
        return tuple(float(p_value(i + 1, j + 1)) for i in range(4))

    def h(self, j, x):
        return f_series(j, x)

    def quotient(self, j, x):
        if x < SMALL_X:
            _, a1, a2, a3 = self._taylor(j)
            return a1 + a2 * x + a3 * x * x
        return (f_series(j, x) - f_series(j, 0.0)) / x


class InstanceBeatProbs(BeatProbProvider):
    """Coefficients for a fixed pairing of the top ``structure.window`` values.

    Values below that window are taken to sit on distinct cards.
    """

    def __init__(self, structure, degree=SERIES_DEGREE):
        self.structure = structure
        self.degree = degree

    def coef(self, i, j):
        t = i + j + 1
        if t <= self.structure.window:
            window = self.structure.restrict(t)
        else:
            window = PairStructure(t, self.structure.pairs)
        return exact_rank_beat_prob(i + 1, j + 1, window)


class TableBeatProbs(BeatProbProvider):
    """Explicit coefficient table ``table[i][j]``; missing entries fall back to i.i.d."""

    def __init__(self, table, degree=SERIES_DEGREE):
        self.table = {(i, j): float(v) for i, row in enumerate(table) for j, v in enumerate(row)}
        self.degree = degree

    def coef(self, i, j):
        if (i, j) in self.table:
            return self.table[(i, j)]
        return p_value(i + 1, j + 1)


IID = IIDBeatProbs()


def _quad(fn, a, b):
    if b <= a:
        return 0.0
    value, _ = integrate.quad(fn, a, b, epsabs=QUAD_EPSABS, epsrel=1e-12, limit=200)
    return value


def block_success_term(j, lower, upper, provider=IID):
    """Contribution of block ``j`` over arrival times ``(lower, upper]``.

    Uses ``int_l^u int_0^y q = (u - l) int_0^l q + int_l^u q(x) (u - x) dx``
    with ``q(x) = (H_j(x) - H_j(0)) / x``.
    """
    lower = check_unit_interval(lower, "lower")
    upper = check_unit_interval(upper, "upper")
    if lower > upper:
        raise ValueError("lower must not exceed upper")
    if lower == upper:
        return 0.0
    q = functools.partial(provider.quotient, j)
    width = upper - lower
    inner = width * _quad(q, 0.0, lower) + _quad(lambda x: q(x) * (upper - x), lower, upper)
    return width * provider.h(j, 0.0) - inner


def limit_tail(c):
    """``int_0^c (1 + log(1 - y)) dy = -(1 - c) log(1 - c)``: blocks deep in the schedule."""
    if c >= 1.0:
        return 0.0
    return -(1.0 - c) * math.log1p(-c)


@dataclass(frozen=True)
class BoundBreakdown:
    blocks: tuple
    tail: float
    total: float
    thresholds: tuple

    @property
    def per_block(self):
        return self.blocks + (self.tail,)

    def to_dict(self, digits=12):
        r = lambda v: float(f"{v:.{digits}g}")  # noqa: E731
        return {
            "blocks": [r(b) for b in self.blocks],
            "tail": r(self.tail),
            "total": r(self.total),
            "thresholds": [r(c) for c in self.thresholds],
        }


def schedule_success(schedule, provider=IID):
    """Block sum for a finite schedule (zero tail) or a constant positive tail.

    A positive tail contributes the closed-form limit of the blocks below it.
    """
    values = schedule.values
    edges = list(values) + [schedule.tail]
    blocks = tuple(block_success_term(j, edges[j + 1], edges[j], provider) for j in range(len(values)))
    tail = limit_tail(schedule.tail) if schedule.tail > 0 else 0.0
    return BoundBreakdown(blocks, tail, math.fsum(blocks) + tail, tuple(values) + (schedule.tail,))


def paper_bound(c1=DEFAULT_CONSTANTS[0], c2=DEFAULT_CONSTANTS[1], c3=DEFAULT_CONSTANTS[2]):
    """Blocks ``j = 0, 1, 2`` for ``c_0 = 1`` and the closed-form tail for ``c_3 = c_4 = ...``."""
    check_non_increasing((1.0, c1, c2, c3), "constants")
    if c3 <= 0.0:
        raise ValueError("c3 must be positive")
    return schedule_success(ThresholdSchedule.from_constants(c1, c2, c3), IID)


def grid_search_constants(c1_grid, c2_grid, c3_grid):
    """Best ``paper_bound`` total over a grid of monotone constant triples."""
    best = None
    for c1 in c1_grid:
        for c2 in c2_grid:
            for c3 in c3_grid:
                if not (1.0 >= c1 >= c2 >= c3 > 0.0):
                    continue
                total = paper_bound(c1, c2, c3).total
                if best is None or total > best[3]:
                    best = (c1, c2, c3, total)
    return best


# --- optimal thresholds ------------------------------------------------------


def _threshold_integrand(m, x):
    if x < SMALL_X:
        return m + m * (m + 1) / 2 * x + m * (m + 1) * (m + 2) / 6 * x * x
    return math.expm1(-m * math.log1p(-x)) / x


def threshold_integral(c, j):
    """``int_0^c ((1 - x)^-(j+1) - 1) / x dx`` by adaptive quadrature."""
    m = j + 1
    return _quad(functools.partial(_threshold_integrand, m), 0.0, c)


@functools.lru_cache(maxsize=None)
def solve_optimal_threshold(j):
    """Root in (0, 1) of ``threshold_integral(c, j) = 1`` (bisection, xtol 1e-10).

    The integrand is at least ``j + 1``, so the root lies below ``1 / (j + 1)``.
    """
    j = check_positive_int(j, "j", minimum=0)
    m = j + 1
    hi = 1.0 - 1e-6 if m == 1 else 1.0 / m
    return optimize.bisect(lambda c: threshold_integral(c, j) - 1.0, 0.0, hi, xtol=1e-10, rtol=4 * np.finfo(float).eps)


def optimal_block_thresholds(n_blocks):
    """Block-rank times ``c_j = min(1, 2 r_j)`` for ``j < n_blocks``, ``r_j`` the roots above.

    The roots are stated on a time axis shared by both sides of every card;
    the block-rank clock runs over the face-down side only, which doubles it.
    """
    n_blocks = check_positive_int(n_blocks, "n_blocks")
    return tuple(min(1.0, 2.0 * solve_optimal_threshold(j)) for j in range(n_blocks))


def optimal_schedule(j_max):
    """Optimal schedule ``c_0..c_{j_max}``, zero afterwards."""
    return ThresholdSchedule(optimal_block_thresholds(j_max + 1))


@dataclass(frozen=True)
class GammaEstimate:
    value: float
    tail_bound: float
    blocks: tuple = field(repr=False)
    thresholds: tuple = field(repr=False)

    def to_dict(self, digits=12):
        r = lambda v: float(f"{v:.{digits}g}")  # noqa: E731
        return {
            "j_max": len(self.blocks) - 1,
            "gamma": r(self.value),
            "tail_bound": r(self.tail_bound),
            "blocks": [r(b) for b in self.blocks],
            "thresholds": [r(c) for c in self.thresholds],
        }


def gamma(j_max=60):
    """Success of the optimally tuned block-rank rule on i.i.d. cards.

    Blocks ``0..j_max`` are integrated with the optimal thresholds; the blocks
    below ``c_{j_max+1}`` are closed with their limiting kernel
    ``1 + log(1 - y)``.  ``tail_bound = c_{j_max+1}`` bounds what those
    remaining blocks can contribute.
    """
    j_max = check_positive_int(j_max, "j_max", minimum=0)
    c = optimal_block_thresholds(j_max + 2)
    blocks = tuple(block_success_term(j, c[j + 1], c[j], IID) for j in range(j_max + 1))
    value = math.fsum(blocks) + limit_tail(c[j_max + 1])
    return GammaEstimate(value, c[j_max + 1], blocks, c)


def truncated_gamma(k):
    """Success with the optimal ``c_0..c_k`` and ``c_{k+1} = c_{k+2} = ... = 0``."""
    k = check_positive_int(k, "k", minimum=0)
    c = optimal_block_thresholds(k + 1) + (0.0,)
    return math.fsum(block_success_term(j, c[j + 1], c[j], IID) for j in range(k + 1))
