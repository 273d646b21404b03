"""The single-sample last success problem.

Bits ``X_1..X_n`` arrive one at a time; a sample ``Y_i`` with the same law is
known for every index.  We condition on no index having ``X_i = Y_i = 1``.
At the k-th one among the X's the rule sees ``(a, b)``: ``a`` counts ones
among the X's up to and including the current one plus ones among the
earlier Y's, and ``b`` counts ones among the later Y's.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .model import GoogolInstance, Orientation, RandomnessSpec
from .simulation import BernoulliHard
from .stats import EstimateReport
from .validation import UndefinedRatio, check_pmf, check_positive_int, check_unit_interval

# 2^-b weights beyond this many trailing sample ones are far below 1e-17
B_MAX = 96


@dataclass(frozen=True)
class LastSuccessInstance:
    p: tuple

    def __post_init__(self):
        p = tuple(check_unit_interval(v, "p", open_right=True) for v in self.p)
        if not p:
            raise ValueError("need at least one index")
        object.__setattr__(self, "p", p)

    @property
    def n(self):
        return len(self.p)


@dataclass(frozen=True, eq=False)
class SDistribution:
    """Law of the total number of ones ``S`` over both sequences."""

    pmf: np.ndarray
    logpmf: np.ndarray | None = None

    def __post_init__(self):
        pmf = check_pmf(self.pmf).copy()
        pmf.setflags(write=False)
        object.__setattr__(self, "pmf", pmf)
        if self.logpmf is None:
            with np.errstate(divide="ignore"):
                logpmf = np.log(pmf)
        else:
            logpmf = np.asarray(self.logpmf, dtype=float).copy()
            if logpmf.shape != pmf.shape:
                raise ValueError("logpmf and pmf shapes differ")
        logpmf.setflags(write=False)
        object.__setattr__(self, "logpmf", logpmf)

    @property
    def n(self):
        return self.pmf.size - 1

    def prob(self, s):
        """``Pr[S = s]`` for scalar or array ``s``; zero outside the support."""
        s = np.asarray(s)
        inside = (s >= 0) & (s <= self.n)
        out = np.where(inside, self.pmf[np.clip(s, 0, self.n)], 0.0)
        return float(out) if out.ndim == 0 else out

    def max_prob(self):
        return float(self.pmf.max())


def conditioned_s_distribution(n, p):
    """``S ~ Binomial(n, 2p / (1 + p))`` given no index with two ones."""
    n = check_positive_int(n, "n")
    p = check_unit_interval(p, "p", open_left=True, open_right=True)
    q = 2.0 * p / (1.0 + p)
    support = np.arange(n + 1)
    # the log masses keep stop decisions exact where the pmf is subnormal
    return SDistribution(stats.binom.pmf(support, n, q), stats.binom.logpmf(support, n, q))


def optimal_stop_decision(state, S):
    """Stop at ``(a, b)`` iff ``(b + 1) Pr[S = a+b+1] <= 2 Pr[S = a+b]``."""
    a, b = state
    if a < 1 or b < 0:
        raise ValueError(f"invalid state {(a, b)}")
    return bool(_stop_rule(S.logpmf, np.asarray(a), np.asarray(b)))


def _stop_rule(logpmf, a, b):
    n = logpmf.size - 1
    padded = np.append(logpmf, -np.inf)
    s = a + b
    now = np.where(s <= n, padded[np.clip(s, 0, n + 1)], -np.inf)
    nxt = np.where(s + 1 <= n, padded[np.clip(s + 1, 0, n + 1)], -np.inf)
    dead = now == -np.inf
    if np.any(dead & (nxt > -np.inf)):
        raise UndefinedRatio("Pr[S=a+b] = 0 but Pr[S=a+b+1] > 0")
    with np.errstate(invalid="ignore"):
        ratio_ok = np.log(b + 1.0) + nxt <= np.log(2.0) + now
    return dead | ratio_ok


class AcceptSet:
    """A stop region over ``(a, b)`` states given by a vectorised predicate."""

    def __init__(self, predicate, name="custom"):
        self.predicate = predicate
        self.name = name

    def __call__(self, a, b):
        return np.asarray(self.predicate(np.asarray(a), np.asarray(b)), dtype=bool)

    def grid(self, n, b_max=B_MAX):
        """Boolean matrix ``M[s, b]`` over ``s = a + b`` in ``0..n``; invalid cells False."""
        s = np.arange(n + 1)[:, None]
        b = np.arange(b_max + 1)[None, :]
        a = s - b
        valid = a >= 1
        out = np.zeros(valid.shape, dtype=bool)
        out[valid] = self(np.broadcast_to(a, valid.shape)[valid], np.broadcast_to(b, valid.shape)[valid])
        return out

    def is_monotone(self, n, b_max=B_MAX):
        """Stopping at ``(a, b)`` implies stopping at every successor ``(a', b')``.

        Successors satisfy ``a' + b' = a + b + 1`` and ``b' <= b``.
        """
        m = self.grid(n, b_max)
        cols = np.arange(b_max + 1)
        # first b' at level s+1 that continues; every stop at level s must lie below it
        valid_next = cols[None, :] <= np.arange(n + 1)[:, None] - 1
        cont = valid_next & ~m
        first_cont = np.where(cont.any(axis=1), cont.argmax(axis=1), b_max + 1)
        last_stop = np.where(m.any(axis=1), b_max - m[:, ::-1].argmax(axis=1), -1)
        return bool(np.all(last_stop[:-1] < first_cont[1:]))


def optimal_accept_set(S):
    """The stop region of :func:`optimal_stop_decision`, vectorised."""
    return AcceptSet(lambda a, b: _stop_rule(S.logpmf, a, b), "optimal")


NEVER = AcceptSet(lambda a, b: np.zeros(np.broadcast(a, b).shape, dtype=bool), "never")
FIRST_WHEN_NO_SAMPLES_LEFT = AcceptSet(lambda a, b: b == 0, "b == 0")


def monotone_rule_success(A, S, check=True):
    """Exact success probability of a monotone stop region.

    ``sum_A 2^-(b+1) Pr[S=a+b]`` (it stops at the last one) minus
    ``sum_A (b+1) 2^-(b+2) Pr[S=a+b+1]`` (it already stopped at the one before).
    """
    if check and not A.is_monotone(S.n):
        raise ValueError(f"accept set {A.name!r} is not monotone")
    m = A.grid(S.n)
    s, b = np.nonzero(m)
    pmf = np.append(S.pmf, 0.0)
    stop_last = np.ldexp(pmf[s], -(b + 1))
    stop_early = (b + 1) * np.ldexp(pmf[s + 1], -(b + 2))
    return math.fsum(stop_last) - math.fsum(stop_early)


def success_upper_bound(S):
    return 0.25 + 4.0 * S.max_prob()


# --- simulation ----------------------------------------------------------------


def _draw_ones(gen, n, p):
    if np.isscalar(p):
        k = gen.binomial(n, p)
        return np.sort(gen.choice(n, size=k, replace=False))
    return np.flatnonzero(gen.random(n) < p)


def draw_conditioned(gen, n, p):
    """Positions of the X-ones and Y-ones, redrawn until no index has both."""
    while True:
        xs, ys = _draw_ones(gen, n, p), _draw_ones(gen, n, p)
        if not np.intersect1d(xs, ys, assume_unique=True).size:
            return xs, ys


def states_at_ones(xs, ys):
    """``(a, b)`` seen at every X-one, in arrival order."""
    k = np.arange(1, xs.size + 1)
    ys_before = np.searchsorted(ys, xs, side="left")
    return k + ys_before, ys.size - ys_before


def _first_stop(rule, a, b):
    if isinstance(rule, AcceptSet):
        hits = np.flatnonzero(rule(a, b))
        return int(hits[0]) if hits.size else None
    for idx, state in enumerate(zip(a.tolist(), b.tolist())):
        if rule(*state):
            return idx
    return None


def simulate_last_success(rule, n, p, trials, seed=0, stream_id=0):
    """Empirical success rate of ``rule`` with a 95% Wilson interval.

    ``p`` is a common probability or a sequence of per-index probabilities.
    Each trial draws from its own substream.
    """
    n = check_positive_int(n, "n")
    trials = check_positive_int(trials, "trials")
    if not np.isscalar(p):
        p = np.asarray(LastSuccessInstance(tuple(p)).p)
        if p.size != n:
            raise ValueError("need one probability per index")
    spec = RandomnessSpec(seed, stream_id)
    wins = 0
    for t in range(trials):
        xs, ys = draw_conditioned(spec.generator(t), n, p)
        if not xs.size:
            continue
        a, b = states_at_ones(xs, ys)
        stop = _first_stop(rule, a, b)
        wins += stop == xs.size - 1
    return EstimateReport.from_counts(trials, wins, seed)


# --- the hard Googol distribution ------------------------------------------------


@dataclass(frozen=True)
class HardDraw:
    instance: GoogolInstance
    orientation: Orientation
    x_ones: np.ndarray
    y_ones: np.ndarray


class HardInstanceSampler(BernoulliHard):
    """The hard family with access to the underlying bits.

    Card ``i`` (0-based) shows ``i + 1`` on a side whose bit is one, so the
    largest face-down value is the last nonzero one.  Side A is the
    face-down value X and side B the face-up sample Y.
    """

    def draw(self, gen):
        x, y = self.indicators(gen, 1)
        xv, yv = self.values(x[0], y[0])
        inst = GoogolInstance(tuple(zip(xv, yv)))
        return HardDraw(inst, Orientation((False,) * self.n), np.flatnonzero(x[0]), np.flatnonzero(y[0]))


def hard_googol_instance(N, p):
    """Sampler for the hard instance; ``p`` is a scalar or a length-``N`` sequence."""
    N = check_positive_int(N, "N")
    return HardInstanceSampler(tuple(np.broadcast_to(np.asarray(p, dtype=float), (N,))))


def googol_rule_choice(rule, down, up):
    """Card a last-success rule picks from face-down/face-up arrays in index order.

    Nonzero values are recognised by magnitude (at least 1).  Returns None
    when the rule never stops.
    """
    xs = np.flatnonzero(np.asarray(down) >= 1.0)
    if not xs.size:
        return None
    a, b = states_at_ones(xs, np.flatnonzero(np.asarray(up) >= 1.0))
    stop = _first_stop(rule, a, b)
    return None if stop is None else int(xs[stop])


def googol_rule_run(rule, draw):
    """Play a last-success rule on a hard Googol draw; returns the accepted card or None."""
    return googol_rule_choice(rule, draw.orientation.face_down_values(draw.instance),
                              draw.orientation.face_up_values(draw.instance))


class LastSuccessRule(BaseEstimator):
    """Optimal ``(a, b)`` stopping rule for i.i.d. ``Bernoulli(p)`` bits.

    Parameters
    ----------
    n : int
        Sequence length.
    p : float or None
        Success probability; ``None`` means ``n ** (-2/3)``.
    """

    def __init__(self, n=1000, p=None):
        self.n = n
        self.p = p

    def fit(self, X=None, y=None):
        p = self.n ** (-2.0 / 3.0) if self.p is None else self.p
        self.p_ = p
        self.s_distribution_ = conditioned_s_distribution(self.n, p)
        self.accept_set_ = optimal_accept_set(self.s_distribution_)
        return self

    def predict(self, X):
        """Stop decisions for an ``(m, 2)`` array of ``(a, b)`` states."""
        check_is_fitted(self)
        X = np.atleast_2d(np.asarray(X, dtype=np.int64))
        return self.accept_set_(X[:, 0], X[:, 1])

    def success_probability(self):
        check_is_fitted(self)
        return monotone_rule_success(self.accept_set_, self.s_distribution_)

    def upper_bound(self):
        check_is_fitted(self)
        return success_upper_bound(self.s_distribution_)
