"""Seeded Monte Carlo engine, instance families and the superstar checks.

Trials run in fixed-size chunks; chunk ``k`` draws from substream ``k`` of the
run's :class:`RandomnessSpec`, so the result does not depend on the number of
worker threads or on the order in which chunks finish.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._kernels import block_rank_kernel
from .model import GoogolInstance, RandomnessSpec
from .schedule import UNBOUNDED, ThresholdSchedule
from .stats import EstimateReport, round_sig
from .validation import check_positive_int, check_unit_interval

CHUNK_SIZE = 4096
THREADS_ENV = "STOPPING_LAB_THREADS"


def worker_count(requested=None):
    """Threads to use: ``requested``, else the CPU count, capped by the env var."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            cap = int(cap)
        except ValueError as exc:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {cap!r}") from exc
        if cap < 1:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {cap}")
        n = min(n, cap)
    return max(1, int(n))


# --- instance families ---------------------------------------------------------


class InstanceFamily:
    """A law over card instances.

    ``sample_batch`` returns ``(down, up)`` arrays of shape ``(size, n)``
    indexed by card: the face-down and face-up value of every card after the
    coin flips.
    """

    tag = "abstract"
    # True when the joint law of the cards is invariant under relabelling,
    # so the card index can stand in for a uniformly random arrival order
    exchangeable = False

    @property
    def n(self):
        raise NotImplementedError

    def sample_batch(self, gen, size):
        raise NotImplementedError

    def sample(self, gen):
        """One draw as ``(instance, face_down_values, face_up_values)``."""
        down, up = self.sample_batch(gen, 1)
        return GoogolInstance(tuple(zip(down[0], up[0]))), down[0], up[0]

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class IIDUniform(InstanceFamily):
    """Every value i.i.d. uniform on (0, 1); the coin flips are then irrelevant."""

    size: int
    tag = "uniform"
    exchangeable = True

    def __post_init__(self):
        check_positive_int(self.size, "n")

    @property
    def n(self):
        return self.size

    def sample_batch(self, gen, size):
        return gen.random((size, self.size)), gen.random((size, self.size))

    def to_dict(self):
        return {"family": self.tag, "n": self.size}


@dataclass(frozen=True)
class ScaledExp(InstanceFamily):
    """Card ``i`` draws both sides from ``scales[i] * Exp(1)``."""

    scales: tuple
    tag = "scaled-exp"

    def __post_init__(self):
        scales = tuple(float(s) for s in self.scales)
        if not scales or min(scales) <= 0 or not all(map(math.isfinite, scales)):
            raise ValueError("scales must be positive and finite")
        object.__setattr__(self, "scales", scales)

    @property
    def n(self):
        return len(self.scales)

    @property
    def exchangeable(self):
        return len(set(self.scales)) == 1

    def sample_batch(self, gen, size):
        s = np.asarray(self.scales)
        return gen.standard_exponential((size, self.n)) * s, gen.standard_exponential((size, self.n)) * s

    def to_dict(self):
        return {"family": self.tag, "n": self.n, "scales": list(self.scales)}


@dataclass(frozen=True)
class BernoulliHard(InstanceFamily):
    """Card ``i`` shows ``i + 1`` with probability ``p_i`` on each side, else a tiny value.

    Draws where a card has two large sides are rejected.  The tiny values
    ``(2i + side + 1) / (2N + 2)`` keep every value distinct without changing
    any comparison that involves a large one.
    """

    p: tuple
    tag = "bernoulli-hard"

    def __post_init__(self):
        p = tuple(check_unit_interval(v, "p", open_left=True, open_right=True) for v in self.p)
        if not p:
            raise ValueError("need at least one card")
        object.__setattr__(self, "p", p)

    @classmethod
    def uniform(cls, n, p=None):
        n = check_positive_int(n, "n")
        return cls((n ** (-2.0 / 3.0) if p is None else p,) * n)

    @property
    def n(self):
        return len(self.p)

    def indicators(self, gen, size):
        p = np.asarray(self.p)
        x = gen.random((size, self.n)) < p
        y = gen.random((size, self.n)) < p
        bad = (x & y).any(axis=1)
        while bad.any():
            k = int(bad.sum())
            x[bad] = gen.random((k, self.n)) < p
            y[bad] = gen.random((k, self.n)) < p
            bad = (x & y).any(axis=1)
        return x, y

    def values(self, x, y):
        idx = np.arange(self.n)
        delta = 1.0 / (2 * self.n + 2)
        return (np.where(x, idx + 1.0, (2 * idx + 1) * delta),
                np.where(y, idx + 1.0, (2 * idx + 2) * delta))

    def sample_batch(self, gen, size):
        return self.values(*self.indicators(gen, size))

    def to_dict(self):
        return {"family": self.tag, "n": self.n, "p": list(self.p)}


@dataclass(frozen=True)
class DiscreteTable(InstanceFamily):
    """Independent finite distributions, one per card, both sides i.i.d.

    Side ``s`` of card ``i`` gets ``(2i + s) * delta`` added, with
    ``2n * delta`` below the smallest gap between distinct support points,
    so ties break by index and distinct outcomes keep their order.
    """

    tables: tuple
    source: str | None = None
    tag = "file"
    _delta: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        tables = []
        for k, (values, probs) in enumerate(self.tables):
            values = np.asarray(values, dtype=float)
            probs = np.asarray(probs, dtype=float)
            if values.ndim != 1 or values.shape != probs.shape or values.size == 0:
                raise ValueError(f"card {k}: values and probs must be equal-length lists")
            if (probs < 0).any() or abs(probs.sum() - 1.0) > 1e-9 or not np.isfinite(values).all():
                raise ValueError(f"card {k}: probs must be a distribution over finite values")
            tables.append((tuple(values), tuple(probs / probs.sum())))
        if not tables:
            raise ValueError("need at least one card")
        object.__setattr__(self, "tables", tuple(tables))
        support = np.unique(np.concatenate([t[0] for t in tables]))
        gap = np.diff(support).min() if support.size > 1 else 1.0
        object.__setattr__(self, "_delta", gap / (2 * len(tables) + 2))

    @classmethod
    def from_json(cls, path):
        data = json.loads(Path(path).read_text())
        return cls(tuple((c["values"], c["probs"]) for c in data["cards"]), str(path))

    @property
    def n(self):
        return len(self.tables)

    def sample_batch(self, gen, size):
        out = []
        for side in (0, 1):
            cols = [gen.choice(np.asarray(v), size=size, p=np.asarray(p)) for v, p in self.tables]
            bump = (2 * np.arange(self.n) + side) * self._delta
            out.append(np.stack(cols, axis=1) + bump)
        return out[0], out[1]

    def to_dict(self):
        return {"family": self.tag, "n": self.n, "path": self.source,
                "cards": [{"values": list(v), "probs": list(p)} for v, p in self.tables]}


@dataclass(frozen=True)
class FixedInstance(InstanceFamily):
    """One explicit instance; only the coin flips are random."""

    instance: GoogolInstance
    tag = "instance"

    @property
    def n(self):
        return self.instance.n

    def sample_batch(self, gen, size):
        cards = np.asarray(self.instance.cards)
        a_up = gen.random((size, self.n)) < 0.5
        return np.where(a_up, cards[:, 1], cards[:, 0]), np.where(a_up, cards[:, 0], cards[:, 1])

    def to_dict(self):
        return {"family": self.tag, "n": self.n, **self.instance.to_dict()}


# --- policies -------------------------------------------------------------------


@dataclass(frozen=True)
class BlockRankPolicy:
    """Block-rank rule under uniformly random arrival times."""

    schedule: ThresholdSchedule = field(default_factory=ThresholdSchedule.default)
    name = "block-rank"

    @classmethod
    def from_estimator(cls, est):
        return cls(ThresholdSchedule(tuple(est.thresholds), est.tail))

    def to_dict(self):
        return {"policy": self.name, "schedule": self.schedule.to_dict()}


@dataclass(frozen=True)
class AdversarialThresholdPolicy:
    """Largest face-up value as threshold, cards in a fixed heuristic order.

    ``order="ascending"`` flips cards by increasing larger side, putting the
    cards least likely to hold the overall winner first; ``"descending"`` is
    the reverse and ``"index"`` keeps the card labels.
    """

    order: str = "ascending"
    name = "adversarial"

    def __post_init__(self):
        if self.order not in ("ascending", "descending", "index"):
            raise ValueError(f"unknown order heuristic {self.order!r}")

    def to_dict(self):
        return {"policy": self.name, "order": self.order}


def block_rank_batch(down, up, counts, schedule):
    """Vectorised block-rank outcomes; see :func:`block_rank_kernel`.

    Returns ``(success, n_special, accepted)`` arrays.
    """
    labels, _ = schedule.block_probabilities()
    T = down.shape[0]
    success = np.zeros(T, dtype=np.bool_)
    n_special = np.zeros(T, dtype=np.int64)
    accepted = np.zeros(T, dtype=np.int64)
    n_ranks = int(sum(1 for lab in labels if 0 <= lab < UNBOUNDED))
    block_rank_kernel(np.ascontiguousarray(down, dtype=float), np.ascontiguousarray(up, dtype=float),
                      np.ascontiguousarray(counts, dtype=np.int64), labels, n_ranks,
                      success, n_special, accepted)
    return success, n_special, accepted


def adversarial_batch(down, up, order="ascending"):
    """Success of the max-face-up threshold rule under a heuristic card order."""
    if order == "index":
        perm = np.broadcast_to(np.arange(down.shape[1]), down.shape)
    else:
        key = np.maximum(down, up)
        perm = np.argsort(key if order == "ascending" else -key, axis=1, kind="stable")
    seq = np.take_along_axis(down, perm, axis=1)
    beats = seq > up.max(axis=1, keepdims=True)
    first = beats.argmax(axis=1)
    hit = np.take_along_axis(seq, first[:, None], axis=1)[:, 0]
    return beats.any(axis=1) & (hit == seq.max(axis=1))


def _arrival_order(dist, gen, down, up):
    if dist.exchangeable:
        return down, up
    perm = gen.permuted(np.broadcast_to(np.arange(dist.n), down.shape), axis=1)
    return np.take_along_axis(down, perm, axis=1), np.take_along_axis(up, perm, axis=1)


def _chunk(policy, dist, spec, index, size):
    gen = spec.generator(index)
    down, up = dist.sample_batch(gen, size)
    if isinstance(policy, BlockRankPolicy):
        down, up = _arrival_order(dist, gen, down, up)
        _, probs = policy.schedule.block_probabilities()
        counts = gen.multinomial(dist.n, probs, size=size)
        success, n_special, _ = block_rank_batch(down, up, counts, policy.schedule)
        violations = int(np.count_nonzero(success != (n_special == 1)))
        return int(success.sum()), violations, np.bincount(np.minimum(n_special, 3), minlength=4)
    if isinstance(policy, AdversarialThresholdPolicy):
        success = adversarial_batch(down, up, policy.order)
        return int(success.sum()), 0, np.zeros(4, dtype=np.int64)
    raise TypeError(f"unsupported policy {policy!r}")


@dataclass(frozen=True)
class MonteCarloDiagnostics:
    """Per-run checks; ``special_counts[k]`` trials saw ``k`` specials (3 means 3+)."""

    invariant_violations: int
    special_counts: tuple

    def to_dict(self):
        return {"invariant_violations": self.invariant_violations,
                "special_counts": list(self.special_counts)}


def run_monte_carlo(policy, dist, trials, seed=0, chunk_size=CHUNK_SIZE, threads=None,
                    return_diagnostics=False):
    """Estimate the success probability of ``policy`` on ``dist``.

    For the block-rank policy every trial also checks that it succeeds
    exactly when it saw one special value.
    """
    trials = check_positive_int(trials, "trials")
    chunk_size = check_positive_int(chunk_size, "chunk_size")
    if hasattr(policy, "get_params") and hasattr(policy, "thresholds"):
        policy = BlockRankPolicy.from_estimator(policy)
    spec = RandomnessSpec(seed, 0)
    sizes = [min(chunk_size, trials - k) for k in range(0, trials, chunk_size)]
    workers = min(worker_count(threads), len(sizes))
    task = lambda k: _chunk(policy, dist, spec, k, sizes[k])  # noqa: E731
    if workers == 1:
        parts = [task(k) for k in range(len(sizes))]
    else:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(task, range(len(sizes))))
    wins = sum(p[0] for p in parts)
    report = EstimateReport.from_counts(trials, wins, seed)
    if not return_diagnostics:
        return report
    diag = MonteCarloDiagnostics(sum(p[1] for p in parts),
                                 tuple(int(v) for v in np.sum([p[2] for p in parts], axis=0)))
    return report, diag


# --- superstars -----------------------------------------------------------------


@dataclass(frozen=True)
class SuperstarConfig:
    epsilon: float
    k: int

    def __post_init__(self):
        check_unit_interval(self.epsilon, "epsilon", open_left=True, open_right=True)
        check_positive_int(self.k, "k")

    @property
    def collision_bound(self):
        """Bound ``eps * k * 2^(k-1)`` on a card holding two of the top ``k`` values."""
        return self.epsilon * self.k * 2 ** (self.k - 1)


def _batches(trials, chunk_size):
    return [(k, min(chunk_size, trials - s)) for k, s in enumerate(range(0, trials, chunk_size))]


def superstar_level(dist, trials, seed=0, chunk_size=CHUNK_SIZE):
    """Largest frequency, over cards, of a card's X-value being the X-maximum.

    X is the card's first sampled value (the face-down side).
    """
    trials = check_positive_int(trials, "trials")
    spec = RandomnessSpec(seed, 1)
    wins = np.zeros(dist.n, dtype=np.int64)
    for k, size in _batches(trials, chunk_size):
        down, _ = dist.sample_batch(spec.generator(k), size)
        wins += np.bincount(down.argmax(axis=1), minlength=dist.n)
    return float(wins.max() / trials)


@dataclass(frozen=True)
class CollisionReport:
    report: EstimateReport
    k: int
    epsilon: float
    bound: float

    def holds(self, sigmas=3.0):
        """Estimate at most ``bound + sigmas * sigma``."""
        return self.report.estimate <= self.bound + sigmas * self.report.sigma

    def to_dict(self):
        return {**self.report.to_dict(), "k": self.k, "epsilon": round_sig(self.epsilon),
                "bound": round_sig(self.bound), "holds_3sigma": self.holds()}


def top_pair_collision_estimate(dist, k, trials, seed=0, epsilon=None, chunk_size=CHUNK_SIZE):
    """Frequency of some card holding two of the top ``k`` of all ``2n`` values.

    ``epsilon`` defaults to :func:`superstar_level` measured with the same
    trial count.
    """
    k = check_positive_int(k, "k")
    trials = check_positive_int(trials, "trials")
    if epsilon is None:
        epsilon = superstar_level(dist, trials, seed, chunk_size)
    spec = RandomnessSpec(seed, 2)
    n = dist.n
    hits = 0
    for c, size in _batches(trials, chunk_size):
        down, up = dist.sample_batch(spec.generator(c), size)
        both = np.concatenate([down, up], axis=1)
        kk = min(k, 2 * n)
        top = np.argpartition(-both, kk - 1, axis=1)[:, :kk] % n
        top.sort(axis=1)
        hits += int(np.count_nonzero((np.diff(top, axis=1) == 0).any(axis=1)))
    return CollisionReport(EstimateReport.from_counts(trials, hits, seed), k, float(epsilon),
                           float(epsilon) * k * 2 ** (k - 1))


# --- export ---------------------------------------------------------------------


def family_from_config(name, n=None, path=None, scales=None, p=None, instance=None):
    """Build a family from CLI-style settings."""
    if name == "uniform":
        return IIDUniform(check_positive_int(n, "n"))
    if name == "scaled-exp":
        return ScaledExp(tuple(scales) if scales is not None else tuple(float(i + 1) for i in range(n)))
    if name == "bernoulli-hard":
        if p is None or np.isscalar(p):
            return BernoulliHard.uniform(n, p)
        return BernoulliHard(tuple(p))
    if name == "file":
        if path is None:
            raise ValueError("the file family needs a path")
        return DiscreteTable.from_json(path)
    if name == "instance":
        if instance is None:
            raise ValueError("the instance family needs an instance")
        return FixedInstance(instance)
    raise ValueError(f"unknown family {name!r}")
