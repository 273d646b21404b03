"""Stopping policies for the two-sided Game of Googol.

The functional entry points (:func:`block_rank_run`,
:func:`adversarial_threshold_run`) work on explicit instances.  The estimator
classes wrap them in the scikit-learn ``fit``/``predict`` idiom: ``fit`` sees
the face-up samples, ``predict`` sees the face-down stream.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .model import AdversarialOrder, ArrivalTimes, GoogolInstance, Orientation
from .schedule import NO_BLOCK, DEFAULT_CONSTANTS, ThresholdSchedule

MAX_EXACT_CARDS = 12


class SpecialEvent(NamedTuple):
    card: int
    value: float
    position: int
    time: float | None = None
    block: int | None = None


@dataclass(frozen=True)
class PolicyTrace:
    accepted: int | None
    special_events: tuple
    success: bool

    def to_dict(self):
        return {
            "accepted": self.accepted,
            "success": self.success,
            "special_events": [e._asdict() for e in self.special_events],
        }


@dataclass(frozen=True)
class AdversarialGame:
    instance: GoogolInstance
    order: AdversarialOrder
    orientation: Orientation

    def __post_init__(self):
        if not (self.instance.n == len(self.order.order) == self.orientation.n):
            raise ValueError("instance, order and orientation sizes differ")


def _check_sizes(inst, orientation, times):
    if not (inst.n == orientation.n == times.n):
        raise ValueError("instance, orientation and times sizes differ")


def _block_rank_scan(down, up_desc, times, schedule, rejected=frozenset()):
    order = np.argsort(-np.asarray(times), kind="stable")
    running = -np.inf
    events = []
    accepted = None
    for position, k in enumerate(order):
        k = int(k)
        v = down[k]
        if v > running:
            j = schedule.max_block(times[k])
            if j != NO_BLOCK:
                # Y^(j+1) is -inf when fewer than j+1 face-up values exist
                threshold = up_desc[j] if j < len(up_desc) else -np.inf
                if v > threshold:
                    events.append(SpecialEvent(k, float(v), position, float(times[k]), int(j)))
                    if accepted is None and k not in rejected:
                        accepted = k
            running = v
    return accepted, tuple(events)


def block_rank_run(inst, orientation, times, schedule):
    """Run the block-rank rule on one game and record every special number.

    A face-down value arriving at time ``t`` is special when it beats every
    face-down value seen before it and beats ``Y^(j+1)`` for the largest ``j``
    with ``t <= c_j``.  The first special value is accepted; the scan goes on
    past acceptance so the trace holds all special values.
    """
    _check_sizes(inst, orientation, times)
    down = orientation.face_down_values(inst)
    up_desc = np.sort(orientation.face_up_values(inst))[::-1]
    accepted, events = _block_rank_scan(down, up_desc, times.times, schedule)
    success = accepted is not None and down[accepted] == down.max()
    return PolicyTrace(accepted, events, bool(success))


def block_rank_monotonicity_check(inst, orientation, times, schedule):
    """Reject the accepted card and check where the rule stops next.

    It must stop at the first later face-down value exceeding the rejected
    one, or nowhere if no such value exists.
    """
    trace = block_rank_run(inst, orientation, times, schedule)
    if trace.accepted is None:
        raise ValueError("the rule accepted nothing on this game")
    down = orientation.face_down_values(inst)
    up_desc = np.sort(orientation.face_up_values(inst))[::-1]
    resumed, _ = _block_rank_scan(down, up_desc, times.times, schedule, frozenset({trace.accepted}))
    order = list(np.argsort(-np.asarray(times.times), kind="stable"))
    start = order.index(trace.accepted)
    expected = next((int(k) for k in order[start + 1:] if down[k] > down[trace.accepted]), None)
    return resumed == expected


def adversarial_threshold_run(game):
    """Accept the first face-down value above the largest face-up value."""
    down = game.orientation.face_down_values(game.instance)
    threshold = game.orientation.face_up_values(game.instance).max()
    events = tuple(
        SpecialEvent(int(k), float(down[k]), pos)
        for pos, k in enumerate(game.order.order)
        if down[k] > threshold
    )
    accepted = events[0].card if events else None
    success = accepted is not None and down[accepted] == down.max()
    return PolicyTrace(accepted, events, bool(success))


def _orientation_masks(n):
    masks = np.arange(1 << n)
    return (masks[:, None] >> np.arange(n)) & 1 == 1  # True: side A face-up


def adversarial_exact_success(inst, return_order=False):
    """Worst-case success of the max-face-up threshold rule, as a fraction.

    The adversary fixes the card order knowing the instance but not the coin
    flips.  For a fixed orientation the rule wins iff the card holding the
    largest face-down value comes first among the cards that beat the
    threshold, so the total over orientations decomposes over the cards in
    order and the minimising order is found by a DP over placed-card subsets.
    """
    n = inst.n
    if n > MAX_EXACT_CARDS:
        raise ValueError(f"exact evaluation supports at most {MAX_EXACT_CARDS} cards, got {n}")
    vals = np.asarray(inst.cards)
    up_a = _orientation_masks(n)
    up = np.where(up_a, vals[:, 0], vals[:, 1])
    down = np.where(up_a, vals[:, 1], vals[:, 0])
    beats = down > up.max(axis=1, keepdims=True)
    beat_masks = (beats * (1 << np.arange(n))).sum(axis=1)
    winner = np.where(beats.any(axis=1), down.argmax(axis=1), -1)

    full = (1 << n) - 1
    # free[c][U]: orientations won by card c whose beating set lies inside U
    free = np.zeros((n, 1 << n), dtype=np.int64)
    for c in range(n):
        np.add.at(free[c], beat_masks[winner == c], 1)
        for bit in range(n):
            view = free[c].reshape(-1, 2, 1 << bit)
            view[:, 1, :] += view[:, 0, :]

    best = np.full(1 << n, np.iinfo(np.int64).max, dtype=np.int64)
    choice = np.full(1 << n, -1, dtype=np.int64)
    best[0] = 0
    for placed in range(1 << n):
        base = best[placed]
        rest = full & ~placed
        for c in range(n):
            if placed >> c & 1:
                continue
            nxt = placed | (1 << c)
            cost = base + free[c][rest]
            if cost < best[nxt]:
                best[nxt] = cost
                choice[nxt] = c
    value = Fraction(int(best[full]), 1 << n)
    if not return_order:
        return value
    order, placed = [], full
    while placed:
        c = int(choice[placed])
        order.append(c)
        placed &= ~(1 << c)
    return value, AdversarialOrder(tuple(reversed(order)))


def adversarial_success_for_order(inst, order):
    """Exact success over all orientations for one fixed order (brute force)."""
    n = inst.n
    total = 0
    for up_a in _orientation_masks(n):
        game = AdversarialGame(inst, order, Orientation(tuple(up_a)))
        total += adversarial_threshold_run(game).success
    return Fraction(total, 1 << n)


# --- estimator wrappers ------------------------------------------------------


def _as_values(X, name):
    X = check_array(X, ensure_2d=False, dtype=float, input_name=name)
    if X.ndim != 1:
        raise ValueError(f"{name} must be one value per card")
    return X


class BlockRankSelector(BaseEstimator):
    """Block-rank stopping rule.

    Parameters
    ----------
    thresholds : tuple of float
        ``c_0 >= c_1 >= ...`` in [0, 1].
    tail : float
        Value of every ``c_j`` past ``thresholds``; 0 switches acceptance off
        below the last threshold.

    Attributes
    ----------
    face_up_ : ndarray
        Face-up values, one per card.
    ranked_face_up_ : ndarray
        The same values in decreasing order.
    schedule_ : ThresholdSchedule
    """

    def __init__(self, thresholds=(1.0,) + DEFAULT_CONSTANTS[:2], tail=DEFAULT_CONSTANTS[2]):
        self.thresholds = thresholds
        self.tail = tail

    def fit(self, X, y=None):
        X = _as_values(X, "X")
        self.schedule_ = ThresholdSchedule(tuple(self.thresholds), self.tail)
        self.face_up_ = X
        self.ranked_face_up_ = np.sort(X)[::-1]
        self.n_cards_ = X.size
        return self

    def _game(self, X, times):
        check_is_fitted(self)
        X = _as_values(X, "X")
        if X.size != self.n_cards_:
            raise ValueError(f"expected {self.n_cards_} face-down values, got {X.size}")
        inst = GoogolInstance(tuple(zip(X, self.face_up_)))
        return inst, Orientation((False,) * X.size), ArrivalTimes(tuple(times))

    def trace(self, X, times):
        return block_rank_run(*self._game(X, times), self.schedule_)

    def predict(self, X, times):
        """Index of the accepted face-down value, or -1."""
        accepted = self.trace(X, times).accepted
        return -1 if accepted is None else accepted


class SampleMaxThreshold(BaseEstimator):
    """Accept the first revealed value above the largest sample."""

    def fit(self, X, y=None):
        X = _as_values(X, "X")
        self.threshold_ = float(X.max())
        return self

    def predict(self, X):
        """Index (in arrival order) of the accepted value, or -1."""
        check_is_fitted(self)
        X = _as_values(X, "X")
        hits = np.flatnonzero(X > self.threshold_)
        return int(hits[0]) if hits.size else -1
