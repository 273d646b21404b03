"""Instances, orientations, arrival times and the seeded randomness contract.

Cards are indexed from 0.  Side 0 of a card is ``valueA`` and side 1 is
``valueB``; an :class:`Orientation` entry of ``True`` means side A faces up.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .validation import (
    DuplicateValue,
    EmptyInstance,
    check_cards,
    check_permutation,
    check_positive_int,
)


class RankEntry(NamedTuple):
    value: float
    card: int
    side: int


@dataclass(frozen=True)
class GoogolInstance:
    """``n`` cards, each carrying two distinct real numbers."""

    cards: tuple
    _ranks: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cards = check_cards(self.cards)
        object.__setattr__(self, "cards", cards)
        object.__setattr__(self, "_ranks", validate_instance(cards))

    @property
    def n(self):
        return len(self.cards)

    def ranks(self):
        """Values sorted in decreasing order, each tagged with card and side."""
        return self._ranks

    def pair_of(self, value_rank, ranks=None):
        """Rank (0-based) of the value sharing a card with ``value_rank``."""
        ranks = self.ranks() if ranks is None else ranks
        card = ranks[value_rank].card
        for r, entry in enumerate(ranks):
            if entry.card == card and r != value_rank:
                return r
        raise AssertionError("every card has two sides")

    def to_dict(self):
        return {"cards": [[a, b] for a, b in self.cards]}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(tuple(c) for c in data["cards"]))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def validate_instance(inst):
    """Check distinctness and return the rank view ``a_1 > a_2 > ... > a_2n``.

    Raises
    ------
    EmptyInstance
        If there are no cards.
    DuplicateValue
        If any value occurs twice, on one card or across cards.
    """
    if isinstance(inst, GoogolInstance):
        return inst.ranks()
    cards = check_cards(inst)
    if not cards:
        raise EmptyInstance()
    entries = [RankEntry(v, k, s) for k, card in enumerate(cards) for s, v in enumerate(card)]
    entries.sort(key=lambda e: e.value, reverse=True)
    for hi, lo in zip(entries, entries[1:]):
        if hi.value == lo.value:
            raise DuplicateValue(hi.value)
    return tuple(entries)


@dataclass(frozen=True)
class Orientation:
    face_up: tuple

    def __post_init__(self):
        object.__setattr__(self, "face_up", tuple(bool(b) for b in self.face_up))

    @property
    def n(self):
        return len(self.face_up)

    def face_up_values(self, inst):
        return np.array([c[0] if up else c[1] for c, up in zip(inst.cards, self.face_up)])

    def face_down_values(self, inst):
        return np.array([c[1] if up else c[0] for c, up in zip(inst.cards, self.face_up)])

    def is_face_down(self, card, side):
        """True when the given side of ``card`` is hidden (belongs to X)."""
        return self.face_up[card] == (side == 1)

    def to_dict(self):
        return {"face_up": list(self.face_up)}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(data["face_up"]))


@dataclass(frozen=True)
class ArrivalTimes:
    """Arrival times in (0, 1]; cards are processed by decreasing time."""

    times: tuple

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        if any(not (0.0 < t <= 1.0) for t in times):
            raise ValueError("arrival times must lie in (0, 1]")
        if len(set(times)) != len(times):
            raise ValueError("arrival times must be distinct")
        object.__setattr__(self, "times", times)

    @property
    def n(self):
        return len(self.times)

    def processing_order(self):
        return tuple(int(k) for k in np.argsort([-t for t in self.times], kind="stable"))

    def to_dict(self):
        return {"times": list(self.times)}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(data["times"]))


@dataclass(frozen=True)
class AdversarialOrder:
    order: tuple

    def __post_init__(self):
        object.__setattr__(self, "order", check_permutation(self.order, len(self.order)))

    def to_dict(self):
        return {"order": list(self.order)}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(data["order"]))


@dataclass(frozen=True)
class RandomnessSpec:
    """Counter-based substreams keyed by ``(master_seed, stream_id, index)``.

    The generator for a given index does not depend on which other indices
    were drawn before it, so results are independent of how work is split
    across workers.
    """

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not (0 <= int(self.master_seed) < 2**64):
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if int(self.stream_id) < 0:
            raise ValueError("stream_id must be non-negative")

    def generator(self, index):
        seq = np.random.SeedSequence([int(self.master_seed), int(self.stream_id), int(index)])
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, stream_id):
        return RandomnessSpec(self.master_seed, stream_id)

    def to_dict(self):
        return {"master_seed": int(self.master_seed), "stream_id": int(self.stream_id)}

    @classmethod
    def from_dict(cls, data):
        return cls(data["master_seed"], data["stream_id"])


def as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RandomnessSpec):
        return rng.generator(0)
    return np.random.default_rng(rng)


def sample_orientation(inst, rng):
    """Flip a fair coin for every card."""
    n = inst.n if isinstance(inst, GoogolInstance) else check_positive_int(inst, "n")
    if n < 1:
        raise EmptyInstance()
    return Orientation(tuple(as_generator(rng).random(n) < 0.5))


def sample_arrival_times(n, rng):
    """``n`` i.i.d. uniform times on (0, 1]; exact ties are redrawn."""
    n = check_positive_int(n, "n")
    gen = as_generator(rng)
    while True:
        # 1 - U maps [0, 1) onto (0, 1]
        times = 1.0 - gen.random(n)
        if np.unique(times).size == n:
            return ArrivalTimes(tuple(times))
