"""Optimal ordinal play in tiny random-order two-sided games.

The player knows which ranks share a card but sees values only through their
relative order.  Cards are flipped in uniformly random order and each side
faces up with probability 1/2.  The game value is the worst case over rank
pairings of the best achievable success probability.
"""
from __future__ import annotations

import itertools
from collections import defaultdict
from fractions import Fraction

from .ranks import matchings

MAX_SMALL_CARDS = 3


def rank_pairings(n):
    """All ways to put ranks ``0..2n-1`` (0 = largest) onto ``n`` cards."""
    for m in matchings(range(2 * n)):
        if len(m) == n:
            yield tuple(m)


def outcomes(pairing):
    """Equally likely (order, face-down ranks, face-up ranks) triples."""
    n = len(pairing)
    for flips in itertools.product((0, 1), repeat=n):
        down = tuple(card[f] for card, f in zip(pairing, flips))
        up = tuple(card[1 - f] for card, f in zip(pairing, flips))
        for order in itertools.permutations(range(n)):
            yield order, down, up


def information(outcome, k):
    """What the player has seen after flipping ``k`` cards, ordinally encoded."""
    order, down, up = outcome
    flipped = order[:k]
    visible = sorted(list(up) + [down[c] for c in flipped])
    rel = {r: pos for pos, r in enumerate(visible)}
    seen = tuple((rel[up[c]], rel[down[c]]) for c in flipped)
    waiting = tuple(sorted(rel[up[c]] for c in order[k:]))
    return seen, waiting


def _wins(outcome, k):
    order, down, _ = outcome
    return down[order[k - 1]] == min(down)


def _solve(group, k, n):
    stop = Fraction(sum(_wins(o, k) for o in group), len(group)) if k else Fraction(0)
    if k == n:
        return stop
    branches = defaultdict(list)
    for o in group:
        branches[information(o, k + 1)].append(o)
    go = sum(Fraction(len(b), len(group)) * _solve(b, k + 1, n) for b in branches.values())
    return max(stop, go)


def pairing_value(pairing):
    """Optimal success for one known rank pairing, by backward induction."""
    group = list(outcomes(pairing))
    return _solve(group, 0, len(pairing))


def optimal_small_n_value(n, return_all=False):
    """Worst case over rank pairings of the optimal ordinal success (``n <= 3``)."""
    if not (1 <= n <= MAX_SMALL_CARDS):
        raise ValueError(f"n must be between 1 and {MAX_SMALL_CARDS}, got {n}")
    values = {p: pairing_value(p) for p in rank_pairings(n)}
    value = min(values.values())
    return (value, values) if return_all else value
