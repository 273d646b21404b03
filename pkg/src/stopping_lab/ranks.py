"""Exact rank-beat probabilities ``Pr[X^i > Y^j]`` for two-sided card instances.

``X^i`` is the i-th largest face-down value and ``Y^j`` the j-th largest
face-up value.  Whether ``X^i > Y^j`` holds is decided by the orientation of
the top ``T = i + j - 1`` values alone: it holds exactly when at least ``i``
of them are face-down.  Positions inside that window are numbered
``1..T`` from the largest value down.
"""
from __future__ import annotations

import functools
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np

from .validation import check_positive_int


def _frac_str(x):
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class PairStructure:
    """Disjoint pairs of window positions that sit on the same card.

    Positions not covered by a pair are singletons: their partner ranks below
    the window, so their orientation is an independent fair coin as far as
    the window is concerned.
    """

    window: int
    pairs: frozenset = frozenset()

    def __post_init__(self):
        check_positive_int(self.window, "window")
        pairs = frozenset(tuple(sorted((int(u), int(v)))) for u, v in self.pairs)
        seen = set()
        for u, v in pairs:
            if u == v or not (1 <= u <= self.window and 1 <= v <= self.window):
                raise ValueError(f"pair {(u, v)} is not inside window 1..{self.window}")
            if u in seen or v in seen:
                raise ValueError(f"pairs overlap at {(u, v)}")
            seen.update((u, v))
        object.__setattr__(self, "pairs", pairs)

    @property
    def n_pairs(self):
        return len(self.pairs)

    @property
    def lower_members(self):
        """Positions of the smaller value of each pair, largest value first."""
        return tuple(sorted(v for _, v in self.pairs))

    def restrict(self, window):
        """Same pairing seen through a smaller window; cut pairs become singletons."""
        return PairStructure(window, frozenset(p for p in self.pairs if p[1] <= window))

    def label(self):
        return "".join(f"({u},{v})" for u, v in sorted(self.pairs)) or "-"

    @classmethod
    def from_instance(cls, inst, window):
        """Pairs among the top ``window`` values of a concrete instance."""
        ranks = inst.ranks()
        if window > len(ranks):
            raise ValueError("window is larger than the instance")
        card_pos = defaultdict(list)
        for r, entry in enumerate(ranks[:window], start=1):
            card_pos[entry.card].append(r)
        return cls(window, frozenset(tuple(p) for p in card_pos.values() if len(p) == 2))


def _check_query(i, j):
    i = check_positive_int(i, "i")
    j = check_positive_int(j, "j")
    return i, j


def p_value(i, j):
    """Beat probability when the top ``i + j - 1`` values lie on distinct cards.

    ``p(i, j) = sum_{k=0}^{j-1} C(i-1+k, k) / 2^(i+k)``.
    """
    i, j = _check_query(i, j)
    return sum((Fraction(comb(i - 1 + k, k), 2 ** (i + k)) for k in range(j)), Fraction(0))


def p_value_binomial(i, j):
    """``p(i, j)`` as the upper tail ``Pr[Bin(i+j-1, 1/2) >= i]``."""
    i, j = _check_query(i, j)
    t = i + j - 1
    return Fraction(sum(comb(t, k) for k in range(i, t + 1)), 2**t)


def exact_rank_beat_prob(i, j, structure=None):
    """``Pr[X^i > Y^j]`` for a window pairing, as an exact rational.

    The ``2^(l+s)`` equally likely window orientations (one binary choice per
    inside pair, one per singleton) are tallied by their face-down count.  A
    pair always contributes exactly one face-down value, so the tally only
    ranges over the singletons.

    Raises
    ------
    ValueError
        On a zero rank or a window size other than ``i + j - 1``.
    """
    i, j = _check_query(i, j)
    t = i + j - 1
    if structure is None:
        structure = PairStructure(t)
    if structure.window != t:
        raise ValueError(f"window must be i + j - 1 = {t}, got {structure.window}")
    pairs = structure.n_pairs
    singles = t - 2 * pairs
    need = max(0, i - pairs)
    hits = sum(comb(singles, m) for m in range(need, singles + 1))
    return Fraction(hits, 2**singles)


# --- explicit window enumeration -------------------------------------------


def matchings(positions):
    """Every partial matching (set of disjoint pairs) of ``positions``."""
    positions = tuple(positions)
    if not positions:
        yield ()
        return
    first, rest = positions[0], positions[1:]
    for m in matchings(rest):
        yield m
    for k, partner in enumerate(rest):
        remaining = rest[:k] + rest[k + 1:]
        for m in matchings(remaining):
            yield ((first, partner),) + m


def pair_structures(window):
    for m in matchings(range(1, window + 1)):
        yield PairStructure(window, frozenset(m))


@functools.lru_cache(maxsize=None)
def _positional_event_table(window):
    """``table[mask, i-1]`` is True iff ``X^i > Y^j`` for ``j = window + 1 - i``.

    Bit ``r-1`` of ``mask`` set means window position ``r`` is face-down.  The
    event is read off position by position: the i-th face-down value must be
    found before the j-th face-up value, and ranks past the window count as
    "not found".
    """
    size = 1 << window
    table = np.zeros((size, window), dtype=bool)
    for mask in range(size):
        down = [r for r in range(window) if mask >> r & 1]
        up = [r for r in range(window) if not mask >> r & 1]
        for i in range(1, window + 1):
            j = window + 1 - i
            xi = down[i - 1] if len(down) >= i else window
            yj = up[j - 1] if len(up) >= j else window
            table[mask, i - 1] = xi < yj
    table.setflags(write=False)
    return table


def window_orientations(structure):
    """Bitmasks of all admissible window orientations (each equally likely)."""
    masks = np.zeros(1, dtype=np.int64)
    covered = set()
    for u, v in sorted(structure.pairs):
        masks = np.concatenate([masks | (1 << (u - 1)), masks | (1 << (v - 1))])
        covered.update((u, v))
    for r in range(1, structure.window + 1):
        if r not in covered:
            masks = np.concatenate([masks, masks | (1 << (r - 1))])
    return masks


def window_beat_probabilities(structure):
    """``Pr[X^i > Y^(T+1-i)]`` for every ``i`` by explicit enumeration.

    Returns a tuple indexed by ``i - 1``.
    """
    masks = window_orientations(structure)
    table = _positional_event_table(structure.window)
    hits = table[masks].sum(axis=0)
    return tuple(Fraction(int(h), masks.size) for h in hits)


# --- verifiers ---------------------------------------------------------------


@dataclass
class VerificationReport:
    name: str
    entries: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    checked: int = 0

    @property
    def passed(self):
        return not self.failures

    def records(self):
        return [
            {**e, "lhs": _frac_str(e["lhs"]), "rhs": _frac_str(e["rhs"])}
            | ({"gap": _frac_str(e["gap"])} if "gap" in e else {})
            for e in self.entries
        ]

    def to_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "checked": self.checked,
            "failures": len(self.failures),
            "entries": self.records(),
        }


def verify_rank_dominance(max_window):
    """Check ``Pr[X^i > Y^j] >= p(i, j)`` for ``i <= j`` (``<=`` for ``i >= j``).

    Every pairing of every window up to ``max_window`` is enumerated.  Each
    case is also checked against :func:`exact_rank_beat_prob`.  The report
    keeps, per ``(i, j)``, the case with the smallest margin together with the
    largest margin seen.
    """
    max_window = check_positive_int(max_window, "max_window")
    report = VerificationReport("rank_dominance")
    for t in range(1, max_window + 1):
        p = [p_value(i, t + 1 - i) for i in range(1, t + 1)]
        worst = [None] * t
        best_gap = [None] * t
        for structure in pair_structures(t):
            probs = window_beat_probabilities(structure)
            for idx, prob in enumerate(probs):
                i, j = idx + 1, t - idx
                report.checked += 1
                gaps = []
                if i <= j:
                    gaps.append(prob - p[idx])
                if i >= j:
                    gaps.append(p[idx] - prob)
                gap = min(gaps)
                entry = {"i": i, "j": j, "pairing": structure.label(), "lhs": prob,
                         "rhs": p[idx], "pass": gap >= 0, "gap": gap}
                if gap < 0:
                    report.failures.append(entry)
                if prob != exact_rank_beat_prob(i, j, structure):
                    report.failures.append({**entry, "pass": False, "reason": "tally mismatch"})
                if worst[idx] is None or gap < worst[idx]["gap"]:
                    worst[idx] = entry
                if best_gap[idx] is None or gap > best_gap[idx]:
                    best_gap[idx] = gap
        for entry, hi in zip(worst, best_gap):
            report.entries.append({**entry, "largest_gap": _frac_str(hi)})
    return report


def verify_pair_position_independence(max_window):
    """Check that the beat probability depends on the pair count only."""
    max_window = check_positive_int(max_window, "max_window")
    report = VerificationReport("pair_position_independence")
    for t in range(1, max_window + 1):
        by_count = defaultdict(list)
        for structure in pair_structures(t):
            by_count[structure.n_pairs].append((structure, window_beat_probabilities(structure)))
        for pairs, cases in sorted(by_count.items()):
            ref_structure, ref = cases[0]
            for idx in range(t):
                values = {probs[idx] for _, probs in cases}
                report.checked += len(cases)
                entry = {"i": idx + 1, "j": t - idx, "pairing": f"{pairs} pairs x{len(cases)}",
                         "lhs": ref[idx], "rhs": ref[idx], "pass": len(values) == 1}
                if len(values) != 1:
                    entry["rhs"] = min(values) if ref[idx] != min(values) else max(values)
                    report.failures.append(entry)
                report.entries.append(entry)
    return report


def second_order_terms(structure):
    """The three beat probabilities entering the second-order inequality.

    ``structure`` pairs positions among the top four values.
    """
    if structure.window != 4:
        raise ValueError("the second-order inequality looks at the top four values")
    four = window_beat_probabilities(structure)
    three = window_beat_probabilities(structure.restrict(3))
    return {"x2y3": four[1], "x1y3": three[0], "x1y4": four[0]}


def verify_second_order_inequality():
    """``P[X2>Y3]-p(2,3) <= 2(P[X1>Y3]-p(1,3)) + (P[X1>Y4]-p(1,4))`` on all 10 pairings."""
    report = VerificationReport("second_order_inequality")
    p23, p13, p14 = p_value(2, 3), p_value(1, 3), p_value(1, 4)
    for structure in pair_structures(4):
        terms = second_order_terms(structure)
        lhs = terms["x2y3"] - p23
        rhs = 2 * (terms["x1y3"] - p13) + (terms["x1y4"] - p14)
        entry = {"i": 2, "j": 3, "pairing": structure.label(), "lhs": lhs, "rhs": rhs,
                 "pass": lhs <= rhs, "terms": {k: _frac_str(v) for k, v in terms.items()}}
        report.checked += 1
        report.entries.append(entry)
        if lhs > rhs:
            report.failures.append(entry)
    return report
