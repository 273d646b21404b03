"""Non-increasing threshold schedules ``c_0 >= c_1 >= ...`` for the block-rank rule."""
from __future__ import annotations

import sys
from dataclasses import dataclass

import numpy as np

from .validation import check_non_increasing, check_unit_interval

# Block index for times at or below a positive tail: no face-up rank requirement.
UNBOUNDED = sys.maxsize
# Block index for times above c_0: nothing is accepted there.
NO_BLOCK = -1

DEFAULT_CONSTANTS = (0.715598, 0.496376, 0.301284)


@dataclass(frozen=True)
class ThresholdSchedule:
    """Threshold times for the block-rank rule.

    ``values[j]`` is ``c_j`` for ``j < len(values)``; every later ``c_j``
    equals ``tail``.  A zero tail is a schedule that is zero beyond its last
    entry.  A positive tail models ``c_J = c_{J+1} = ... = tail`` for
    arbitrarily many blocks, so a face-down number arriving at a time
    ``<= tail`` only has to beat the face-down numbers seen before it.
    """

    values: tuple
    tail: float = 0.0

    def __post_init__(self):
        values = tuple(check_unit_interval(v, "threshold") for v in self.values)
        if not values:
            raise ValueError("a schedule needs at least c_0")
        tail = check_unit_interval(self.tail, "tail")
        check_non_increasing(values + (tail,), "schedule")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "tail", tail)

    @classmethod
    def from_constants(cls, c1, c2, c3, c0=1.0):
        """``c_0, c_1, c_2`` followed by ``c_3 = c_4 = ... = c3``."""
        return cls((c0, c1, c2), tail=c3)

    @classmethod
    def default(cls):
        return cls.from_constants(*DEFAULT_CONSTANTS)

    def __len__(self):
        return len(self.values)

    def c(self, j):
        return self.values[j] if j < len(self.values) else self.tail

    def max_block(self, t):
        """Largest ``j`` with ``t <= c_j`` (``NO_BLOCK`` / ``UNBOUNDED`` at the ends)."""
        if self.tail > 0.0 and t <= self.tail:
            return UNBOUNDED
        j = NO_BLOCK
        for k, c in enumerate(self.values):
            if t <= c:
                j = k
            else:
                break
        return j

    def block_probabilities(self):
        """Labels and probabilities of each block for a uniform time on (0, 1].

        Labels run ``NO_BLOCK, 0, 1, ..., J-1`` and then ``UNBOUNDED`` when the
        tail is positive.
        """
        edges = [1.0, *self.values, self.tail]
        probs = [edges[k] - edges[k + 1] for k in range(len(edges) - 1)]
        labels = [NO_BLOCK, *range(len(self.values))]
        if self.tail > 0.0:
            probs.append(self.tail)
            labels.append(UNBOUNDED)
        probs = np.clip(np.array(probs), 0.0, None)
        return np.array(labels, dtype=np.int64), probs / probs.sum()

    def to_dict(self):
        return {"values": list(self.values), "tail": self.tail}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(data["values"]), data.get("tail", 0.0))
