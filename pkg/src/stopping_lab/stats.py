"""Success-count summaries with Wilson score intervals."""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import stats

CSV_FIELDS = ("policy", "family", "n", "trials", "estimate", "lo", "hi", "seed")


def wilson(successes, trials, confidence=0.95):
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if not (0 <= successes <= trials):
        raise ValueError("successes must lie in [0, trials]")
    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(confidence, method="wilson")
    return float(ci.low), float(ci.high)


def round_sig(x, digits=12):
    return float(f"{x:.{digits}g}")


@dataclass(frozen=True)
class EstimateReport:
    trials: int
    successes: int
    estimate: float
    wilson95: tuple
    seed: int

    def __post_init__(self):
        lo, hi = self.wilson95
        if not (lo <= self.estimate <= hi):
            raise ValueError("estimate lies outside its interval")

    @classmethod
    def from_counts(cls, trials, successes, seed):
        trials, successes = int(trials), int(successes)
        return cls(trials, successes, successes / trials, wilson(successes, trials), int(seed))

    @property
    def sigma(self):
        """Binomial standard error at the point estimate."""
        p = self.estimate
        return math.sqrt(p * (1.0 - p) / self.trials)

    def covers(self, value):
        lo, hi = self.wilson95
        return lo <= value <= hi

    def to_dict(self):
        lo, hi = self.wilson95
        return {
            "trials": self.trials,
            "successes": self.successes,
            "estimate": round_sig(self.estimate),
            "wilson95": [round_sig(lo), round_sig(hi)],
            "seed": self.seed,
        }

    def csv_row(self, policy, family, n):
        lo, hi = self.wilson95
        return {
            "policy": policy, "family": family, "n": n, "trials": self.trials,
            "estimate": round_sig(self.estimate), "lo": round_sig(lo), "hi": round_sig(hi),
            "seed": self.seed,
        }
