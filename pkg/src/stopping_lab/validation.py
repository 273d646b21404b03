"""Input validation helpers shared by the estimators and the functional API."""
from __future__ import annotations

import math
import numbers

import numpy as np


class InstanceError(ValueError):
    """Raised when a card instance violates the distinct-values model."""


class DuplicateValue(InstanceError):
    def __init__(self, value):
        super().__init__(f"value {value!r} appears more than once")
        self.value = value


class EmptyInstance(InstanceError):
    def __init__(self):
        super().__init__("an instance needs at least one card")


class NonFiniteValue(InstanceError):
    def __init__(self, value):
        super().__init__(f"card values must be finite, got {value!r}")
        self.value = value


class UndefinedRatio(ArithmeticError):
    """The optimal last-success stop ratio has a zero denominator but future mass."""


def check_cards(cards):
    """Coerce ``cards`` into a tuple of ``(float, float)`` pairs.

    Only the shape and finiteness are checked here; distinctness is the job of
    :func:`stopping_lab.model.validate_instance`.
    """
    arr = np.asarray(cards, dtype=float)
    if arr.size == 0:
        raise EmptyInstance()
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"cards must have shape (n, 2), got {arr.shape}")
    bad = ~np.isfinite(arr)
    if bad.any():
        raise NonFiniteValue(arr[bad][0])
    return tuple((float(a), float(b)) for a, b in arr)


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_unit_interval(value, name, *, open_left=False, open_right=False):
    value = float(value)
    if math.isnan(value):
        raise ValueError(f"{name} is NaN")
    lo_ok = value > 0.0 if open_left else value >= 0.0
    hi_ok = value < 1.0 if open_right else value <= 1.0
    if not (lo_ok and hi_ok):
        lo = "(" if open_left else "["
        hi = ")" if open_right else "]"
        raise ValueError(f"{name} must lie in {lo}0, 1{hi}, got {value}")
    return value


def check_non_increasing(values, name):
    values = tuple(float(v) for v in values)
    for k, (a, b) in enumerate(zip(values, values[1:])):
        if b > a:
            raise ValueError(f"{name} must be non-increasing: entry {k + 1} ({b}) > entry {k} ({a})")
    return values


def check_permutation(order, n):
    order = tuple(int(k) for k in order)
    if sorted(order) != list(range(n)):
        raise ValueError(f"order must be a permutation of range({n}), got {order}")
    return order


def check_pmf(pmf, atol=1e-12):
    pmf = np.asarray(pmf, dtype=float)
    if pmf.ndim != 1 or pmf.size == 0:
        raise ValueError("pmf must be a non-empty 1-d array")
    if (pmf < 0).any() or not np.isfinite(pmf).all():
        raise ValueError("pmf entries must be finite and non-negative")
    total = math.fsum(pmf)
    if abs(total - 1.0) > atol:
        raise ValueError(f"pmf must sum to 1 (got {total!r})")
    return pmf
