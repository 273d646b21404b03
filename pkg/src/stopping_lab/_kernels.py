"""Compiled per-trial loops for the Monte Carlo engine."""
from __future__ import annotations

import numpy as np
from numba import njit

from .schedule import NO_BLOCK, UNBOUNDED


@njit(nogil=True, cache=True)
def block_rank_kernel(down, up, counts, labels, n_ranks, success, n_special, accepted):
    """Play the block-rank rule on ``T`` games at once.

    ``down[t]`` lists face-down values in arrival order.  ``counts[t, b]``
    cards arrive in time band ``b`` (bands ordered from late to early in
    processing order), and ``labels[b]`` is the block used in that band.
    ``n_ranks`` is how many of the largest face-up values any block needs.
    """
    T, n = down.shape
    top = np.empty(max(n_ranks, 1))
    for t in range(T):
        for k in range(top.size):
            top[k] = -np.inf
        for c in range(n):
            v = up[t, c]
            if n_ranks > 0 and v > top[n_ranks - 1]:
                k = n_ranks - 1
                while k > 0 and top[k - 1] < v:
                    top[k] = top[k - 1]
                    k -= 1
                top[k] = v
        pos = 0
        running = -np.inf
        acc = -1
        specials = 0
        for b in range(labels.size):
            lab = labels[b]
            for _ in range(counts[t, b]):
                v = down[t, pos]
                if v > running:
                    if lab != NO_BLOCK:
                        if lab == UNBOUNDED or lab >= n_ranks:
                            thr = -np.inf
                        else:
                            thr = top[lab]
                        if v > thr:
                            specials += 1
                            if acc < 0:
                                acc = pos
                    running = v
                pos += 1
        n_special[t] = specials
        accepted[t] = acc
        success[t] = acc >= 0 and down[t, acc] == running
