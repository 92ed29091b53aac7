"""Continuous knapsack LP: max c.p subject to 0 <= p <= u and a.p <= b."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["KnapsackLp", "solve_knapsack"]


@dataclass(frozen=True)
class KnapsackLp:
    """Gains c >= 0, budget weights a >= 0, box bounds u >= 0, budget b >= 0."""

    c: np.ndarray
    a: np.ndarray
    u: np.ndarray
    b: float

    def __post_init__(self):
        for name in ("c", "a", "u"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 1 or not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ValueError(f"{name} must be a finite nonnegative vector")
            object.__setattr__(self, name, arr)
        if not (len(self.c) == len(self.a) == len(self.u)):
            raise ValueError("c, a, u must have equal length")
        if not np.isfinite(self.b) or self.b < 0:
            raise ValueError("budget must be finite and nonnegative")


def solve_knapsack(prob: KnapsackLp) -> np.ndarray:
    """Exact greedy solution by descending gain/weight ratio.

    Entries with zero budget weight are set to their box bound first (they
    consume no budget); the rest are filled in ratio order until the budget
    binds, with at most one fractional entry.
    """
    c, a, u, b = prob.c, prob.a, prob.u, prob.b
    p = np.zeros_like(c)
    free = a == 0
    p[free] = u[free]

    idx = np.flatnonzero(~free & (c > 0))
    # stable ratio sort, index tie-break for determinism
    order = idx[np.lexsort((idx, -(c[idx] / a[idx])))]
    remaining = b
    for k in order:
        if remaining <= 0:
            break
        take = min(u[k], remaining / a[k])
        p[k] = take
        remaining -= take * a[k]
    return p
