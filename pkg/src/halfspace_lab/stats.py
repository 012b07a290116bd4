"""Interval estimates shared by the experiment modules."""
from __future__ import annotations

import math

from scipy.stats import binomtest, chisquare

Z95 = 1.959963984540054


def wilson(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n <= 0:
        return (0.0, 1.0)
    ci = binomtest(k, n).proportion_ci(confidence_level=confidence, method="wilson")
    return (float(ci.low), float(ci.high))


def newcombe_diff(k1: int, n1: int, k2: int, n2: int) -> tuple[float, float]:
    """Newcombe hybrid score interval for p1 - p2 built from two Wilson intervals."""
    p1, p2 = k1 / n1, k2 / n2
    l1, u1 = wilson(k1, n1)
    l2, u2 = wilson(k2, n2)
    d = p1 - p2
    lo = d - math.sqrt((p1 - l1) ** 2 + (u2 - p2) ** 2)
    hi = d + math.sqrt((u1 - p1) ** 2 + (p2 - l2) ** 2)
    return (lo, hi)


def chisquare_pvalue(observed, expected) -> float:
    """Pearson chi-square p-value; ``expected`` is rescaled to the observed total."""
    tot_o = float(sum(observed))
    tot_e = float(sum(expected))
    exp = [e * tot_o / tot_e for e in expected]
    return float(chisquare(list(observed), exp).pvalue)
