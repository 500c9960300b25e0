"""Shared statistics: Spearman correlation with tie handling, SEM, significance."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import stdtr

from .numerics import make_rng

SIGNIFICANCE_LEVEL = 0.01
PERMUTATION_BUDGET = 100_000


@dataclass(frozen=True)
class CorrelationResult:
    rho: float
    p_value: float
    n: int

    @property
    def significant(self) -> bool:
        return self.p_value < SIGNIFICANCE_LEVEL


def rankdata_average(xs: np.ndarray) -> np.ndarray:
    """Ranks starting at 1; tied values share the average of their ranks."""
    xs = np.asarray(xs, dtype=float)
    order = np.argsort(xs, kind="stable")
    ranks = np.empty(len(xs))
    sorted_xs = xs[order]
    i = 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and sorted_xs[j + 1] == sorted_xs[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _pearson(xs: np.ndarray, ys: np.ndarray) -> float:
    xc = xs - xs.mean()
    yc = ys - ys.mean()
    denom = math.sqrt((xc @ xc) * (yc @ yc))
    return float(np.clip((xc @ yc) / denom, -1.0, 1.0))


def _rho_of_ranks(rx: np.ndarray, ys: np.ndarray) -> float:
    return _pearson(rx, rankdata_average(ys))


def spearman(xs, ys) -> CorrelationResult | None:
    """Spearman rank correlation with average-rank ties.

    Returns None when the correlation is undefined (n < 3 or a constant
    series).  The p-value is two-sided: a Student-t approximation for
    n >= 10, an exact or sampled permutation test below.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("spearman expects two equal-length 1-d series")
    n = len(xs)
    if n < 3 or len(np.unique(xs)) < 2 or len(np.unique(ys)) < 2:
        return None
    rx = rankdata_average(xs)
    rho = _rho_of_ranks(rx, ys)
    if n >= 10:
        p = _t_approx_p(rho, n)
    else:
        p = _permutation_p(rx, ys, abs(rho))
    return CorrelationResult(rho=rho, p_value=p, n=n)


def _t_approx_p(rho: float, n: int) -> float:
    if abs(rho) >= 1.0:
        return 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return float(2.0 * stdtr(n - 2, -abs(t)))


def _permutation_p(rx: np.ndarray, ys: np.ndarray, abs_rho: float) -> float:
    """Two-sided permutation p-value, exact when n! fits the budget."""
    n = len(ys)
    if math.factorial(n) <= PERMUTATION_BUDGET:
        hits = 0
        total = 0
        for perm in itertools.permutations(range(n)):
            r = _rho_of_ranks(rx, ys[list(perm)])
            hits += abs(r) >= abs_rho - 1e-12
            total += 1
        return hits / total
    rng = make_rng(0)
    hits = 1  # count the observed arrangement
    for _ in range(PERMUTATION_BUDGET):
        r = _rho_of_ranks(rx, ys[rng.permutation(n)])
        hits += abs(r) >= abs_rho - 1e-12
    return hits / (PERMUTATION_BUDGET + 1)


def sem(values) -> float | None:
    """Standard error of the mean (sample s.d. over sqrt(n)); None for n < 2."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return None
    return float(values.std(ddof=1) / math.sqrt(values.size))
