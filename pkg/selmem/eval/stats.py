"""Rank correlation and combined significance.

License:
    MIT License

    Permission is hereby granted, free of charge, to any person obtaining a copy
    of this software and associated documentation files (the "Software"), to deal
    in the Software without restriction, including without limitation the rights
    to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
    copies of the Software, and to permit persons to whom the Software is
    furnished to do so, subject to the following conditions:

    The above copyright notice and this permission notice shall be included in all
    copies or substantial portions of the Software.

    THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
    IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
    FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
    AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
    LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
    OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
    SOFTWARE.

"""
import functools
import math

from typing import Sequence, Tuple

import numpy as np

from scipy import special, stats

from ..common import *

# Largest sample size whose p-value comes from the exact permutation distribution
EXACT_PVALUE_MAX_N = 10

# Smallest p-value reported, since a p of 0 can't be combined
MIN_PVALUE = np.finfo(np.float64).tiny

def _check_pair(xs, ys) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(xs, dtype = np.float64)
    y = np.asarray(ys, dtype = np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise DegenerateInputError(f"Sequences must have equal lengths, got {x.shape} and {y.shape}")
    if x.size < 3:
        raise DegenerateInputError(f"Need at least 3 pairs, got {x.size}")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateInputError("Rank correlation of a constant sequence is undefined")
    return x, y

def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    rho = float(np.dot(da, db) / math.sqrt(np.dot(da, da) * np.dot(db, db)))
    return min(1.0, max(-1.0, rho))

def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman's rho: Pearson correlation of the average ranks.

    Raises:
        DegenerateInputError: Lengths differ, fewer than 3 pairs, or an input is constant.
    """
    x, y = _check_pair(xs, ys)
    return _pearson(stats.rankdata(x), stats.rankdata(y))

@functools.lru_cache(maxsize = None)
def _rank_product_counts(n: int) -> np.ndarray:
    """Number of permutations p of 1..n for every value of sum(i * p(i)).

    Dynamic program over the set of already used values; entry t of the
    result counts the permutations with sum t.
    """
    top = sum(i * i for i in range(1, n + 1))
    counts = {0: np.zeros(top + 1, dtype = np.int64)}
    counts[0][0] = 1
    for mask in range(1 << n):
        current = counts.pop(mask, None)
        if current is None:
            continue
        position = bin(mask).count("1") + 1
        if position > n:
            counts[mask] = current
            continue
        for value in range(n):
            if mask & (1 << value):
                continue
            shift = position * (value + 1)
            target = counts.setdefault(mask | (1 << value), np.zeros(top + 1, dtype = np.int64))
            target[shift:] += current[:top + 1 - shift]
    return counts[(1 << n) - 1]

def _exact_pvalue(rho: float, n: int) -> float:
    counts = _rank_product_counts(n)
    t = np.arange(counts.size)
    squares = n * (n + 1) * (2 * n + 1) / 6
    null_rho = 1.0 - 6.0 * (2 * squares - 2 * t) / (n * (n * n - 1))
    extreme = np.abs(null_rho) >= abs(rho) - 1e-12
    return float(counts[extreme].sum() / counts.sum())

def spearman_pvalue(rho: float, n: int, ties: bool = False) -> float:
    """Two-sided p-value of a Spearman correlation of `n` pairs.

    Untied samples of at most 10 pairs use the exact permutation
    distribution, everything else the t approximation with n - 2 degrees
    of freedom.
    """
    if n < 3:
        raise DegenerateInputError(f"Need at least 3 pairs, got {n}")
    if n <= EXACT_PVALUE_MAX_N and not ties:
        return max(_exact_pvalue(rho, n), MIN_PVALUE)
    if abs(rho) >= 1.0:
        return MIN_PVALUE
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return max(float(2.0 * stats.t.sf(abs(t), n - 2)), MIN_PVALUE)

def spearman_test(xs: Sequence[float], ys: Sequence[float]) -> Tuple[float, float]:
    """(rho, two-sided p) of two sequences."""
    x, y = _check_pair(xs, ys)
    rho = _pearson(stats.rankdata(x), stats.rankdata(y))
    ties = np.unique(x).size < x.size or np.unique(y).size < y.size
    return rho, spearman_pvalue(rho, x.size, ties)

def fisher_combined(pvalues: Sequence[float]) -> float:
    """Fisher's combination of independent p-values.

    X = -2 * sum(ln p) follows a chi-square law with 2k degrees of freedom;
    its survival function is the regularized upper incomplete gamma Q(k, X/2).

    Raises:
        DomainError: No p-values, or one outside (0, 1].
    """
    p = np.asarray(pvalues, dtype = np.float64)
    if p.size == 0:
        raise DomainError("Need at least one p-value")
    if np.any(~np.isfinite(p)) or np.any(p <= 0.0) or np.any(p > 1.0):
        raise DomainError("p-values must be in (0, 1]")
    x = -2.0 * np.sum(np.log(p))
    return float(special.gammaincc(p.size, x / 2.0))

def significance_label(p: float) -> str:
    if p < 1e-100:
        return "**"
    if p < 1e-10:
        return "*"
    return "ns"
