"""Non-parametric comparison tests with exact small-sample p-values.

Wilcoxon signed-rank (paired) and Mann-Whitney U (unpaired) both report
two-sided p-values: exact by full enumeration for small samples (sign
patterns for Wilcoxon, arrangements for Mann-Whitney), tie-corrected normal
approximations above the exact range. Effect sizes are the matched-pairs
rank-biserial correlation and Cliff's delta; Cohen's d (pooled, Bessel
corrected) and Bonferroni correction round out the toolkit. Zero paired
differences are dropped before ranking, the classic treatment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import combinations
from typing import Sequence

from .errors import DegenerateSampleError

EXACT_LIMIT = 12  # exact enumeration up to this many observations


@dataclass(frozen=True)
class StatResult:
    test: str
    statistic: float
    p_value: float
    effect_name: str
    effect: float
    n_a: int
    n_b: int
    exact: bool = False
    alpha_corrected: float | None = None
    significant: bool | None = None


def _rankdata(values: Sequence[float]) -> list[float]:
    """Average ranks (1-based) with ties sharing their midrank."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        midrank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = midrank
        i = j + 1
    return ranks


def _two_sided_from_tails(p_low: float, p_high: float) -> float:
    return min(1.0, 2.0 * min(p_low, p_high))


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def wilcoxon_signed_rank(sample_a: Sequence[float], sample_b: Sequence[float]) -> StatResult:
    """Paired Wilcoxon signed-rank test with matched-pairs rank-biserial r.

    Differences of zero are dropped before ranking; if all differences are
    zero the sample is degenerate. For n <= 12 remaining pairs the two-sided
    p-value enumerates all 2^n sign assignments over the observed ranks;
    larger samples use the tie-corrected normal approximation.
    """
    if len(sample_a) != len(sample_b):
        raise ValueError("paired samples must have equal length")
    diffs = [a - b for a, b in zip(sample_a, sample_b) if a - b != 0]
    n = len(diffs)
    if n == 0:
        raise DegenerateSampleError("all paired differences are zero")
    ranks = _rankdata([abs(d) for d in diffs])
    w_plus = sum(r for d, r in zip(diffs, ranks) if d > 0)
    w_minus = sum(r for d, r in zip(diffs, ranks) if d < 0)
    effect = (w_plus - w_minus) / (w_plus + w_minus)

    if n <= EXACT_LIMIT:
        total = 1 << n
        at_most = 0
        at_least = 0
        for mask in range(total):
            w = 0.0
            for i in range(n):
                if mask >> i & 1:
                    w += ranks[i]
            if w <= w_plus + 1e-12:
                at_most += 1
            if w >= w_plus - 1e-12:
                at_least += 1
        p = _two_sided_from_tails(at_most / total, at_least / total)
        exact = True
    else:
        mean = n * (n + 1) / 4.0
        tie_term = _tie_correction([abs(d) for d in diffs]) / 48.0
        var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term
        z = (w_plus - mean) / math.sqrt(var)
        p = min(1.0, 2.0 * _normal_sf(abs(z)))
        exact = False
    return StatResult(
        "wilcoxon_signed_rank", w_plus, p, "rank_biserial_r", effect, n, n, exact
    )


def _tie_correction(values: Sequence[float]) -> float:
    counts: dict[float, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    return float(sum(t**3 - t for t in counts.values()))


def _u_statistic(a: Sequence[float], b: Sequence[float]) -> float:
    u = 0.0
    for x in a:
        for y in b:
            if x > y:
                u += 1.0
            elif x == y:
                u += 0.5
    return u


def cliffs_delta(sample_a: Sequence[float], sample_b: Sequence[float]) -> float:
    """Direct pair-counting Cliff's delta, in [-1, 1]."""
    gt = sum(1 for x in sample_a for y in sample_b if x > y)
    lt = sum(1 for x in sample_a for y in sample_b if x < y)
    return (gt - lt) / (len(sample_a) * len(sample_b))


def mann_whitney_u(sample_a: Sequence[float], sample_b: Sequence[float]) -> StatResult:
    """Mann-Whitney U test (two-sided) with Cliff's delta effect size.

    For n_a + n_b <= 12 the p-value enumerates all C(n_a+n_b, n_a)
    assignments of the pooled observations to group A; larger samples use
    the tie-corrected normal approximation.
    """
    n_a, n_b = len(sample_a), len(sample_b)
    if n_a == 0 or n_b == 0:
        raise DegenerateSampleError("both samples must be non-empty")
    u_obs = _u_statistic(sample_a, sample_b)
    delta = cliffs_delta(sample_a, sample_b)

    total_n = n_a + n_b
    if total_n <= EXACT_LIMIT:
        pooled = list(sample_a) + list(sample_b)
        total = 0
        at_most = 0
        at_least = 0
        indices = range(total_n)
        for combo in combinations(indices, n_a):
            chosen = set(combo)
            ga = [pooled[i] for i in combo]
            gb = [pooled[i] for i in indices if i not in chosen]
            u = _u_statistic(ga, gb)
            total += 1
            if u <= u_obs + 1e-12:
                at_most += 1
            if u >= u_obs - 1e-12:
                at_least += 1
        p = _two_sided_from_tails(at_most / total, at_least / total)
        exact = True
    else:
        mean = n_a * n_b / 2.0
        tie = _tie_correction(list(sample_a) + list(sample_b))
        var = (n_a * n_b / 12.0) * (total_n + 1 - tie / (total_n * (total_n - 1)))
        if var <= 0:
            raise DegenerateSampleError("all pooled observations are identical")
        z = (u_obs - mean) / math.sqrt(var)
        p = min(1.0, 2.0 * _normal_sf(abs(z)))
        exact = False
    return StatResult("mann_whitney_u", u_obs, p, "cliffs_delta", delta, n_a, n_b, exact)


def cohens_d(sample_a: Sequence[float], sample_b: Sequence[float]) -> StatResult:
    """Cohen's d with pooled, Bessel-corrected standard deviation."""
    n_a, n_b = len(sample_a), len(sample_b)
    if n_a < 2 or n_b < 2:
        raise DegenerateSampleError("Cohen's d needs at least two observations per sample")
    mean_a = sum(sample_a) / n_a
    mean_b = sum(sample_b) / n_b
    var_a = sum((x - mean_a) ** 2 for x in sample_a) / (n_a - 1)
    var_b = sum((x - mean_b) ** 2 for x in sample_b) / (n_b - 1)
    pooled = ((n_a - 1) * var_a + (n_b - 1) * var_b) / (n_a + n_b - 2)
    if pooled == 0:
        raise DegenerateSampleError("pooled variance is zero")
    d = (mean_a - mean_b) / math.sqrt(pooled)
    return StatResult("cohens_d", d, float("nan"), "d", d, n_a, n_b, True)


def bonferroni(alpha: float, m: int) -> float:
    """Family-wise corrected alpha for m comparisons."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return alpha / m


def apply_bonferroni(results: Sequence[StatResult], alpha: float, m: int | None = None) -> list[StatResult]:
    """Flag each result significant iff p is strictly below alpha/m."""
    corrected = bonferroni(alpha, m if m is not None else len(results))
    return [
        replace(r, alpha_corrected=corrected, significant=bool(r.p_value < corrected))
        for r in results
    ]
