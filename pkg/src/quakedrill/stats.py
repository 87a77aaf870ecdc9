"""Nonparametric analysis toolkit for pre/post training comparisons.

Provides the four estimators the assessment pipeline needs: sample
descriptives, the Shapiro-Wilk normality test (Royston's AS R94
approximation), the Wilcoxon signed-rank paired test with an exact
small-sample mode, and one-factor regression-method factor scores for
the six-item self-efficacy battery.
"""

from __future__ import annotations

from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

_STD_NORMAL = NormalDist()


@dataclass(frozen=True)
class Descriptives:
    n: int
    mean: float
    sd: float | None  # sample SD (n-1); None when n == 1
    min: float
    q1: float
    median: float
    q3: float
    max: float


@dataclass(frozen=True)
class ShapiroWilkResult:
    W: float
    p: float


@dataclass(frozen=True)
class WilcoxonResult:
    n_effective: int
    W_plus: float
    W_minus: float
    Z: float
    p: float
    exact: bool


@dataclass(frozen=True)
class FactorScores:
    loadings: tuple[float, ...]
    scores: tuple[float, ...]


def descriptives(samples) -> Descriptives:
    """Mean, sample SD, and type-7 (linear interpolation) quartiles."""
    x = np.asarray(list(samples), dtype=float)
    if x.size == 0:
        raise ValueError("descriptives require at least one sample")
    q1, med, q3 = np.quantile(x, [0.25, 0.5, 0.75])
    sd = float(np.std(x, ddof=1)) if x.size >= 2 else None
    return Descriptives(
        n=int(x.size),
        mean=float(np.mean(x)),
        sd=sd,
        min=float(x.min()),
        q1=float(q1),
        median=float(med),
        q3=float(q3),
        max=float(x.max()),
    )


# --- Shapiro-Wilk (AS R94) -------------------------------------------------

_C1 = (-2.706056, 4.434685, -2.071190, -0.147981, 0.221157, 0.0)
_C2 = (-3.582633, 5.682633, -1.752461, -0.293762, 0.042981, 0.0)
_C3 = (-0.0006714, 0.025054, -0.39978, 0.5440)
_C4 = (-0.0020322, 0.062767, -0.77857, 1.3822)
_C5 = (0.0038915, -0.083751, -0.31082, -1.5861)
_C6 = (0.0030302, -0.082676, -0.4803)
_G = (0.459, -2.273)


def shapiro_wilk(samples) -> ShapiroWilkResult:
    """Shapiro-Wilk W and its p-value for 3 <= n <= 5000.

    Follows Royston's approximation: order-statistic coefficients from
    normal scores with polynomial end corrections, then a normalizing
    transform of W whose parameters depend on n (exact for n == 3).
    """
    x = np.sort(np.asarray(list(samples), dtype=float))
    n = x.size
    if n < 3:
        raise ValueError("shapiro_wilk requires at least 3 samples")
    if n > 5000:
        raise ValueError("shapiro_wilk supports at most 5000 samples")
    if x[-1] == x[0]:
        raise ValueError("shapiro_wilk is undefined for zero-variance samples")

    m = np.array([_STD_NORMAL.inv_cdf((i - 0.375) / (n + 0.25))
                  for i in range(1, n + 1)])
    msq = float(m @ m)
    if n == 3:
        a = np.array([-np.sqrt(0.5), 0.0, np.sqrt(0.5)])
    else:
        u = 1.0 / np.sqrt(n)
        an = m[-1] / np.sqrt(msq) + np.polyval(_C1, u)
        a = np.empty(n)
        if n > 5:
            an1 = m[-2] / np.sqrt(msq) + np.polyval(_C2, u)
            phi = (msq - 2 * m[-1] ** 2 - 2 * m[-2] ** 2) / \
                  (1 - 2 * an ** 2 - 2 * an1 ** 2)
            a[2:-2] = m[2:-2] / np.sqrt(phi)
            a[1], a[-2] = -an1, an1
        else:
            phi = (msq - 2 * m[-1] ** 2) / (1 - 2 * an ** 2)
            a[1:-1] = m[1:-1] / np.sqrt(phi)
        a[0], a[-1] = -an, an

    xc = x - x.mean()
    w_stat = float((a @ x) ** 2 / (xc @ xc))
    w_stat = min(w_stat, 1.0)

    if n == 3:
        p = 1.909859 * (np.arcsin(np.sqrt(w_stat)) - 1.047198)
        return ShapiroWilkResult(w_stat, float(min(max(p, 0.0), 1.0)))

    if n <= 11:
        gamma = np.polyval(_G, n)
        inner = gamma - np.log1p(-w_stat)
        if inner <= 0:  # W so small the transform leaves its domain
            return ShapiroWilkResult(w_stat, 0.0)
        y = -np.log(inner)
        mu = np.polyval(_C3, n)
        sigma = np.exp(np.polyval(_C4, n))
    else:
        y = np.log1p(-w_stat)
        logn = np.log(n)
        mu = np.polyval(_C5, logn)
        sigma = np.exp(np.polyval(_C6, logn))

    p = 1.0 - _STD_NORMAL.cdf((y - mu) / sigma)
    return ShapiroWilkResult(w_stat, float(min(max(p, 0.0), 1.0)))


# --- Wilcoxon signed-rank --------------------------------------------------

def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=float)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _signed_rank_counts(n: int) -> np.ndarray:
    """counts[s] = number of subsets of {1..n} whose ranks sum to s."""
    total = n * (n + 1) // 2
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for k in range(1, n + 1):
        shifted = np.zeros_like(counts)
        shifted[k:] = counts[:-k]
        counts = counts + shifted
    return counts


def wilcoxon_signed_rank(pre, post) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are discarded; absolute differences are ranked with
    average ranks for ties. With at most 25 effective pairs and no tied
    magnitudes the two-sided p comes from the exact null distribution of
    the rank sum; otherwise from the normal approximation with the tie
    correction, where p carries the usual 0.5 continuity correction (it
    keeps the approximation within 0.05 of the exact probability down to
    six pairs). Z is the plain standardized statistic without the
    correction, signed so that a shift toward larger post values is
    negative, matching the convention of reporting improvements as
    negative Z.
    """
    a = np.asarray(list(pre), dtype=float)
    b = np.asarray(list(post), dtype=float)
    if a.size != b.size:
        raise ValueError("pre and post must have the same length")
    if a.size == 0:
        raise ValueError("need at least one pair")
    d = b - a
    d = d[d != 0]
    n = d.size
    if n == 0:
        raise ValueError("all differences are zero")

    magnitudes = np.abs(d)
    ranks = _average_ranks(magnitudes)
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())

    _, tie_counts = np.unique(magnitudes, return_counts=True)
    has_ties = bool((tie_counts > 1).any())

    expectation = n * (n + 1) / 4.0
    variance = n * (n + 1) * (2 * n + 1) / 24.0 - \
        float(((tie_counts ** 3 - tie_counts) / 48.0).sum())
    z = (w_minus - expectation) / np.sqrt(variance)

    exact = n <= 25 and not has_ties
    if exact:
        counts = _signed_rank_counts(n)
        w_obs = int(round(min(w_plus, w_minus)))
        cdf = int(counts[:w_obs + 1].sum())
        p = min(1.0, 2.0 * cdf / float(2 ** n))
    else:
        z_corrected = max(abs(w_minus - expectation) - 0.5, 0.0) / np.sqrt(variance)
        p = 2.0 * (1.0 - _STD_NORMAL.cdf(z_corrected))
    return WilcoxonResult(n, w_plus, w_minus, float(z), float(p), exact)


# --- one-factor regression scores ------------------------------------------

def factor_scores(responses) -> FactorScores:
    """Fit a single factor and return regression-method factor scores.

    Columns are standardized; loadings come from iterated principal-axis
    factoring of the correlation matrix (communalities start at squared
    multiple correlations, tolerance 1e-6, at most 200 iterations), with
    their sign fixed so the loadings sum is nonnegative. Scores are
    z @ inv(R) @ loadings and are centered on zero by construction.
    """
    x = np.asarray(responses, dtype=float)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError("responses must be an n x m matrix with m >= 2")
    n = x.shape[0]
    if n < 10:
        raise ValueError("factor scoring requires at least 10 respondents")
    stds = x.std(axis=0, ddof=1)
    if (stds == 0).any():
        bad = [int(i) for i in np.flatnonzero(stds == 0)]
        raise ValueError(f"zero-variance column(s): {bad}")

    z = (x - x.mean(axis=0)) / stds
    corr = np.corrcoef(x, rowvar=False)
    try:
        corr_inv = np.linalg.inv(corr)
    except np.linalg.LinAlgError:
        raise ValueError("correlation matrix is singular")

    communalities = 1.0 - 1.0 / np.diag(corr_inv)
    loadings = None
    for _ in range(200):
        reduced = corr.copy()
        np.fill_diagonal(reduced, communalities)
        eigvals, eigvecs = np.linalg.eigh(reduced)
        loadings = eigvecs[:, -1] * np.sqrt(max(eigvals[-1], 0.0))
        updated = loadings ** 2
        if np.max(np.abs(updated - communalities)) < 1e-6:
            communalities = updated
            break
        communalities = updated
    else:
        raise ValueError("principal-axis factoring did not converge")

    if loadings.sum() < 0:
        loadings = -loadings
    weights = np.linalg.solve(corr, loadings)
    scores = z @ weights
    return FactorScores(tuple(float(v) for v in loadings),
                        tuple(float(v) for v in scores))
