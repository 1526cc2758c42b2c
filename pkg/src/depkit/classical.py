"""Product-moment and rank correlations, conditional correlation, serial
correlation of levels and squares, and quadrant-dependence diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSampleError, RegionTooSmallError
from .samples import PairedSample, SeriesSample, lag_pairs, normal_scores, ranks

__all__ = [
    "Region",
    "QuadrantMap",
    "pearson",
    "spearman",
    "kendall",
    "van_der_waerden",
    "conditional_correlation",
    "acf",
    "quadrant_map",
    "hoeffding_covariance_identity_check",
]

# above this size kendall switches to the merge-count path
_KENDALL_MERGE_THRESHOLD = 512


@dataclass(frozen=True)
class Region:
    """Axis-aligned box; use +-inf for unbounded sides."""

    x_low: float = -np.inf
    x_high: float = np.inf
    y_low: float = -np.inf
    y_high: float = np.inf

    def __post_init__(self):
        if not (self.x_low < self.x_high and self.y_low < self.y_high):
            raise ValueError("region bounds must satisfy low < high")

    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return (
            (x >= self.x_low) & (x <= self.x_high) & (y >= self.y_low) & (y <= self.y_high)
        )


@dataclass(frozen=True)
class QuadrantMap:
    """Grid of F_xy(x, y) - F_x(x) F_y(y) gaps on empirical distributions."""

    x_grid: np.ndarray
    y_grid: np.ndarray
    values: np.ndarray  # shape (len(x_grid), len(y_grid))


def _corr(x: np.ndarray, y: np.ndarray) -> float:
    dx = x - x.mean()
    dy = y - y.mean()
    denom = np.sqrt(np.sum(dx * dx) * np.sum(dy * dy))
    if denom <= 0.0:
        raise DegenerateSampleError("zero variance in at least one coordinate")
    return float(np.sum(dx * dy) / denom)


def pearson(p: PairedSample) -> float:
    """Product-moment correlation."""
    return _corr(p.x, p.y)


def spearman(p: PairedSample) -> float:
    """Rank correlation: Pearson applied to average ranks."""
    return _corr(ranks(p.x).scores, ranks(p.y).scores)


def van_der_waerden(p: PairedSample) -> float:
    """Normal-scores correlation: Pearson applied to normal scores."""
    return _corr(normal_scores(p.x).scores, normal_scores(p.y).scores)


def _kendall_numerator_bruteforce(x: np.ndarray, y: np.ndarray) -> int:
    """Concordant minus discordant over all pairs; ties contribute zero."""
    sx = np.sign(x[:, None] - x[None, :])
    sy = np.sign(y[:, None] - y[None, :])
    prod = sx * sy
    return int(np.sum(prod[np.triu_indices(len(x), k=1)]))


def _count_inversions(a: np.ndarray) -> int:
    """Inversions (a_i > a_j with i < j) by merge counting."""
    a = list(a)
    total = 0
    work = a[:]
    width = 1
    n = len(a)
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if a[i] <= a[j]:
                    work[k] = a[i]
                    i += 1
                else:
                    work[k] = a[j]
                    j += 1
                    total += mid - i
                k += 1
            work[k:hi] = a[i:mid] if i < mid else a[j:hi]
        a, work = work, a
        width *= 2
    return total


def _tie_pair_count(v: np.ndarray) -> int:
    _, counts = np.unique(v, return_counts=True)
    return int(np.sum(counts * (counts - 1) // 2))


def _kendall_numerator_merge(x: np.ndarray, y: np.ndarray) -> int:
    """C - D via lexicographic sort plus merge counting (O(n log n)).

    With n0 total pairs, n1/n2 pairs tied in x/y and n3 tied in both:
    C - D = n0 - n1 - n2 + n3 - 2 * (discordant pairs), where discordant
    pairs are inversions of y after sorting by (x, y).
    """
    n = len(x)
    order = np.lexsort((y, x))
    ys = y[order]
    n0 = n * (n - 1) // 2
    n1 = _tie_pair_count(x)
    n2 = _tie_pair_count(y)
    n3 = _tie_pair_count(x + 1j * y)  # joint ties
    dis = _count_inversions(ys)
    return n0 - n1 - n2 + n3 - 2 * dis


def kendall(p: PairedSample) -> float:
    """Kendall's tau_a: (C - D) / (n(n-1)/2); ties count as neither."""
    n = p.n
    if n > _KENDALL_MERGE_THRESHOLD:
        num = _kendall_numerator_merge(p.x, p.y)
    else:
        num = _kendall_numerator_bruteforce(p.x, p.y)
    return num / (n * (n - 1) / 2)


def conditional_correlation(p: PairedSample, r: Region) -> float:
    """Pearson correlation of the pairs falling inside region r.

    Means and variances are recomputed from the conditioned pairs only,
    which is the source of the well-known tail bias for Gaussian data.
    """
    mask = r.contains(p.x, p.y)
    if int(mask.sum()) < 3:
        raise RegionTooSmallError(f"only {int(mask.sum())} pairs inside region, need >= 3")
    return _corr(p.x[mask], p.y[mask])


def acf(s: SeriesSample, k: int, squared: bool = False) -> float:
    """Lag-k serial correlation of the series, optionally of its squares."""
    values = s.values**2 if squared else s.values
    return pearson(lag_pairs(SeriesSample(values), k))


def quadrant_map(p: PairedSample, x_grid, y_grid) -> QuadrantMap:
    """Empirical quadrant-dependence gap F_xy - F_x F_y on a grid."""
    xg = np.atleast_1d(np.asarray(x_grid, dtype=float))
    yg = np.atleast_1d(np.asarray(y_grid, dtype=float))
    if xg.size == 0 or yg.size == 0:
        raise ValueError("grid must be non-empty")
    ix = (p.x[None, :] <= xg[:, None]).astype(float)  # (gx, n)
    iy = (p.y[None, :] <= yg[:, None]).astype(float)  # (gy, n)
    joint = ix @ iy.T / p.n
    values = joint - np.outer(ix.mean(axis=1), iy.mean(axis=1))
    return QuadrantMap(xg, yg, values)


def hoeffding_covariance_identity_check(p: PairedSample) -> float:
    """Residual of cov(X,Y) = integral of (F_xy - F_x F_y) over the plane.

    Both sides are evaluated for the empirical measure (covariance with the
    population divisor n; the integrand is piecewise constant between order
    statistics, so the integral is an exact finite sum). The identity holds
    exactly, so the residual is pure floating-point noise.
    """
    x, y = p.x, p.y
    cov = float(np.mean(x * y) - x.mean() * y.mean())
    ux = np.unique(x)
    uy = np.unique(y)
    if len(ux) < 2 or len(uy) < 2:
        return abs(cov)  # degenerate support: integral is 0
    qm = quadrant_map(p, ux[:-1], uy[:-1])
    cell = np.outer(np.diff(ux), np.diff(uy))
    integral = float(np.sum(qm.values * cell))
    return abs(cov - integral)
