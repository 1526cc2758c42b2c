"""Tests aggregating local dependence evidence: correlation integral / BDS,
the HHG distance-rank contingency test, and the CANOVA neighborhood sum of
squares."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import LagError, ParamError, SampleTooSmallError
from .resampling import TestReport, build_report, replicate_rng
from .samples import PairedSample, SeriesSample, ranks

__all__ = [
    "EmbeddingSpec",
    "correlation_integral",
    "bds_statistic",
    "bds_test",
    "hhg_statistic",
    "hhg_test",
    "canova_statistic",
    "canova_test",
]


@dataclass(frozen=True)
class EmbeddingSpec:
    """Delay-embedding dimension and sup-norm radius for the correlation
    integral. epsilon is absolute; a common choice is the series sd."""

    k: int
    epsilon: float

    def __post_init__(self):
        if self.k < 1:
            raise ParamError("embedding dimension k must be >= 1")
        if self.epsilon <= 0:
            raise ParamError("epsilon must be positive")


def _close_matrix(values: np.ndarray, epsilon: float) -> np.ndarray:
    return np.abs(values[:, None] - values[None, :]) < epsilon


def _correlation_integral_from_close(close: np.ndarray, k: int) -> float:
    """Fraction of delay-vector pairs within sup-norm epsilon.

    A pair of k-dimensional delay vectors is close iff all k coordinate
    pairs are close, i.e. the AND of k shifted slices of the scalar
    closeness matrix.
    """
    n = close.shape[0]
    m = n - k + 1  # number of delay vectors
    pairwise = close[k - 1 :, k - 1 :].copy()
    for shift in range(1, k):
        pairwise &= close[k - 1 - shift : n - shift, k - 1 - shift : n - shift]
    hits = (int(np.count_nonzero(pairwise)) - m) // 2  # strict upper pairs
    return hits / (m * (m - 1) / 2)


def correlation_integral(s: SeriesSample, spec: EmbeddingSpec) -> float:
    """C_{k,n}(eps) over distinct delay-vector pairs; in [0, 1]."""
    if s.n <= spec.k:
        raise LagError(f"series length {s.n} too short for embedding k={spec.k}")
    return _correlation_integral_from_close(_close_matrix(s.values, spec.epsilon), spec.k)


def bds_statistic(s: SeriesSample, spec: EmbeddingSpec) -> float:
    """Departure from the iid product law: C_k(eps) - C_1(eps)^k."""
    if s.n <= spec.k + 1:
        raise LagError(f"series length {s.n} too short for k={spec.k}")
    close = _close_matrix(s.values, spec.epsilon)
    c_k = _correlation_integral_from_close(close, spec.k)
    c_1 = _correlation_integral_from_close(close, 1)
    return c_k - c_1**spec.k


def bds_test(
    s: SeriesSample, spec: EmbeddingSpec, replicates: int = 999, seed: int = 0
) -> TestReport:
    """Permutation test of the iid null: |C_k - C_1^k| large rejects.

    The scalar closeness matrix is built once and re-indexed per replicate.
    """
    if replicates < 99:
        raise ParamError("need at least 99 replicates")
    close = _close_matrix(s.values, spec.epsilon)

    def stat(mat):
        return abs(
            _correlation_integral_from_close(mat, spec.k)
            - _correlation_integral_from_close(mat, 1) ** spec.k
        )

    observed = stat(close)
    draws = np.empty(replicates)
    for i in range(replicates):
        perm = replicate_rng(seed, i).permutation(s.n)
        draws[i] = stat(close[np.ix_(perm, perm)])
    settings = {"test": "bds", "k": spec.k, "epsilon": spec.epsilon, "n": s.n}
    return build_report(observed, draws, "permutation", seed, settings, tail="right")


@numba.njit(cache=True)
def _hhg_sum(dx, dy):  # pragma: no cover - exercised via hhg_statistic
    n = dx.shape[0]
    total = 0.0
    for i in range(n):
        for j in range(n):
            if j == i:
                continue
            rx = dx[i, j]
            ry = dy[i, j]
            a11 = 0
            a12 = 0
            a21 = 0
            a22 = 0
            for k in range(n):
                if k == i or k == j:
                    continue
                inx = dx[i, k] <= rx
                iny = dy[i, k] <= ry
                if inx and iny:
                    a11 += 1
                elif inx:
                    a12 += 1
                elif iny:
                    a21 += 1
                else:
                    a22 += 1
            r1 = a11 + a12
            r2 = a21 + a22
            c1 = a11 + a21
            c2 = a12 + a22
            denom = r1 * r2 * c1 * c2
            if denom > 0:
                det = a11 * a22 - a12 * a21
                total += (n - 2) * det * det / denom
    return total


def _hhg_distances(p: PairedSample, metric: str):
    if metric == "euclidean":
        dx = np.abs(p.x[:, None] - p.x[None, :])
        dy = np.abs(p.y[:, None] - p.y[None, :])
    elif metric == "rank":
        rx = ranks(p.x).scores
        ry = ranks(p.y).scores
        dx = np.abs(rx[:, None] - rx[None, :])
        dy = np.abs(ry[:, None] - ry[None, :])
    else:
        raise ParamError(f"unknown metric {metric!r}")
    return dx, dy


def hhg_statistic(p: PairedSample, metric: str = "euclidean") -> float:
    """Sum over ordered point pairs (i, j) of the 2x2 chi-square built from
    the radii R_x = d(x_i, x_j), R_y = d(y_i, y_j) on the other n-2 points.

    Tables with a zero margin contribute 0.
    """
    if p.n < 4:
        raise SampleTooSmallError("hhg needs n >= 4")
    dx, dy = _hhg_distances(p, metric)
    return float(_hhg_sum(dx, dy))


def hhg_test(
    p: PairedSample,
    metric: str = "euclidean",
    replicates: int = 999,
    seed: int = 0,
) -> TestReport:
    """Permutation test on the HHG statistic (right tail)."""
    if replicates < 99:
        raise ParamError("need at least 99 replicates")
    if p.n < 4:
        raise SampleTooSmallError("hhg needs n >= 4")
    dx, dy = _hhg_distances(p, metric)
    observed = float(_hhg_sum(dx, dy))
    draws = np.empty(replicates)
    for i in range(replicates):
        perm = replicate_rng(seed, i).permutation(p.n)
        draws[i] = _hhg_sum(dx, dy[np.ix_(perm, perm)])
    settings = {"test": "hhg", "metric": metric, "n": p.n}
    return build_report(observed, draws, "permutation", seed, settings, tail="right")


def canova_statistic(p: PairedSample, k_neighbors: int = 4) -> float:
    """Within-neighborhood sum of squares: sum of (Y_i - Y_j)^2 over pairs
    with |rank(X_i) - rank(X_j)| < K. Small values signal dependence."""
    if k_neighbors < 2:
        raise ParamError("neighborhood size K must be >= 2")
    if p.n <= k_neighbors:
        raise ParamError(f"need n > K, got n={p.n}, K={k_neighbors}")
    rx = ranks(p.x).scores
    near = np.abs(rx[:, None] - rx[None, :]) < k_neighbors
    dy2 = (p.y[:, None] - p.y[None, :]) ** 2
    iu = np.triu_indices(p.n, k=1)
    return float(np.sum(dy2[iu][near[iu]]))


def canova_test(
    p: PairedSample, k_neighbors: int = 4, replicates: int = 999, seed: int = 0
) -> TestReport:
    """Left-tailed permutation test: dependence makes W small."""
    if replicates < 99:
        raise ParamError("need at least 99 replicates")
    observed = canova_statistic(p, k_neighbors)
    rx = ranks(p.x).scores
    near = np.abs(rx[:, None] - rx[None, :]) < k_neighbors
    iu = np.triu_indices(p.n, k=1)
    near_flat = near[iu]
    draws = np.empty(replicates)
    for i in range(replicates):
        perm = replicate_rng(seed, i).permutation(p.n)
        y = p.y[perm]
        dy2 = (y[:, None] - y[None, :]) ** 2
        draws[i] = np.sum(dy2[iu][near_flat])
    settings = {"test": "canova", "K": k_neighbors, "n": p.n}
    return build_report(observed, draws, "permutation", seed, settings, tail="left")
