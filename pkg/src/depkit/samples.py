"""Sample containers and rank/score transformations.

Everything downstream (correlations, ECDF functionals, local fits) consumes
the containers defined here. All operations are pure functions; inputs are
never modified.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import DegenerateSampleError, LagError, TieError

__all__ = [
    "PairedSample",
    "SeriesSample",
    "ScoreVector",
    "ranks",
    "uniform_scores",
    "normal_scores",
    "standardize",
    "ecdf",
    "lag_pairs",
]


def _as_finite_vector(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class PairedSample:
    """n aligned observation pairs (x_i, y_i)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _as_finite_vector(self.x, "x"))
        object.__setattr__(self, "y", _as_finite_vector(self.y, "y"))
        if len(self.x) != len(self.y):
            raise ValueError(f"length mismatch: {len(self.x)} vs {len(self.y)}")
        if len(self.x) < 2:
            raise ValueError("paired sample needs n >= 2")

    @property
    def n(self) -> int:
        return len(self.x)

    def swapped(self) -> "PairedSample":
        return PairedSample(self.y, self.x)


@dataclass(frozen=True)
class SeriesSample:
    """A univariate time series."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _as_finite_vector(self.values, "values"))
        if len(self.values) < 2:
            raise ValueError("series needs n >= 2")

    @property
    def n(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ScoreVector:
    """Ranks or pseudo-uniform / normal scores derived from one vector.

    kind='rank'    -> average ranks in 1..n
    kind='uniform' -> rank/(n+1), strictly inside (0,1)
    kind='normal'  -> standard normal quantiles of the uniform scores
    """

    scores: np.ndarray
    kind: str
    tie_policy: str = "average"

    _KINDS = ("rank", "uniform", "normal")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"kind must be one of {self._KINDS}")
        object.__setattr__(self, "scores", np.asarray(self.scores, dtype=float))

    @property
    def n(self) -> int:
        return len(self.scores)


def ranks(v, tie_policy: str = "average") -> ScoreVector:
    """Average ranks of v (1..n). tie_policy='error' rejects tied inputs."""
    arr = _as_finite_vector(v, "v")
    if tie_policy not in ("average", "error"):
        raise ValueError(f"unknown tie_policy {tie_policy!r}")
    order = np.argsort(arr, kind="stable")
    sorted_vals = arr[order]
    has_ties = np.any(sorted_vals[1:] == sorted_vals[:-1]) if len(arr) > 1 else False
    if has_ties and tie_policy == "error":
        raise TieError("ties present in input")
    n = len(arr)
    rk = np.empty(n, dtype=float)
    if not has_ties:
        rk[order] = np.arange(1, n + 1, dtype=float)
    else:
        # average the positional ranks over each tie group
        pos = np.arange(1, n + 1, dtype=float)
        boundaries = np.flatnonzero(np.r_[True, sorted_vals[1:] != sorted_vals[:-1], True])
        avg = np.empty(n, dtype=float)
        for a, b in zip(boundaries[:-1], boundaries[1:]):
            avg[a:b] = pos[a:b].mean()
        rk[order] = avg
    return ScoreVector(rk, "rank", tie_policy)


def uniform_scores(v, tie_policy: str = "average") -> ScoreVector:
    """Pseudo-uniform scores rank/(n+1); always strictly inside (0, 1)."""
    rk = ranks(v, tie_policy)
    return ScoreVector(rk.scores / (rk.n + 1), "uniform", tie_policy)


def normal_scores(v, tie_policy: str = "average") -> ScoreVector:
    """Standard normal quantiles of the pseudo-uniform scores.

    Finite by construction since the uniform scores avoid 0 and 1.
    """
    u = uniform_scores(v, tie_policy)
    return ScoreVector(ndtri(u.scores), "normal", tie_policy)


def standardize(v) -> np.ndarray:
    """Center and scale to mean 0, variance 1 (population divisor n)."""
    arr = _as_finite_vector(v, "v")
    sd = arr.std()  # ddof=0: pure moment condition
    if sd <= 0.0:
        raise DegenerateSampleError("zero variance, cannot standardize")
    return (arr - arr.mean()) / sd


def ecdf(v, t: float) -> float:
    """Empirical distribution function n^{-1} sum 1(v_i <= t)."""
    arr = _as_finite_vector(v, "v")
    return float(np.count_nonzero(arr <= t)) / len(arr)


def lag_pairs(s: SeriesSample, k: int) -> PairedSample:
    """Pairs (X_t, X_{t-k}) for t = k+1..n; requires 1 <= k <= n-2."""
    n = s.n
    if not 1 <= k <= n - 2:
        raise LagError(f"lag {k} out of range for series of length {n}")
    return PairedSample(s.values[k:], s.values[: n - k])
