"""Cramer-von Mises / Kolmogorov-Smirnov independence functionals on
empirical distributions, their lag aggregates, the eigenvalue null
distribution, and Moebius subset statistics."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import LagError, ParamError, SubsetError
from .resampling import TestReport, build_report, replicate_rng
from .samples import PairedSample, SeriesSample, lag_pairs

__all__ = [
    "CvmNullSpec",
    "SubsetIndex",
    "cvm_statistic",
    "ks_statistic",
    "cvm_lag_aggregate",
    "cvm_null_draws",
    "cvm_null_quantile",
    "cvm_test",
    "moebius_statistic",
]

# Moebius statistics blow up as 2^k; keep the exposed range small.
_MAX_MOEBIUS_K = 5


@dataclass(frozen=True)
class CvmNullSpec:
    """Truncated eigenvalue expansion of the CvM null distribution.

    The limiting variable is sum_{i,j<=M} eta_i eta_j W_ij^2 with
    eta_m = (m pi)^{-2} and W_ij iid standard normal.
    """

    truncation: int = 200
    mc_draws: int = 4000
    seed: int = 0

    def __post_init__(self):
        if self.truncation < 1:
            raise ParamError("truncation must be >= 1")
        if self.mc_draws < 1000:
            raise ParamError("mc_draws must be >= 1000")


@dataclass(frozen=True)
class SubsetIndex:
    """Subset A of coordinate indices 0..k-1 (at least two coordinates)."""

    members: tuple
    k: int

    def __post_init__(self):
        members = tuple(sorted(set(int(i) for i in self.members)))
        object.__setattr__(self, "members", members)
        if len(members) < 2:
            raise SubsetError("subset must contain at least two coordinates")
        if self.k > _MAX_MOEBIUS_K:
            raise SubsetError(f"moebius statistics exposed for k <= {_MAX_MOEBIUS_K}")
        if members[0] < 0 or members[-1] >= self.k:
            raise SubsetError(f"subset members must lie in 0..{self.k - 1}")


def _cvm_parts(x: np.ndarray, y: np.ndarray):
    """Joint and product empirical CDFs evaluated at the sample points."""
    ix = x[None, :] <= x[:, None]  # ix[t, j] = 1(x_j <= x_t)
    iy = y[None, :] <= y[:, None]
    n = len(x)
    joint = np.sum(ix & iy, axis=1) / n
    fx = np.sum(ix, axis=1) / n
    fy = np.sum(iy, axis=1) / n
    return joint, fx, fy


def cvm_statistic(p: PairedSample) -> float:
    """Mean squared gap (F_xy - F_x F_y)^2 over the observation points.

    Empirical CDFs use the n^{-1} normalization evaluated at sample points.
    Depends on the data only through ranks, hence distribution-free for
    continuous marginals.
    """
    if p.n < 3:
        raise ParamError("cvm statistic needs n >= 3")
    joint, fx, fy = _cvm_parts(p.x, p.y)
    return float(np.mean((joint - fx * fy) ** 2))


def ks_statistic(p: PairedSample) -> float:
    """sup |F_xy - F_x F_y| over the n^2 observation-pair grid."""
    ix = (p.x[None, :] <= p.x[:, None]).astype(float)
    iy = (p.y[None, :] <= p.y[:, None]).astype(float)
    joint = ix @ iy.T / p.n  # joint[s, t] = F_xy(x_s, y_t)
    gap = joint - np.outer(ix.mean(axis=1), iy.mean(axis=1))
    return float(np.max(np.abs(gap)))


def cvm_lag_aggregate(s: SeriesSample, k_max: int, weighted: bool = False) -> float:
    """Box-Pierce-Ljung style sum of lag CvM statistics.

    Unweighted: sum_{i<=k} D_i. Weighted: sum_{i<=k} (n - i) D_i, which has
    better size properties for large k.
    """
    n = s.n
    if not 1 <= k_max <= n - 3:
        raise LagError(f"k_max {k_max} out of range for series of length {n}")
    total = 0.0
    for i in range(1, k_max + 1):
        d_i = cvm_statistic(lag_pairs(s, i))
        total += (n - i) * d_i if weighted else d_i
    return total


def _shell_weights(m: int) -> np.ndarray:
    """eta_i * eta_j for cells (i, j) <= m in nested shell order.

    Shell s holds the cells with max(i, j) = s, so the first s^2 weights are
    exactly the full weight set for truncation s. Streams consumed in this
    order make draws at different truncations share their leading shells.
    """
    eta = (np.arange(1, m + 1) * np.pi) ** -2.0
    parts = []
    for s in range(m):
        col = eta[: s + 1] * eta[s]  # cells (1..s+1, s+1)
        row = eta[s] * eta[:s]  # cells (s+1, 1..s)
        parts.append(np.concatenate([col, row]))
    return np.concatenate(parts)


def cvm_null_draws(spec: CvmNullSpec) -> np.ndarray:
    """Monte Carlo draws of the truncated limiting null variable."""
    w = _shell_weights(spec.truncation)
    out = np.empty(spec.mc_draws)
    cells = w.size
    for d in range(spec.mc_draws):
        # float32 normals: rounding is orders of magnitude below MC error
        g = replicate_rng(spec.seed, d).standard_normal(cells, dtype=np.float32)
        out[d] = np.dot((g * g).astype(float), w)
    return out


def cvm_null_quantile(spec: CvmNullSpec, level: float) -> float:
    """Monte Carlo quantile of the truncated eigenvalue quadratic form."""
    if not 0.0 < level < 1.0:
        raise ParamError("level must be in (0, 1)")
    return float(np.quantile(cvm_null_draws(spec), level))


def cvm_test(p: PairedSample, replicates: int = 999, seed: int = 0) -> TestReport:
    """Permutation test on the CvM statistic (right tail).

    The indicator matrices are built once; each replicate evaluates the
    statistic on permuted indices.
    """
    if replicates < 99:
        raise ParamError("need at least 99 replicates")
    if p.n < 3:
        raise ParamError("cvm statistic needs n >= 3")
    n = p.n
    ix = p.x[None, :] <= p.x[:, None]
    iy = p.y[None, :] <= p.y[:, None]
    fx = np.sum(ix, axis=1) / n
    fy = np.sum(iy, axis=1) / n

    def stat_from(iy_perm, fy_perm):
        joint = np.sum(ix & iy_perm, axis=1) / n
        return float(np.mean((joint - fx * fy_perm) ** 2))

    observed = stat_from(iy, fy)
    draws = np.empty(replicates)
    for i in range(replicates):
        perm = replicate_rng(seed, i).permutation(n)
        draws[i] = stat_from(iy[np.ix_(perm, perm)], fy[perm])
    return build_report(
        observed, draws, "permutation", seed, {"test": "cvm", "n": n}, tail="right"
    )


def moebius_statistic(samples, subset: SubsetIndex, eval_points) -> np.ndarray:
    """Empirical Moebius functional mu_A at each evaluation point.

    mu_A(x) = sum_{B subset A} (-1)^{|A - B|} F_joint(x^B) prod_{j in A-B} F_j(x_j),
    where x^B keeps coordinate i for i in B and pads the rest with +inf.
    Vanishing of mu_A for every A characterizes joint independence.
    """
    vectors = [np.asarray(v, dtype=float) for v in samples]
    k = len(vectors)
    if subset.k != k:
        raise SubsetError(f"subset declared for k={subset.k} but {k} vectors given")
    n = len(vectors[0])
    if any(len(v) != n for v in vectors):
        raise SubsetError("all sample vectors must have the same length")
    pts = np.atleast_2d(np.asarray(eval_points, dtype=float))
    if pts.shape[1] != k:
        raise SubsetError(f"evaluation points must have {k} coordinates")

    a = subset.members
    # indicator[i][m, t] = 1(V_i[t] <= pts[m, i]); padding with +inf makes a
    # coordinate's indicator identically one, so only members of B matter.
    indicators = {i: vectors[i][None, :] <= pts[:, i : i + 1] for i in a}
    marginals = {i: indicators[i].mean(axis=1) for i in a}

    out = np.zeros(len(pts))
    for r in range(len(a) + 1):
        for b in itertools.combinations(a, r):
            joint_ind = np.ones((len(pts), n), dtype=bool)
            for i in b:
                joint_ind &= indicators[i]
            term = joint_ind.mean(axis=1)
            for j in a:
                if j not in b:
                    term = term * marginals[j]
            sign = -1.0 if (len(a) - r) % 2 else 1.0
            out += sign * term
    return out
