"""Pointwise dependence descriptors: the correlation curve from local
regression, and the local dependence function (mixed partial of the log
density)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import KdeSpec, _gauss
from .errors import BandwidthError, SupportError
from .samples import PairedSample

__all__ = [
    "CurveEstimate",
    "LdfGrid",
    "correlation_curve",
    "local_dependence_function",
]

# minimum effective (full-weight-equivalent) number of local points
_MASS_FLOOR = 5.0
_VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class CurveEstimate:
    """x-local correlation rho(x) on a grid; values always in [-1, 1]."""

    grid: np.ndarray
    values: np.ndarray
    bandwidth: float


@dataclass(frozen=True)
class LdfGrid:
    """Local dependence function gamma(x, y) on a grid.

    Points where the density estimate falls below the support floor are
    reported in `failed` and carry NaN values; they are never interpolated.
    """

    x_grid: np.ndarray
    y_grid: np.ndarray
    values: np.ndarray  # shape (len(x_grid), len(y_grid))
    bandwidths: tuple
    failed: np.ndarray  # boolean mask, same shape as values


def correlation_curve(p: PairedSample, grid, bandwidth: float) -> CurveEstimate:
    """Correlation curve rho(x) = beta(x) sd_X / sqrt((beta(x) sd_X)^2 + s2(x)).

    beta(x) is the slope of a kernel-weighted local-linear fit of Y on X;
    s2(x) is the Nadaraya-Watson residual variance E(Y^2|x) - E(Y|x)^2.
    The ratio structure keeps the values inside [-1, 1] with no clipping.
    """
    if bandwidth <= 0:
        raise BandwidthError("bandwidth must be positive")
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    sd_x = p.x.std()
    values = np.empty(len(grid))
    for idx, x0 in enumerate(grid):
        u = (p.x - x0) / bandwidth
        w = _gauss(u)
        if w.sum() / _gauss(np.zeros(1))[0] <= _MASS_FLOOR:
            raise SupportError(f"no effective data mass at grid point {x0}")
        # weighted least squares for y ~ a + c (x - x0)
        d = p.x - x0
        s0, s1, s2m = w.sum(), np.sum(w * d), np.sum(w * d * d)
        t0, t1 = np.sum(w * p.y), np.sum(w * d * p.y)
        det = s0 * s2m - s1 * s1
        beta = (s0 * t1 - s1 * t0) / det if det > 0 else 0.0
        mean_local = t0 / s0
        var_local = max(np.sum(w * p.y**2) / s0 - mean_local**2, _VAR_FLOOR)
        num = beta * sd_x
        values[idx] = num / np.sqrt(num * num + var_local)
    return CurveEstimate(grid, values, float(bandwidth))


def local_dependence_function(p: PairedSample, x_grid, y_grid, spec: KdeSpec) -> LdfGrid:
    """gamma(x, y) = d^2/dxdy ln f(x, y) from the Gaussian-product KDE.

    The mixed partial is computed analytically from the kernel derivatives:
    gamma = f_xy / f - (f_x / f)(f_y / f). Grid points with density below
    1e-12 are flagged failed rather than raising.
    """
    b = spec.bandwidths
    if len(b) != 2:
        raise BandwidthError("need exactly two bandwidths for a paired sample")
    b1, b2 = b
    xg = np.atleast_1d(np.asarray(x_grid, dtype=float))
    yg = np.atleast_1d(np.asarray(y_grid, dtype=float))
    u = (xg[:, None] - p.x[None, :]) / b1  # (gx, n)
    v = (yg[:, None] - p.y[None, :]) / b2  # (gy, n)
    kx = _gauss(u) / b1
    ky = _gauss(v) / b2
    dkx = -(u / b1) * kx  # d/dx of the x-kernel
    dky = -(v / b2) * ky

    f = kx @ ky.T / p.n
    fx = dkx @ ky.T / p.n
    fy = kx @ dky.T / p.n
    fxy = dkx @ dky.T / p.n

    failed = f < 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma = fxy / f - (fx / f) * (fy / f)
    gamma[failed] = np.nan
    return LdfGrid(xg, yg, gamma, (b1, b2), failed)
