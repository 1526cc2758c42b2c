"""Local Gaussian correlation: local-likelihood fitting of a bivariate
Gaussian family at points, correlation maps, bandwidth rules, copula
diagonal closed forms, and LGC-based independence tests.

The local log likelihood at a point x for parameters
theta = (mu1, mu2, sigma1, sigma2, rho) is

    L(theta) = n^{-1} sum_i K_b(X_i - x) ln psi(X_i, theta)
               - integral K_b(v - x) psi(v, theta) dv,

with K_b a product kernel. The kernel here is the Gaussian product kernel,
which is what makes the penalty integral closed-form: with
K_b(v - x) = N(v1; x1, b1^2) N(v2; x2, b2^2) and psi = N(v; mu, S), the
integrand is a product of two Gaussian densities in v, and

    integral N(v; x, B) N(v; mu, S) dv = N(x; mu, S + B),  B = diag(b1^2, b2^2),

i.e. the convolution of the two Gaussians evaluated at x. All derivatives
of the penalty are therefore ordinary Gaussian-density derivatives with
covariance S + B. This choice is load-bearing: with any other kernel the
penalty would need numerical quadrature inside the optimizer.

The data enter the weighted term only through six kernel moments
(sum of w, w*v1, w*v2, w*v1^2, w*v2^2, w*v1*v2), so each optimizer
iteration is O(1) after one O(n) pass.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtr, ndtri

from .classical import Region
from .errors import (
    ConvergenceError,
    ParamDomainError,
    ParamError,
    RegionTooSmallError,
    SupportError,
)
from .resampling import TestReport, build_report, default_block_length, replicate_rng
from .samples import PairedSample, SeriesSample, normal_scores

__all__ = [
    "LgcParams",
    "LgcFit",
    "LgcMap",
    "LgcTestSpec",
    "local_loglik",
    "lgc_fit_point",
    "to_z_scale",
    "bandwidth_plugin",
    "bandwidth_cv",
    "lgc_map",
    "copula_diagonal_rho",
    "lgc_test",
]

_GRAD_TOL = 1e-6  # original-space convergence criterion
_MASS_FLOOR = 5.0  # minimum effective number of local points
_MAX_ITER = 500
_RHO_CAP = 0.9999999


@dataclass(frozen=True)
class LgcParams:
    """The 5-vector of a local Gaussian fit."""

    mu1: float
    mu2: float
    sigma1: float
    sigma2: float
    rho: float

    def __post_init__(self):
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ParamDomainError("sigma parameters must be positive")
        if not -1.0 < self.rho < 1.0:
            raise ParamDomainError("|rho| must be < 1")

    def as_array(self) -> np.ndarray:
        return np.array([self.mu1, self.mu2, self.sigma1, self.sigma2, self.rho])


@dataclass(frozen=True)
class LgcFit:
    """One converged (or failed) local fit."""

    point: tuple
    params: LgcParams | None
    bandwidths: tuple
    converged: bool
    objective: float
    gradient_norm: float


@dataclass(frozen=True)
class LgcMap:
    """Per-point fits over a grid; failed points are flagged, never filled."""

    points: np.ndarray  # (m, 2)
    fits: list
    scale: str  # 'raw' or 'z'

    def to_table(self) -> list:
        """Flat rows (x1, x2, rho, mu1, mu2, sigma1, sigma2, converged)."""
        rows = []
        for (x1, x2), fit in zip(self.points, self.fits):
            if fit.params is None:
                rows.append(
                    {
                        "x1": float(x1),
                        "x2": float(x2),
                        "rho": float("nan"),
                        "mu1": float("nan"),
                        "mu2": float("nan"),
                        "sigma1": float("nan"),
                        "sigma2": float("nan"),
                        "converged": False,
                    }
                )
            else:
                q = fit.params
                rows.append(
                    {
                        "x1": float(x1),
                        "x2": float(x2),
                        "rho": q.rho,
                        "mu1": q.mu1,
                        "mu2": q.mu2,
                        "sigma1": q.sigma1,
                        "sigma2": q.sigma2,
                        "converged": bool(fit.converged),
                    }
                )
        return rows


# ---------------------------------------------------------------------------
# kernel moments and the two likelihood terms
# ---------------------------------------------------------------------------


def _kernel_weights(x1, x2, point, b1, b2):
    u1 = (x1 - point[0]) / b1
    u2 = (x2 - point[1]) / b2
    return np.exp(-0.5 * (u1 * u1 + u2 * u2)) / (2.0 * np.pi * b1 * b2)


def _moments(x1, x2, w) -> np.ndarray:
    """(s0, s1, s2, s11, s22, s12): kernel moments divided by n."""
    n = len(x1)
    return (
        np.array(
            [
                w.sum(),
                np.dot(w, x1),
                np.dot(w, x2),
                np.dot(w, x1 * x1),
                np.dot(w, x2 * x2),
                np.dot(w, x1 * x2),
            ]
        )
        / n
    )


def _weighted_term(s, th):
    """Value and 5-gradient of n^{-1} sum_i w_i ln psi(X_i, theta)."""
    s0, s1, s2, s11, s22, s12 = s
    mu1, mu2, sg1, sg2, rho = th
    omr = 1.0 - rho * rho
    q11 = s11 - 2.0 * mu1 * s1 + mu1 * mu1 * s0
    q22 = s22 - 2.0 * mu2 * s2 + mu2 * mu2 * s0
    q12 = s12 - mu1 * s2 - mu2 * s1 + mu1 * mu2 * s0
    const = -np.log(2.0 * np.pi) - np.log(sg1) - np.log(sg2) - 0.5 * np.log(omr)
    quad = q11 / sg1**2 - 2.0 * rho * q12 / (sg1 * sg2) + q22 / sg2**2
    value = s0 * const - quad / (2.0 * omr)

    g_mu1 = ((s1 - mu1 * s0) / sg1**2 - rho * (s2 - mu2 * s0) / (sg1 * sg2)) / omr
    g_mu2 = ((s2 - mu2 * s0) / sg2**2 - rho * (s1 - mu1 * s0) / (sg1 * sg2)) / omr
    g_sg1 = -s0 / sg1 + (q11 / sg1**3 - rho * q12 / (sg1**2 * sg2)) / omr
    g_sg2 = -s0 / sg2 + (q22 / sg2**3 - rho * q12 / (sg2**2 * sg1)) / omr
    g_rho = s0 * rho / omr + (
        (1.0 + rho * rho) * q12 / (sg1 * sg2) - rho * (q11 / sg1**2 + q22 / sg2**2)
    ) / (omr * omr)
    return value, np.array([g_mu1, g_mu2, g_sg1, g_sg2, g_rho])


def _penalty_term(point, th, b1, b2):
    """Value and 5-gradient of the closed-form penalty N(x; mu, S + B)."""
    mu1, mu2, sg1, sg2, rho = th
    c11 = sg1 * sg1 + b1 * b1
    c22 = sg2 * sg2 + b2 * b2
    c12 = rho * sg1 * sg2
    det = c11 * c22 - c12 * c12
    p11 = c22 / det
    p22 = c11 / det
    p12 = -c12 / det
    d1 = point[0] - mu1
    d2 = point[1] - mu2
    e1 = p11 * d1 + p12 * d2
    e2 = p12 * d1 + p22 * d2
    val = np.exp(-0.5 * (d1 * e1 + d2 * e2)) / (2.0 * np.pi * np.sqrt(det))
    g_mu1 = val * e1
    g_mu2 = val * e2
    g_sg1 = val * (sg1 * (e1 * e1 - p11) + rho * sg2 * (e1 * e2 - p12))
    g_sg2 = val * (sg2 * (e2 * e2 - p22) + rho * sg1 * (e1 * e2 - p12))
    g_rho = val * sg1 * sg2 * (e1 * e2 - p12)
    return val, np.array([g_mu1, g_mu2, g_sg1, g_sg2, g_rho])


def _objective(s, point, th, b1, b2):
    wv, wg = _weighted_term(s, th)
    pv, pg = _penalty_term(point, th, b1, b2)
    return wv - pv, wg - pg


def local_loglik(
    p: PairedSample, point, params: LgcParams, bandwidths
) -> tuple[float, np.ndarray]:
    """Local log likelihood and its analytic 5-gradient at `point`."""
    b1, b2 = (float(b) for b in bandwidths)
    if b1 <= 0 or b2 <= 0:
        raise ParamError("bandwidths must be positive")
    w = _kernel_weights(p.x, p.y, point, b1, b2)
    s = _moments(p.x, p.y, w)
    value, grad = _objective(s, point, params.as_array(), b1, b2)
    return float(value), grad


# ---------------------------------------------------------------------------
# full 5-parameter fit
# ---------------------------------------------------------------------------


def _to_transformed(th):
    return np.array([th[0], th[1], np.log(th[2]), np.log(th[3]), np.arctanh(th[4])])


def _from_transformed(t):
    return np.array([t[0], t[1], np.exp(t[2]), np.exp(t[3]), np.tanh(t[4])])


def _chain(t):
    """d theta / d t for the (identity, identity, exp, exp, tanh) map."""
    return np.array([1.0, 1.0, np.exp(t[2]), np.exp(t[3]), 1.0 / np.cosh(t[4]) ** 2])


def _neg_obj_transformed(t, s, point, b1, b2):
    th = _from_transformed(t)
    value, grad = _objective(s, point, th, b1, b2)
    return -value, -grad * _chain(t)


def _newton_polish(t, s, point, b1, b2, rounds: int = 8):
    """Drive the transformed gradient to machine precision.

    BFGS is only translation/orthogonal equivariant, so diagonal affine maps
    of the data would otherwise leave tolerance-level discrepancies; Newton
    steps on the analytic gradient (finite-difference Hessian) restore exact
    estimator equivariance.
    """
    f0, g = _neg_obj_transformed(t, s, point, b1, b2)
    h = 1e-5
    for _ in range(rounds):
        if np.max(np.abs(g)) < 1e-12:
            break
        hess = np.empty((5, 5))
        for j in range(5):
            tp = t.copy()
            tp[j] += h
            tm = t.copy()
            tm[j] -= h
            gp = _neg_obj_transformed(tp, s, point, b1, b2)[1]
            gm = _neg_obj_transformed(tm, s, point, b1, b2)[1]
            hess[:, j] = (gp - gm) / (2.0 * h)
        hess = 0.5 * (hess + hess.T)
        try:
            step = np.linalg.solve(hess, -g)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        scale = 1.0
        improved = False
        for _ in range(6):
            cand = t + scale * step
            fc, gc = _neg_obj_transformed(cand, s, point, b1, b2)
            if np.isfinite(fc) and (
                fc < f0 or np.max(np.abs(gc)) < np.max(np.abs(g))
            ):
                t, f0, g = cand, fc, gc
                improved = True
                break
            scale *= 0.5
        if not improved:
            break
    return t, f0, g


def _fit_stats(s, point, b1, b2, starts):
    """Run the optimizer from each start; best objective wins."""
    best = None
    for th0 in starts:
        t0 = _to_transformed(np.asarray(th0, dtype=float))
        res = minimize(
            _neg_obj_transformed,
            t0,
            args=(s, point, b1, b2),
            method="BFGS",
            jac=True,
            options={"gtol": 1e-10, "maxiter": _MAX_ITER},
        )
        t, f, _ = _newton_polish(res.x, s, point, b1, b2)
        th = _from_transformed(t)
        _, grad = _objective(s, point, th, b1, b2)
        gnorm = float(np.linalg.norm(grad))
        cand = (f, gnorm, th)
        if best is None or cand[0] < best[0] - 1e-12 or (
            abs(cand[0] - best[0]) <= 1e-12 and cand[1] < best[1]
        ):
            best = cand
    f, gnorm, th = best
    return th, -f, gnorm


def _global_start(x1, x2):
    rho = np.clip(np.corrcoef(x1, x2)[0, 1], -0.985, 0.985)
    if not np.isfinite(rho):
        rho = 0.0
    return np.array([x1.mean(), x2.mean(), max(x1.std(), 1e-6), max(x2.std(), 1e-6), rho])


def _local_moment_start(s):
    s0, s1, s2, s11, s22, s12 = s
    mu1 = s1 / s0
    mu2 = s2 / s0
    v1 = max(s11 / s0 - mu1 * mu1, 1e-8)
    v2 = max(s22 / s0 - mu2 * mu2, 1e-8)
    cov = s12 / s0 - mu1 * mu2
    rho = np.clip(cov / np.sqrt(v1 * v2), -0.985, 0.985)
    return np.array([mu1, mu2, np.sqrt(v1), np.sqrt(v2), rho])


def _effective_mass(w, b1, b2) -> float:
    # kernel weights relative to the on-point value, i.e. the
    # full-weight-equivalent number of observations near the point
    return float(w.sum() * 2.0 * np.pi * b1 * b2)


def lgc_fit_point(
    p: PairedSample,
    point,
    bandwidths,
    mode: str = "full5",
    warm_start: LgcParams | None = None,
) -> LgcFit:
    """Fit the local Gaussian family at one point.

    mode='full5' fits all five parameters; mode='simplified2' holds
    mu = (0, 0) and sigma = (1, 1) fixed (intended for Z-scale data) and
    fits rho only. Starts: the global Gaussian MLE, kernel-weighted local
    moments, and optionally a caller-provided warm start.
    """
    if mode not in ("full5", "simplified2"):
        raise ParamError(f"unknown mode {mode!r}")
    b1, b2 = (float(b) for b in bandwidths)
    if b1 <= 0 or b2 <= 0:
        raise ParamError("bandwidths must be positive")
    point = (float(point[0]), float(point[1]))
    w = _kernel_weights(p.x, p.y, point, b1, b2)
    if _effective_mass(w, b1, b2) <= _MASS_FLOOR:
        raise ConvergenceError(f"insufficient local mass at point {point}")
    s = _moments(p.x, p.y, w)

    if mode == "simplified2":
        rho, conv, obj, gnorm = _rho_only_fit_arrays(
            np.array([point]), s[None, :], b1, b2, _global_start(p.x, p.y)[4]
        )
        params = None
        if np.isfinite(rho[0]):
            params = LgcParams(0.0, 0.0, 1.0, 1.0, float(rho[0]))
        return LgcFit(
            point, params, (b1, b2), bool(conv[0]), float(obj[0]), float(gnorm[0])
        )

    starts = [_global_start(p.x, p.y), _local_moment_start(s)]
    if warm_start is not None:
        starts.append(warm_start.as_array())
    th, objective, gnorm = _fit_stats(s, point, b1, b2, starts)
    converged = bool(gnorm < _GRAD_TOL)
    params = LgcParams(*th)
    return LgcFit(point, params, (b1, b2), converged, objective, gnorm)


# ---------------------------------------------------------------------------
# vectorized rho-only (simplified) fits
# ---------------------------------------------------------------------------


def _rho_term_grad(s, pts, rho, b1, b2):
    """d/d rho of the local log likelihood with mu = 0, sigma = 1 fixed.

    Vectorized over points: s has shape (m, 6), pts (m, 2), rho (m,).
    """
    s0, s11, s22, s12 = s[:, 0], s[:, 3], s[:, 4], s[:, 5]
    omr = 1.0 - rho * rho
    g_w = s0 * rho / omr + ((1.0 + rho * rho) * s12 - rho * (s11 + s22)) / (omr * omr)

    c11 = 1.0 + b1 * b1
    c22 = 1.0 + b2 * b2
    det = c11 * c22 - rho * rho
    p11 = c22 / det
    p22 = c11 / det
    p12 = -rho / det
    d1, d2 = pts[:, 0], pts[:, 1]
    e1 = p11 * d1 + p12 * d2
    e2 = p12 * d1 + p22 * d2
    val = np.exp(-0.5 * (d1 * e1 + d2 * e2)) / (2.0 * np.pi * np.sqrt(det))
    g_pen = val * (e1 * e2 - p12)
    return g_w - g_pen


def _rho_objective(s, pts, rho, b1, b2):
    s0, s11, s22, s12 = s[:, 0], s[:, 3], s[:, 4], s[:, 5]
    omr = 1.0 - rho * rho
    const = -np.log(2.0 * np.pi) - 0.5 * np.log(omr)
    quad = s11 - 2.0 * rho * s12 + s22
    wterm = s0 * const - quad / (2.0 * omr)

    c11 = 1.0 + b1 * b1
    c22 = 1.0 + b2 * b2
    det = c11 * c22 - rho * rho
    d1, d2 = pts[:, 0], pts[:, 1]
    e1 = (c22 * d1 - rho * d2) / det
    e2 = (-rho * d1 + c11 * d2) / det
    pen = np.exp(-0.5 * (d1 * e1 + d2 * e2)) / (2.0 * np.pi * np.sqrt(det))
    return wterm - pen


def _rho_only_newton(s, pts, zeta, b1, b2, iters: int = 60):
    """Damped Newton on zeta = atanh(rho), all points in parallel."""
    h = 1e-5
    for _ in range(iters):
        rho = np.tanh(zeta)
        chain = 1.0 - rho * rho
        g = _rho_term_grad(s, pts, rho, b1, b2) * chain
        if np.all(np.abs(g) < 1e-13):
            break
        rp = np.tanh(zeta + h)
        rm = np.tanh(zeta - h)
        gp = _rho_term_grad(s, pts, rp, b1, b2) * (1.0 - rp * rp)
        gm = _rho_term_grad(s, pts, rm, b1, b2) * (1.0 - rm * rm)
        curv = (gp - gm) / (2.0 * h)
        step = np.where(curv < -1e-300, -g / curv, np.sign(g))
        step = np.clip(step, -1.0, 1.0)
        zeta = zeta + step
        zeta = np.clip(zeta, -18.0, 18.0)
    return zeta


def _rho_only_fit_arrays(pts, s, b1, b2, global_rho):
    """Multi-start vectorized rho fits; returns (rho, converged, obj, gnorm)."""
    m = len(pts)
    local_cov = s[:, 5] / s[:, 0] - (s[:, 1] / s[:, 0]) * (s[:, 2] / s[:, 0])
    local_sd = np.sqrt(
        np.maximum(s[:, 3] / s[:, 0] - (s[:, 1] / s[:, 0]) ** 2, 1e-8)
        * np.maximum(s[:, 4] / s[:, 0] - (s[:, 2] / s[:, 0]) ** 2, 1e-8)
    )
    local_rho = np.clip(local_cov / local_sd, -0.95, 0.95)
    starts = [
        np.full(m, np.arctanh(np.clip(global_rho, -0.95, 0.95))),
        np.arctanh(local_rho),
        np.zeros(m),
    ]
    best_obj = np.full(m, -np.inf)
    best_zeta = np.zeros(m)
    for z0 in starts:
        z = _rho_only_newton(s, pts, z0.copy(), b1, b2)
        obj = _rho_objective(s, pts, np.tanh(z), b1, b2)
        better = np.isfinite(obj) & (obj > best_obj)
        best_obj = np.where(better, obj, best_obj)
        best_zeta = np.where(better, z, best_zeta)
    rho = np.tanh(best_zeta)
    grad = _rho_term_grad(s, pts, rho, b1, b2)
    gnorm = np.abs(grad)
    converged = gnorm < _GRAD_TOL
    rho = np.clip(rho, -_RHO_CAP, _RHO_CAP)
    return rho, converged, best_obj, gnorm


def _rho_fits_at_points(eval_pts, data, b1, b2):
    """Simplified rho fits at eval points (m, 2) for data (k, 2).

    Returns (rho, converged, eff_mass) arrays of length m.
    """
    x1, x2 = data[:, 0], data[:, 1]
    u1 = (eval_pts[:, 0][:, None] - x1[None, :]) / b1
    u2 = (eval_pts[:, 1][:, None] - x2[None, :]) / b2
    w = np.exp(-0.5 * (u1 * u1 + u2 * u2)) / (2.0 * np.pi * b1 * b2)
    k = len(x1)
    s = (
        np.column_stack(
            [
                w.sum(axis=1),
                w @ x1,
                w @ x2,
                w @ (x1 * x1),
                w @ (x2 * x2),
                w @ (x1 * x2),
            ]
        )
        / k
    )
    eff = w.sum(axis=1) * 2.0 * np.pi * b1 * b2
    usable = eff > _MASS_FLOOR
    rho = np.full(len(eval_pts), np.nan)
    converged = np.zeros(len(eval_pts), dtype=bool)
    if np.any(usable):
        g_rho = np.clip(np.corrcoef(x1, x2)[0, 1], -0.95, 0.95)
        if not np.isfinite(g_rho):
            g_rho = 0.0
        r, conv, _, _ = _rho_only_fit_arrays(
            eval_pts[usable], s[usable], b1, b2, g_rho
        )
        rho[usable] = r
        converged[usable] = conv
    return rho, converged, eff


# ---------------------------------------------------------------------------
# vectorized full 5-parameter fits (batched Newton)
# ---------------------------------------------------------------------------
#
# _weighted_term, _penalty_term and the transform helpers are written in
# elementwise numpy, so they evaluate a whole batch at once when fed
# parameter arrays of shape (5, m), moment arrays (6, m) and points (2, m).


def _batched_newton(t, s, pts, b1, b2, iters: int = 40):
    """Damped Newton for many independent 5-parameter problems at once.

    Hessians come from central differences of the analytic gradient; steps
    that do not decrease the objective are halved a few times and dropped
    if still failing.
    """
    f, g = _neg_obj_transformed(t, s, pts, b1, b2)
    h = 1e-5
    m = t.shape[1]
    eye = np.eye(5)[None, :, :]
    for _ in range(iters):
        gmax = np.max(np.abs(g), axis=0)
        active = np.isfinite(f) & (gmax > 1e-12)
        if not np.any(active):
            break
        hess = np.empty((5, 5, m))
        for j in range(5):
            tp = t.copy()
            tp[j] += h
            tm = t.copy()
            tm[j] -= h
            gp = _neg_obj_transformed(tp, s, pts, b1, b2)[1]
            gm = _neg_obj_transformed(tm, s, pts, b1, b2)[1]
            hess[:, j, :] = (gp - gm) / (2.0 * h)
        hm = np.moveaxis(hess, 2, 0)  # (m, 5, 5)
        hm = 0.5 * (hm + np.swapaxes(hm, 1, 2)) + 1e-10 * eye
        try:
            step = np.linalg.solve(hm, -g.T[:, :, None])[:, :, 0].T  # (5, m)
        except np.linalg.LinAlgError:
            step = -g  # fall back to a plain gradient step everywhere
        bad = ~np.all(np.isfinite(step), axis=0)
        step[:, bad] = -g[:, bad]
        alpha = np.where(active, 1.0, 0.0)
        accepted = np.zeros(m, dtype=bool)
        for _ in range(6):
            trial = t + alpha * step
            ft, gt = _neg_obj_transformed(trial, s, pts, b1, b2)
            better = active & ~accepted & np.isfinite(ft) & (
                (ft < f) | (np.max(np.abs(gt), axis=0) < gmax)
            )
            t[:, better] = trial[:, better]
            f[better] = ft[better]
            g[:, better] = gt[:, better]
            accepted |= better
            if np.all(accepted | ~active):
                break
            alpha = np.where(accepted, 0.0, alpha * 0.5)
        if not np.any(accepted):
            break
    return t, f, g


def _local_moment_start_batched(s):
    s0, s1, s2, s11, s22, s12 = s
    mu1 = s1 / s0
    mu2 = s2 / s0
    v1 = np.maximum(s11 / s0 - mu1 * mu1, 1e-8)
    v2 = np.maximum(s22 / s0 - mu2 * mu2, 1e-8)
    rho = np.clip((s12 / s0 - mu1 * mu2) / np.sqrt(v1 * v2), -0.985, 0.985)
    return np.stack([mu1, mu2, np.sqrt(v1), np.sqrt(v2), rho])


def _full5_fits_at_points(eval_pts, data, b1, b2):
    """Vectorized full fits at eval points (m, 2) for data rows (k, 2).

    Returns (theta (5, m), converged (m,), usable (m,)); unusable points
    (below the mass floor) carry NaN parameters.
    """
    x1, x2 = data[:, 0], data[:, 1]
    u1 = (eval_pts[:, 0][:, None] - x1[None, :]) / b1
    u2 = (eval_pts[:, 1][:, None] - x2[None, :]) / b2
    w = np.exp(-0.5 * (u1 * u1 + u2 * u2)) / (2.0 * np.pi * b1 * b2)
    k = len(x1)
    s_all = (
        np.stack([w.sum(axis=1), w @ x1, w @ x2, w @ (x1 * x1), w @ (x2 * x2), w @ (x1 * x2)])
        / k
    )
    usable = s_all[0] * 2.0 * np.pi * b1 * b2 > _MASS_FLOOR
    m = len(eval_pts)
    theta = np.full((5, m), np.nan)
    converged = np.zeros(m, dtype=bool)
    if not np.any(usable):
        return theta, converged, usable

    s = s_all[:, usable]
    pts = eval_pts[usable].T  # (2, mu)
    mu = s.shape[1]
    start_global = np.tile(_global_start(x1, x2)[:, None], (1, mu))
    start_local = _local_moment_start_batched(s)
    best_f = np.full(mu, np.inf)
    best_t = None
    for th0 in (start_local, start_global):
        t0 = np.stack(
            [th0[0], th0[1], np.log(th0[2]), np.log(th0[3]), np.arctanh(th0[4])]
        )
        t, f, _ = _batched_newton(t0, s, pts, b1, b2)
        better = np.isfinite(f) & (f < best_f)
        if best_t is None:
            best_t = t
        else:
            best_t[:, better] = t[:, better]
        best_f = np.where(better, f, best_f)
    th = _from_transformed(best_t)
    _, grad = _objective(s, pts, th, b1, b2)
    gnorm = np.sqrt(np.sum(grad * grad, axis=0))
    theta[:, usable] = th
    converged[usable] = np.isfinite(best_f) & (gnorm < _GRAD_TOL)
    return theta, converged, usable


# ---------------------------------------------------------------------------
# scales, bandwidths, maps
# ---------------------------------------------------------------------------


def to_z_scale(p: PairedSample) -> PairedSample:
    """Replace both coordinates by normal scores (Gaussian pseudo-observations)."""
    return PairedSample(normal_scores(p.x).scores, normal_scores(p.y).scores)


def bandwidth_plugin(n: int) -> float:
    """Plug-in rule 1.75 n^{-1/6}, intended for Z-scale fitting."""
    if n < 2:
        raise ParamError("n must be >= 2")
    return 1.75 * n ** (-1.0 / 6.0)


def bandwidth_cv(
    p: PairedSample,
    candidates,
    max_eval_points: int = 40,
) -> tuple[float, float]:
    """Leave-one-out local-Gaussian density cross-validation.

    For each candidate bandwidth, the score sums ln psi(X_i; theta_hat^{(-i)}(X_i))
    over a deterministic subset of evaluation points (evenly spaced in the
    x1 order), where theta_hat^{(-i)} is the full 5-parameter fit at X_i
    with X_i removed. The candidate maximizing the score wins. Candidates
    may be scalars (same bandwidth in both coordinates) or pairs.
    """
    cands = [
        (float(c), float(c)) if np.isscalar(c) else (float(c[0]), float(c[1]))
        for c in np.atleast_1d(np.asarray(candidates, dtype=object))
    ]
    if not cands:
        raise ParamError("candidate grid is empty")
    n = p.n
    m = min(n, max_eval_points)
    order = np.argsort(p.x, kind="stable")
    eval_idx = order[np.linspace(0, n - 1, m).round().astype(int)]

    best = None
    for b1, b2 in cands:
        score = 0.0
        ok = True
        for i in eval_idx:
            point = (p.x[i], p.y[i])
            w = _kernel_weights(p.x, p.y, point, b1, b2)
            w[i] = 0.0
            if _effective_mass(w, b1, b2) <= _MASS_FLOOR:
                ok = False
                break
            s = _moments(p.x, p.y, w) * n / (n - 1)
            starts = [_global_start(p.x, p.y), _local_moment_start(s)]
            th, _, _ = _fit_stats(s, point, b1, b2, starts)
            score += _log_psi_point(point, th)
        if ok and (best is None or score > best[0]):
            best = (score, (b1, b2))
    if best is None:
        raise ParamError("no candidate bandwidth produced usable fits")
    return best[1]


def _log_psi_point(point, th):
    mu1, mu2, sg1, sg2, rho = th
    z1 = (point[0] - mu1) / sg1
    z2 = (point[1] - mu2) / sg2
    omr = 1.0 - rho * rho
    return float(
        -np.log(2.0 * np.pi)
        - np.log(sg1)
        - np.log(sg2)
        - 0.5 * np.log(omr)
        - (z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2) / (2.0 * omr)
    )


def _quantile_grid(x1, x2, size: int, lo: float = 0.025, hi: float = 0.975):
    gx = np.linspace(np.quantile(x1, lo), np.quantile(x1, hi), size)
    gy = np.linspace(np.quantile(x2, lo), np.quantile(x2, hi), size)
    return gx, gy


def lgc_map(
    p: PairedSample,
    grid_size: int = 15,
    scale: str = "z",
    bandwidths=None,
    mode: str = "full5",
    grid_points=None,
) -> LgcMap:
    """Local correlation map over a grid (default: 15x15 between the 2.5%
    and 97.5% marginal quantiles).

    Within each grid row the previous converged fit warm-starts the next
    point. Points whose fit fails are flagged and never interpolated.
    """
    if scale not in ("raw", "z"):
        raise ParamError(f"scale must be 'raw' or 'z', got {scale!r}")
    work = to_z_scale(p) if scale == "z" else p
    if bandwidths is None:
        if scale == "z":
            b = bandwidth_plugin(p.n)
            bandwidths = (b, b)
        else:
            b = bandwidth_plugin(p.n)
            bandwidths = (b * work.x.std(), b * work.y.std())
    if grid_points is None:
        gx, gy = _quantile_grid(work.x, work.y, grid_size)
        pts = np.array([(a, c) for a in gx for c in gy])
    else:
        pts = np.atleast_2d(np.asarray(grid_points, dtype=float))

    fits = []
    warm = None
    last_x1 = None
    for x1, x2 in pts:
        if last_x1 is not None and x1 != last_x1:
            warm = None  # new grid row: restart the warm-start chain
        last_x1 = x1
        try:
            fit = lgc_fit_point(work, (x1, x2), bandwidths, mode, warm_start=warm)
        except (ConvergenceError, ParamDomainError):
            fit = LgcFit((x1, x2), None, tuple(bandwidths), False, -np.inf, np.inf)
        fits.append(fit)
        if fit.converged and fit.params is not None and mode == "full5":
            warm = fit.params
    return LgcMap(pts, fits, scale)


# ---------------------------------------------------------------------------
# copula diagonal closed form
# ---------------------------------------------------------------------------

_NORM_CONST = 1.0 / np.sqrt(2.0 * np.pi)


def _phi(z):
    return _NORM_CONST * np.exp(-0.5 * z * z)


def _clayton_derivs(theta: float, u: float):
    """(C_1, C_11) of the Clayton copula at the diagonal point (u, u)."""
    if theta < -1.0 or theta == 0.0:
        raise ParamError("clayton theta must lie in [-1, inf) excluding 0")
    s = 2.0 * u ** (-theta) - 1.0
    if s <= 0.0:
        raise SupportError(f"diagonal point u={u} lies outside the copula support")
    c1 = s ** (-1.0 / theta - 1.0) * u ** (-theta - 1.0)
    c11 = (1.0 + theta) * u ** (-theta - 2.0) * s ** (-1.0 / theta - 2.0) * (
        u ** (-theta) - s
    )
    return c1, c11


def _gaussian_copula_derivs(rho: float, u: float):
    """(C_1, C_11) of the Gaussian copula at the diagonal point (u, u)."""
    if not -1.0 < rho < 1.0:
        raise ParamError("gaussian copula rho must lie in (-1, 1)")
    z = ndtri(u)
    root = np.sqrt(1.0 - rho * rho)
    h = z * (1.0 - rho) / root
    c1 = ndtr(h)
    c11 = -_phi(h) * rho / (root * _phi(z))
    return float(c1), float(c11)


def copula_diagonal_rho(copula: str, param: float, d: float) -> float:
    """Canonical local correlation rho_Z(d, d) of an exchangeable copula.

    rho_Z(d,d) = -C11 phi(d) / sqrt(phi(ndtri(C1))^2 + (C11 phi(d))^2)
    with C1, C11 the first and second u1-partials at (Phi(d), Phi(d)).
    For the Gaussian copula this reduces to rho identically.
    """
    u = float(ndtr(d))
    if copula == "clayton":
        c1, c11 = _clayton_derivs(param, u)
    elif copula == "gaussian":
        c1, c11 = _gaussian_copula_derivs(param, u)
    else:
        raise ParamError(f"unknown copula {copula!r}")
    num = -c11 * _phi(d)
    den = np.sqrt(_phi(ndtri(c1)) ** 2 + (c11 * _phi(d)) ** 2)
    return float(num / den)


# ---------------------------------------------------------------------------
# independence test
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LgcTestSpec:
    """Configuration of the LGC test functional.

    region: None (default 10%-90% marginal quantile box), a (lo, hi) pair of
    quantile levels, or an explicit Region on the Z-scale. h: 'rho2' only.
    lags: inclusive (s1, s2) range for series input; ignored for pairs.
    mode: 'sum' or 'max' aggregation over lags.
    """

    region: object = None
    h: str = "rho2"
    lags: tuple | None = None
    mode: str = "sum"
    resampling: str = "permutation"
    block_length: int | None = None
    bandwidth: float | None = None
    fit_mode: str = "simplified2"

    def __post_init__(self):
        if self.h != "rho2":
            raise ParamError("only h='rho2' is implemented")
        if self.mode not in ("sum", "max"):
            raise ParamError("mode must be 'sum' or 'max'")
        if self.fit_mode not in ("simplified2", "full5"):
            raise ParamError("fit_mode must be 'simplified2' or 'full5'")
        if self.resampling not in ("permutation", "bootstrap", "block_bootstrap"):
            raise ParamError(f"unknown resampling {self.resampling!r}")
        if self.lags is not None:
            s1, s2 = self.lags
            if not 1 <= s1 <= s2:
                raise ParamError("lags must satisfy 1 <= s1 <= s2")
        if self.block_length is not None and self.block_length < 1:
            raise ParamError("block_length must be >= 1")


def _region_mask(pts: np.ndarray, region) -> np.ndarray:
    """Membership in S: a Region, a list of Regions (union), a (lo, hi)
    quantile box, or the keyword 'corners' (union of the four quartile
    corner boxes, which focuses the test on the tails)."""
    x1, x2 = pts[:, 0], pts[:, 1]
    if isinstance(region, Region):
        return region.contains(x1, x2)
    if isinstance(region, (list, tuple)) and region and isinstance(region[0], Region):
        mask = np.zeros(len(pts), dtype=bool)
        for box in region:
            mask |= box.contains(x1, x2)
        return mask
    if region == "corners":
        lo1, hi1 = np.quantile(x1, [0.25, 0.75])
        lo2, hi2 = np.quantile(x2, [0.25, 0.75])
        return ((x1 <= lo1) | (x1 >= hi1)) & ((x2 <= lo2) | (x2 >= hi2))
    lo, hi = (0.10, 0.90) if region is None else region
    box = Region(
        np.quantile(x1, lo), np.quantile(x1, hi), np.quantile(x2, lo), np.quantile(x2, hi)
    )
    return box.contains(x1, x2)


def _lgc_functional(pairs: np.ndarray, spec: LgcTestSpec, b: float) -> float:
    """T = average of rho_hat^2 over the sample points falling in S."""
    mask = _region_mask(pairs, spec.region)
    if not np.any(mask):
        raise RegionTooSmallError("no sample points inside the test region")
    if spec.fit_mode == "full5":
        theta, converged, _ = _full5_fits_at_points(pairs[mask], pairs, b, b)
        rho = theta[4]
    else:
        rho, converged, _ = _rho_fits_at_points(pairs[mask], pairs, b, b)
    good = converged & np.isfinite(rho)
    if not np.any(good):
        raise RegionTooSmallError("no converged fits inside the test region")
    return float(np.mean(rho[good] ** 2))


def _series_stat(z: np.ndarray, spec: LgcTestSpec, b: float) -> float:
    s1, s2 = spec.lags
    values = []
    for lag in range(s1, s2 + 1):
        pairs = np.column_stack([z[lag:], z[: len(z) - lag]])
        values.append(_lgc_functional(pairs, spec, b))
    values = np.asarray(values)
    return float(values.sum()) if spec.mode == "sum" else float(np.max(np.abs(values)))


def lgc_test(
    sample,
    spec: LgcTestSpec | None = None,
    replicates: int = 999,
    seed: int = 0,
) -> TestReport:
    """Resampled LGC independence test on the Z-scale (rho-only local fits).

    For a PairedSample, tests independence of the two coordinates; for a
    SeriesSample, tests serial independence over the lag range, aggregated
    by sum or max. p-value is right-tailed with the add-one convention.
    """
    if replicates < 99:
        raise ParamError("need at least 99 replicates")
    spec = spec or LgcTestSpec()

    if isinstance(sample, PairedSample):
        return _lgc_test_pairs(sample, spec, replicates, seed)
    if isinstance(sample, SeriesSample):
        return _lgc_test_series(sample, spec, replicates, seed)
    raise ParamError("sample must be a PairedSample or SeriesSample")


def _lgc_test_pairs(p: PairedSample, spec, replicates, seed) -> TestReport:
    zx = normal_scores(p.x).scores
    zy = normal_scores(p.y).scores
    b = spec.bandwidth or bandwidth_plugin(p.n)
    observed = _lgc_functional(np.column_stack([zx, zy]), spec, b)
    draws = np.empty(replicates)
    for i in range(replicates):
        rng = replicate_rng(seed, i)
        if spec.resampling == "permutation":
            zy_i = zy[rng.permutation(p.n)]
            zx_i = zx
        else:
            # ordinary bootstrap imposes the null by resampling the
            # coordinates independently; scores are recomputed since
            # resampling introduces ties
            zx_i = normal_scores(p.x[rng.integers(0, p.n, p.n)]).scores
            zy_i = normal_scores(p.y[rng.integers(0, p.n, p.n)]).scores
        draws[i] = _lgc_functional(np.column_stack([zx_i, zy_i]), spec, b)
    scheme = "permutation" if spec.resampling == "permutation" else "iid_bootstrap"
    settings = {"test": "lgc", "bandwidth": b, "mode": spec.mode, "n": p.n}
    return build_report(observed, draws, scheme, seed, settings, tail="right")


def _lgc_test_series(s: SeriesSample, spec, replicates, seed) -> TestReport:
    if spec.lags is None:
        spec = dataclasses.replace(spec, lags=(1, 1))
    z = normal_scores(s.values).scores
    n = s.n
    b = spec.bandwidth or bandwidth_plugin(n)
    observed = _series_stat(z, spec, b)
    block = spec.block_length or default_block_length(n)
    draws = np.empty(replicates)
    for i in range(replicates):
        rng = replicate_rng(seed, i)
        if spec.resampling == "permutation":
            z_i = z[rng.permutation(n)]
        elif spec.resampling == "bootstrap":
            z_i = normal_scores(s.values[rng.integers(0, n, n)]).scores
        else:
            n_blocks = -(-n // block)
            doubled = np.concatenate([s.values, s.values])
            starts = rng.integers(0, n, size=n_blocks)
            resampled = np.concatenate([doubled[st : st + block] for st in starts])[:n]
            z_i = normal_scores(resampled).scores
        draws[i] = _series_stat(z_i, spec, b)
    scheme = {
        "permutation": "permutation",
        "bootstrap": "iid_bootstrap",
        "block_bootstrap": "block_bootstrap",
    }[spec.resampling]
    settings = {
        "test": "lgc",
        "bandwidth": b,
        "lags": list(spec.lags),
        "mode": spec.mode,
        "resampling": spec.resampling,
        "n": n,
    }
    return build_report(observed, draws, scheme, seed, settings, tail="right")
