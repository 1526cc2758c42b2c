"""Seeded generators for the synthetic families used throughout the tests.

All generators draw from a counter-based Philox stream keyed by the spec
seed, so identical specs give bit-identical output on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import ParamError
from .samples import PairedSample, SeriesSample

__all__ = ["GeneratorSpec", "generate"]

FAMILIES = ("gaussian", "t", "garch", "parabola", "circle", "clayton", "gaussian_copula")

# Burn-in for the GARCH recursion before keeping draws.
_GARCH_BURN_IN = 500


@dataclass(frozen=True)
class GeneratorSpec:
    """One synthetic family plus its parameters, sample size and seed.

    Families and parameters:
      gaussian:        rho                   -> PairedSample, standard normal margins
      t:               nu, rho (scale matrix) -> PairedSample
      garch:           alpha, beta, gamma     -> SeriesSample (GARCH(1,1))
      parabola:        sigma_eps              -> PairedSample, Y = X^2 + sigma_eps*eps
      circle:          sigma_n                -> PairedSample on the noisy unit circle
      clayton:         theta (> 0)            -> PairedSample of copula uniforms
      gaussian_copula: rho                    -> PairedSample of copula uniforms
    """

    family: str
    n: int
    seed: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParamError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.n < 2:
            raise ParamError("n must be >= 2")
        _VALIDATORS[self.family](self.params)


def _need(params: dict, key: str) -> float:
    if key not in params:
        raise ParamError(f"missing parameter {key!r}")
    return float(params[key])


def _check_rho(params):
    rho = _need(params, "rho")
    if not -1.0 < rho < 1.0:
        raise ParamError(f"rho must be in (-1, 1), got {rho}")


def _check_t(params):
    nu = _need(params, "nu")
    if nu <= 0:
        raise ParamError("nu must be positive")
    _check_rho(params)


def _check_garch(params):
    alpha = _need(params, "alpha")
    beta = _need(params, "beta")
    gamma = _need(params, "gamma")
    if alpha <= 0 or beta < 0 or gamma < 0 or beta + gamma >= 1:
        raise ParamError("need alpha > 0, beta, gamma >= 0 and beta + gamma < 1")


def _check_parabola(params):
    if _need(params, "sigma_eps") < 0:
        raise ParamError("sigma_eps must be >= 0")


def _check_circle(params):
    if _need(params, "sigma_n") < 0:
        raise ParamError("sigma_n must be >= 0")


def _check_clayton(params):
    # The conditional-inverse sampler needs theta > 0 (positive dependence).
    if _need(params, "theta") <= 0:
        raise ParamError("clayton sampler requires theta > 0")


_VALIDATORS = {
    "gaussian": _check_rho,
    "t": _check_t,
    "garch": _check_garch,
    "parabola": _check_parabola,
    "circle": _check_circle,
    "clayton": _check_clayton,
    "gaussian_copula": _check_rho,
}


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def _bivariate_normal(rng, n: int, rho: float) -> tuple[np.ndarray, np.ndarray]:
    z1 = rng.standard_normal(n)
    z2 = rng.standard_normal(n)
    return z1, rho * z1 + np.sqrt(1.0 - rho * rho) * z2


def generate(spec: GeneratorSpec) -> PairedSample | SeriesSample:
    """Draw one sample from the requested family; deterministic under seed."""
    rng = _rng(spec.seed)
    n = spec.n
    p = spec.params
    if spec.family == "gaussian":
        x, y = _bivariate_normal(rng, n, p["rho"])
        return PairedSample(x, y)
    if spec.family == "t":
        # Gaussian pair divided by a shared sqrt(chi2_nu / nu) factor.
        x, y = _bivariate_normal(rng, n, p["rho"])
        scale = np.sqrt(rng.chisquare(p["nu"], size=n) / p["nu"])
        return PairedSample(x / scale, y / scale)
    if spec.family == "garch":
        alpha, beta, gamma = p["alpha"], p["beta"], p["gamma"]
        total = n + _GARCH_BURN_IN
        eps = rng.standard_normal(total)
        x = np.empty(total)
        h = alpha / (1.0 - beta - gamma)  # stationary mean of the volatility
        for t in range(total):
            if t > 0:
                h = alpha + beta * h + gamma * x[t - 1] ** 2
            x[t] = eps[t] * np.sqrt(h)
        return SeriesSample(x[_GARCH_BURN_IN:])
    if spec.family == "parabola":
        x = rng.standard_normal(n)
        return PairedSample(x, x**2 + p["sigma_eps"] * rng.standard_normal(n))
    if spec.family == "circle":
        phi = rng.uniform(0.0, 2.0 * np.pi, size=n)
        r = 1.0 + p["sigma_n"] * rng.standard_normal(n)
        return PairedSample(r * np.cos(phi), r * np.sin(phi))
    if spec.family == "clayton":
        theta = p["theta"]
        u1 = rng.uniform(size=n)
        w = rng.uniform(size=n)
        # invert the conditional distribution C_{2|1}(u2 | u1) = w
        u2 = (u1 ** (-theta) * (w ** (-theta / (1.0 + theta)) - 1.0) + 1.0) ** (-1.0 / theta)
        return PairedSample(u1, u2)
    if spec.family == "gaussian_copula":
        x, y = _bivariate_normal(rng, n, p["rho"])
        return PairedSample(ndtr(x), ndtr(y))
    raise ParamError(f"unknown family {spec.family!r}")  # pragma: no cover
