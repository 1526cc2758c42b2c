"""Permutation and bootstrap engine producing TestReports.

Null replicates use per-replicate Philox streams derived from
SeedSequence([master_seed, replicate_index]), so results do not depend on
evaluation order and are reproducible bit-for-bit across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .errors import ParamError
from .samples import PairedSample, SeriesSample

__all__ = [
    "TestReport",
    "replicate_rng",
    "build_report",
    "permute_test",
    "iid_bootstrap",
    "block_bootstrap",
]

SCHEMES = ("permutation", "iid_bootstrap", "block_bootstrap")


@dataclass(frozen=True)
class TestReport:
    """Outcome of one resampling test, with full provenance."""

    statistic: float
    replicates: int
    null_draws: np.ndarray
    p_value: float
    scheme: str
    seed: int
    settings: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        """JSON-serializable record sufficient to re-run the test."""
        return {
            "statistic": self.statistic,
            "replicates": self.replicates,
            "p_value": self.p_value,
            "scheme": self.scheme,
            "seed": self.seed,
            "settings": dict(self.settings),
            "null_draws": [float(v) for v in self.null_draws],
        }


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Independent Philox stream for replicate `index` of master `seed`."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


def build_report(
    statistic: float,
    null_draws: np.ndarray,
    scheme: str,
    seed: int,
    settings: dict,
    tail: str = "right",
) -> TestReport:
    """Assemble a TestReport with the add-one p-value.

    p = (1 + #{null >= observed}) / (R + 1) for tail='right'; mirrored for
    'left'. The add-one convention keeps the test exactly valid under
    exchangeability and the p-value strictly positive.
    """
    if scheme not in SCHEMES:
        raise ParamError(f"unknown scheme {scheme!r}")
    if tail not in ("right", "left"):
        raise ParamError(f"tail must be 'right' or 'left', got {tail!r}")
    null_draws = np.asarray(null_draws, dtype=float)
    r = len(null_draws)
    if tail == "right":
        exceed = int(np.count_nonzero(null_draws >= statistic))
    else:
        exceed = int(np.count_nonzero(null_draws <= statistic))
    p = (1.0 + exceed) / (r + 1.0)
    return TestReport(
        statistic=float(statistic),
        replicates=r,
        null_draws=null_draws,
        p_value=p,
        scheme=scheme,
        seed=int(seed),
        settings=dict(settings),
    )


def permute_test(
    stat: Callable[[np.ndarray, np.ndarray], float],
    p: PairedSample,
    replicates: int = 999,
    seed: int = 0,
    tail: str = "right",
    settings: dict | None = None,
) -> TestReport:
    """Permutation test: the y-coordinate is shuffled uniformly per replicate."""
    if replicates < 99:
        raise ParamError("need at least 99 replicates")
    observed = float(stat(p.x, p.y))
    draws = np.empty(replicates)
    for i in range(replicates):
        rng = replicate_rng(seed, i)
        draws[i] = stat(p.x, p.y[rng.permutation(p.n)])
    base = settings or {}
    return build_report(observed, draws, "permutation", seed, {**base, "tail": tail}, tail)


def iid_bootstrap(s: SeriesSample, replicates: int, seed: int) -> Iterator[SeriesSample]:
    """Resample the series values with replacement, length preserved."""
    if replicates < 1:
        raise ParamError("replicates must be >= 1")
    for i in range(replicates):
        rng = replicate_rng(seed, i)
        yield SeriesSample(s.values[rng.integers(0, s.n, size=s.n)])


def block_bootstrap(
    s: SeriesSample, block_length: int, replicates: int, seed: int
) -> Iterator[SeriesSample]:
    """Circular moving-block bootstrap to the original length.

    Blocks of `block_length` consecutive values (wrapping around the end)
    start at uniformly random positions; the final block is truncated to
    reach exactly n values.
    """
    n = s.n
    if not 1 <= block_length <= n:
        raise ParamError(f"block_length {block_length} out of range 1..{n}")
    n_blocks = -(-n // block_length)  # ceil
    doubled = np.concatenate([s.values, s.values])
    for i in range(replicates):
        rng = replicate_rng(seed, i)
        starts = rng.integers(0, n, size=n_blocks)
        pieces = [doubled[st : st + block_length] for st in starts]
        yield SeriesSample(np.concatenate(pieces)[:n])


def default_block_length(n: int) -> int:
    """ceil(n^{1/3}), the standard short-range-dependence order."""
    return int(np.ceil(n ** (1.0 / 3.0)))
