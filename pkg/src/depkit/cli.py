"""Command-line surface: ingest CSV, run measures/tests/maps/simulations,
emit JSON-lines records (CSV alternative for maps).

Exit codes: 0 ok, 1 usage error, 2 data error, 3 numeric failure. Every
record carries the tool version, the command, the full parameter set and
the seed, so any result can be reproduced exactly.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .classical import Region, conditional_correlation, kendall, pearson, spearman, van_der_waerden
from .datagen import FAMILIES, GeneratorSpec, generate
from .density import DivergenceKind, density_test
from .distance import VectorSample, dcov_dcor, dcov_test
from .ecdf_stats import cvm_statistic, cvm_test, ks_statistic
from .errors import (
    DepkitError,
    DomainError,
    MissingColumnError,
    ParamError,
    ParseError,
)
from .hsic import KernelSpec, hsic_statistic, hsic_test, median_heuristic_sigma
from .lgc import LgcTestSpec, lgc_map, lgc_test
from .local_tests import EmbeddingSpec, bds_test, canova_test, hhg_test
from .resampling import permute_test
from .samples import PairedSample, SeriesSample

SEED_ENV_VAR = "DEPKIT_SEED"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _UsageError(Exception):
    pass


def ingest_csv(path: str, columns: list[str]):
    """Read the named numeric columns from a headered CSV file.

    Any row with a missing or non-numeric cell in a requested column is
    rejected with a row-numbered error.
    """
    if not os.path.exists(path):
        raise MissingColumnError(f"input file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError(f"{path}: empty file, header row required")
        for col in columns:
            if col not in reader.fieldnames:
                raise MissingColumnError(
                    f"{path}: no column {col!r}; available: {', '.join(reader.fieldnames)}"
                )
        data = {col: [] for col in columns}
        for row_number, row in enumerate(reader, start=2):  # row 1 is the header
            for col in columns:
                cell = row.get(col)
                if cell is None or cell.strip() == "":
                    raise ParseError(f"{path}: row {row_number}, column {col!r}: empty cell")
                try:
                    value = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}: row {row_number}, column {col!r}: cannot parse {cell!r}"
                    ) from None
                if not math.isfinite(value):
                    raise ParseError(
                        f"{path}: row {row_number}, column {col!r}: non-finite value {cell!r}"
                    )
                data[col].append(value)
    return {col: np.asarray(vals) for col, vals in data.items()}


def log_returns(prices: SeriesSample) -> SeriesSample:
    """r_t = 100 (ln p_t - ln p_{t-1}); prices must be positive."""
    if np.any(prices.values <= 0):
        raise DomainError("log returns need strictly positive prices")
    return SeriesSample(100.0 * np.diff(np.log(prices.values)))


# ---------------------------------------------------------------------------
# measure / test registries
# ---------------------------------------------------------------------------


def _measure_value(name: str, pair: PairedSample) -> float:
    if name == "pearson":
        return pearson(pair)
    if name == "spearman":
        return spearman(pair)
    if name == "kendall":
        return kendall(pair)
    if name == "vdw":
        return van_der_waerden(pair)
    if name == "cvm":
        return cvm_statistic(pair)
    if name == "ks":
        return ks_statistic(pair)
    if name == "dcor":
        _, r2 = dcov_dcor(VectorSample(pair.x), VectorSample(pair.y))
        return float(np.sqrt(r2))
    if name == "hsic":
        kx = KernelSpec("gaussian", median_heuristic_sigma(VectorSample(pair.x)))
        ky = KernelSpec("gaussian", median_heuristic_sigma(VectorSample(pair.y)))
        return hsic_statistic(VectorSample(pair.x), VectorSample(pair.y), kx, ky)
    raise _UsageError(f"unknown measure {name!r}")


MEASURES = ("pearson", "spearman", "kendall", "vdw", "cvm", "ks", "dcor", "hsic")
TESTS = (
    "pearson",
    "spearman",
    "kendall",
    "cvm",
    "dcov",
    "hsic",
    "kl",
    "hellinger",
    "bds",
    "canova",
    "hhg",
    "lgc",
)


def _run_test(name: str, pair: PairedSample, replicates: int, seed: int):
    if name in ("pearson", "spearman", "kendall"):
        fn = {"pearson": pearson, "spearman": spearman, "kendall": kendall}[name]

        def stat(x, y):
            return abs(fn(PairedSample(x, y)))

        report = permute_test(stat, pair, replicates, seed, settings={"test": name})
    elif name == "cvm":
        report = cvm_test(pair, replicates, seed)
    elif name == "dcov":
        report = dcov_test(VectorSample(pair.x), VectorSample(pair.y), 1.0, replicates, seed)
    elif name == "hsic":
        report = hsic_test(
            VectorSample(pair.x), VectorSample(pair.y), permutations=replicates, seed=seed
        )
    elif name in ("kl", "hellinger"):
        report = density_test(
            pair, DivergenceKind(name), permutations=replicates, seed=seed
        )
    elif name == "bds":
        # serial-dependence test: runs on the x column as a series
        series = SeriesSample(pair.x)
        spec = EmbeddingSpec(2, float(series.values.std()))
        report = bds_test(series, spec, replicates, seed)
    elif name == "canova":
        report = canova_test(pair, 4, replicates, seed)
    elif name == "hhg":
        report = hhg_test(pair, "euclidean", replicates, seed)
    elif name == "lgc":
        report = lgc_test(pair, LgcTestSpec(), replicates, seed)
    else:
        raise _UsageError(f"unknown test {name!r}")
    return report


# ---------------------------------------------------------------------------
# command implementations
# ---------------------------------------------------------------------------


def _load_pair(args) -> PairedSample:
    cols = ingest_csv(args.input, [args.x, args.y])
    x, y = cols[args.x], cols[args.y]
    if args.log_returns:
        x = log_returns(SeriesSample(x)).values
        y = log_returns(SeriesSample(y)).values
    return PairedSample(x, y)


def _emit(records: list[dict], out_path: str | None, fmt: str):
    if fmt == "json":
        text = "\n".join(json.dumps(r, sort_keys=True) for r in records) + "\n"
    else:
        import io

        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(records[0].keys()))
        writer.writeheader()
        writer.writerows(records)
        text = buf.getvalue()
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _provenance(args, command: str) -> dict:
    skip = {"func", "config"}
    params = {k: v for k, v in vars(args).items() if k not in skip}
    return {"tool": "depkit", "version": __version__, "command": command, "params": params}


def _cmd_measure(args) -> int:
    pair = _load_pair(args)
    records = []
    for name in args.measures.split(","):
        name = name.strip()
        if name not in MEASURES:
            raise _UsageError(f"unknown measure {name!r}; choose from {', '.join(MEASURES)}")
        rec = _provenance(args, "measure")
        rec.update({"measure": name, "n": pair.n, "value": _measure_value(name, pair)})
        records.append(rec)
    _emit(records, args.out, args.format)
    return EXIT_OK


def _cmd_test(args) -> int:
    pair = _load_pair(args)
    records = []
    for name in args.tests.split(","):
        name = name.strip()
        if name not in TESTS:
            raise _UsageError(f"unknown test {name!r}; choose from {', '.join(TESTS)}")
        report = _run_test(name, pair, args.replicates, args.seed)
        rec = _provenance(args, "test")
        rec.update({"test": name, "seed": args.seed, "report": report.to_record()})
        records.append(rec)
    _emit(records, args.out, args.format)
    return EXIT_OK


def _cmd_lgc_map(args) -> int:
    pair = _load_pair(args)
    scale = "z" if args.z_scale else "raw"
    lmap = lgc_map(pair, grid_size=args.grid, scale=scale, mode=args.mode)
    prov = _provenance(args, "lgc-map")
    rows = lmap.to_table()
    if args.format == "json":
        records = [{**prov, **row} for row in rows]
        _emit(records, args.out, "json")
    else:
        _emit(rows, args.out, "csv")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    params = {
        key: getattr(args, key)
        for key in ("rho", "nu", "alpha", "beta", "gamma", "sigma_eps", "sigma_n", "theta")
        if getattr(args, key) is not None
    }
    spec = GeneratorSpec(args.family, args.n, args.seed, params)
    sample = generate(spec)
    out = args.out
    if isinstance(sample, SeriesSample):
        header, rows = ["value"], [[v] for v in sample.values]
    else:
        header, rows = ["x", "y"], list(zip(sample.x, sample.y))
    if out:
        with open(out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(header)
        writer.writerows(rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _default_seed() -> int:
    return int(os.environ.get(SEED_ENV_VAR, "0"))


def _build_parser() -> _Parser:
    parser = _Parser(prog="depkit", description=__doc__)
    parser.add_argument("--config", help="JSON file with default option values")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--input", required=True, help="CSV file with a header row")
        sp.add_argument("--x", required=True, help="column for the first coordinate")
        sp.add_argument("--y", required=True, help="column for the second coordinate")
        sp.add_argument(
            "--log-returns",
            action="store_true",
            help="transform both columns to 100*diff(log) before analysis",
        )
        sp.add_argument("--out", help="output path (default: stdout)")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--threads", type=int, default=1, help="worker cap for numba kernels")

    sp = sub.add_parser("measure", help="compute dependence measures")
    add_common(sp)
    sp.add_argument("--measures", default="pearson", help=f"comma list from {MEASURES}")
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    sp.set_defaults(func=_cmd_measure)

    sp = sub.add_parser("test", help="run resampling independence tests")
    add_common(sp)
    sp.add_argument("--tests", default="dcov", help=f"comma list from {TESTS}")
    sp.add_argument("--replicates", type=int, default=999)
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    sp.set_defaults(func=_cmd_test)

    sp = sub.add_parser("lgc-map", help="local Gaussian correlation map")
    add_common(sp)
    sp.add_argument("--grid", type=int, default=15)
    sp.add_argument("--z-scale", action="store_true", default=True)
    sp.add_argument("--raw-scale", dest="z_scale", action="store_false")
    sp.add_argument("--mode", choices=("full5", "simplified2"), default="full5")
    sp.add_argument("--format", choices=("json", "csv"), default="csv")
    sp.set_defaults(func=_cmd_lgc_map)

    sp = sub.add_parser("simulate", help="write a synthetic sample as CSV")
    sp.add_argument("--family", required=True, choices=FAMILIES)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", help="output path (default: stdout)")
    for name in ("rho", "nu", "alpha", "beta", "gamma", "sigma-eps", "sigma-n", "theta"):
        sp.add_argument(f"--{name}", type=float, default=None)
    sp.set_defaults(func=_cmd_simulate)
    return parser


def _config_defaults(argv) -> dict:
    """Read the --config JSON, if given, as parser-level defaults.

    Parser-level defaults sit between built-in defaults and explicit flags,
    which yields the precedence: CLI flags > config file > defaults.
    """
    argv = list(argv)
    path = None
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif token.startswith("--config="):
            path = token.split("=", 1)[1]
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        config = json.load(fh)
    return {key.replace("-", "_"): value for key, value in config.items()}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = _build_parser()
    try:
        parser.set_defaults(**_config_defaults(argv))
        args = parser.parse_args(argv)
        if getattr(args, "seed", None) is None:
            args.seed = _default_seed()
        if getattr(args, "threads", 1) and args.threads > 0:
            try:
                import numba

                numba.set_num_threads(max(1, min(args.threads, numba.config.NUMBA_NUM_THREADS)))
            except ImportError:
                pass
        return args.func(args)
    except _UsageError as exc:
        _error_record("usage", str(exc))
        return EXIT_USAGE
    except (
        MissingColumnError,
        ParseError,
        DomainError,
        FileNotFoundError,
        json.JSONDecodeError,
    ) as exc:
        _error_record("data", str(exc))
        return EXIT_DATA
    except (DepkitError, ValueError, ArithmeticError) as exc:
        _error_record("numeric", str(exc))
        return EXIT_NUMERIC


def _error_record(kind: str, message: str):
    sys.stderr.write(
        json.dumps({"tool": "depkit", "version": __version__, "error": kind, "message": message})
        + "\n"
    )


if __name__ == "__main__":
    sys.exit(main())
